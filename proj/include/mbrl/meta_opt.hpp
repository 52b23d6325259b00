#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mbrl/discrepancy.hpp"
#include "mbrl/mdp.hpp"

namespace mbrl {

enum class BoundKind { G, chi, norm };

BoundKind parse_bound_kind(const std::string& name);
std::string to_string(BoundKind kind);

/// Closeness measure paired with each bound: d_chi for chi, d_kl otherwise.
PolicyDistance distance_for(BoundKind kind);

/// Candidate models sharing (S, A, gamma, R, mu).
struct ModelFamily {
  std::vector<FiniteMdp> candidates;
  bool contains_truth = false;
};

struct MetaIterate {
  int k = 0;
  TabularPolicy policy;
  int model = -1;
  double true_value = 0.0;
  double lower_bound = 0.0;
  double d_to_prev = 0.0;
};

struct MetaStep {
  TabularPolicy policy;
  int model = -1;
  double lower_bound = 0.0;
  double distance = 0.0;
};

/// Optimal deterministic policy by policy iteration; ties go to the lowest action.
TabularPolicy exact_policy_opt(const FiniteMdp& mdp);

/// V^{pi,M} - D_{pi_ref, delta}(M, pi), with D evaluated against the true model.
double lower_bound(const TabularPolicy& pi, const FiniteMdp& model, const TabularPolicy& pi_ref,
                   const FiniteMdp& m_star, double delta, BoundKind kind);

/// One iteration of the lower-bound maximization under d(pi, pi_k) <= delta.
///
/// Candidate policies are convex mixtures of pi_k toward the optimal policy of
/// every family member, at eight step sizes up to the largest feasible one.
/// Every candidate policy is scored against every model and the best pair
/// wins. The pair (pi_k, model with the smallest D at pi_k) is the incumbent,
/// so the achieved bound never drops below it.
MetaStep meta_step(const TabularPolicy& pi_k, const ModelFamily& family, const FiniteMdp& m_star, double delta,
                   BoundKind kind);

/// T iterations from pi_0; the returned trace has T + 1 entries.
std::vector<MetaIterate> run_meta(const TabularPolicy& pi_0, const ModelFamily& family, const FiniteMdp& m_star,
                                  double delta, BoundKind kind, int iterations);

/// Largest improvement of V^{., M_star} over pi reachable by a feasible
/// mixture step toward the optimal policy of any family member.
double local_improvement_gap(const TabularPolicy& pi, const ModelFamily& family, const FiniteMdp& m_star,
                             double delta, BoundKind kind, int grid = 50);

/// Random family: M_star plus (size - 1) perturbed copies, truth at index 0.
ModelFamily make_family(const FiniteMdp& m_star, int size, Rng& rng);

struct EmpiricalEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Plug-in estimate of D from trajectories of pi_ref on M_star. One state per
/// trajectory is taken at a geometric time; the per-state term is exact and
/// the sup terms (eps_max, B) are exact. kind must be G or norm.
EmpiricalEstimate empirical_discrepancy(const TrajectoryBatch& batch, const FiniteMdp& m_hat,
                                        const FiniteMdp& m_star, const TabularPolicy& pi,
                                        const TabularPolicy& pi_ref, double delta, BoundKind kind,
                                        std::uint64_t seed);

struct SampleComplexityConfig {
  std::vector<int> n_grid{100, 1000, 10000, 100000};
  /// Payoff bound of f; <= 0 means "use the largest f over the grid".
  double B_f = 0.0;
  int horizon = 60;
  int seeds = 20;
  std::uint64_t seed = 0;
};

/// Fixed evaluation grid for the sample-complexity experiment.
struct SampleComplexityProblem {
  FiniteMdp m_star;
  TabularPolicy pi_ref;
  std::vector<std::pair<TabularPolicy, FiniteMdp>> grid;
  double delta = 0.1;
  BoundKind kind = BoundKind::G;
};

SampleComplexityProblem default_sample_complexity_problem(std::uint64_t seed, int grid_size = 6);

struct SampleComplexityRow {
  int n = 0;
  double mean_sup_error = 0.0;
  double max_sup_error = 0.0;
  double hoeffding_bound = 0.0;  // 4 sqrt(B_f log n / n)
  double frac_within = 0.0;
};

struct SampleComplexityResult {
  std::vector<SampleComplexityRow> rows;
  double slope = 0.0;  // least-squares slope of log mean error vs log n
  double B_f = 0.0;
};

SampleComplexityResult sample_complexity_experiment(const SampleComplexityConfig& cfg,
                                                    const SampleComplexityProblem& problem);

}  // namespace mbrl

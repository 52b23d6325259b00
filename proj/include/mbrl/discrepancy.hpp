#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "mbrl/divergence.hpp"
#include "mbrl/mdp.hpp"

namespace mbrl {

/// Everything the discrepancy bounds are built from, for one tuple
/// (M_hat, M_star, pi, pi_ref, delta).
struct DiscrepancyReport {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps_max = 0.0;
  double d_kl = 0.0;
  double d_chi = 0.0;
  double bound_norm = 0.0;  // NaN when the models are not deterministic+embedded
  double bound_G = 0.0;
  double bound_chi = 0.0;
  double true_gap = 0.0;  // |V^{pi,M_star} - V^{pi,M_hat}|
  double L_lipschitz = 0.0;
  double B_state = 0.0;
  double delta = 0.0;
};

/// Single-step discrepancy table G[s][a] =
///   E_{s'~M_hat(s,a)} V(s') - E_{s'~M_star(s,a)} V(s'),  V = V^{pi, M_hat}.
Mat g_table(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi);
double g_value(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi, int s, int a);
/// G(s) = E_{a~pi(s)} G[s][a].
Vec g_state(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi);

/// V^{pi,M_hat} - V^{pi,M} against kappa E_{S~rho^{pi,M}, A~pi}[G(S,A)],
/// each side computed independently. margin = rhs - lhs.
BoundCheck telescoping_check(const FiniteMdp& m_hat, const FiniteMdp& m, const TabularPolicy& pi);

/// E_{S~rho^pi}[KL(pi(S), pi_ref(S))^{1/2}], visitation on M_star.
double d_kl_policies(const TabularPolicy& pi, const TabularPolicy& pi_ref, const FiniteMdp& m_star);
/// max(E_{rho^{pi_ref}}[chi2(pi(S), pi_ref(S))], E_{beta^{pi_ref}}[...]).
double d_chi_policies(const TabularPolicy& pi, const TabularPolicy& pi_ref, const FiniteMdp& m_star);

enum class PolicyDistance { kl, chi };

/// d_kl or d_chi; +infinity when pi leaves the support of pi_ref.
double policy_distance(PolicyDistance kind, const TabularPolicy& pi, const TabularPolicy& pi_ref,
                       const FiniteMdp& m_star);

/// Largest alpha in [0, 1] (20-step bisection) with
/// distance((1 - alpha) from + alpha toward) <= delta.
double feasible_mixture_weight(const TabularPolicy& from, const TabularPolicy& toward, double delta,
                               const std::function<double(const TabularPolicy&)>& distance, int steps = 20);

struct EpsilonStats {
  double eps1 = 0.0;     // E_{S~rho^{pi_ref}} |G(S)|
  double eps2 = 0.0;     // E_{S~beta^{pi_ref}} G(S)^2
  double eps_max = 0.0;  // max_S |G(S)|
  double eps1_pairwise = 0.0;  // E_{S~rho^{pi_ref}, A~pi} |G(S,A)|, diagnostic only
};

EpsilonStats epsilon_stats(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                           const TabularPolicy& pi_ref);

/// L = max_{s != s'} |V(s) - V(s')| / ||e(s) - e(s')||_2 for V = V^{pi, M_hat}.
/// +infinity when two states share an embedding but differ in value.
double lipschitz_estimate(const FiniteMdp& m_hat, const TabularPolicy& pi);

struct NormBounds {
  double bound_lemma = 0.0;  // kappa L E_{rho^pi, pi} ||err||
  double bound_prop = 0.0;   // kappa L E_{rho^{pi_ref}, pi} ||err|| + 2 kappa^2 delta B
  double bound_prop_max_error = 0.0;  // same with B replaced by max ||err||
  double lipschitz = 0.0;
  double state_bound = 0.0;  // B = max_s ||e(s)||
  double max_error = 0.0;
};

/// Prediction-error bounds for deterministic embedded models (l2 norm).
NormBounds discrepancy_norm(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                            const TabularPolicy& pi_ref, double delta);

/// kappa eps1 + kappa^2 delta eps_max.
double discrepancy_G(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                     const TabularPolicy& pi_ref, double delta);

/// (1-g)^{-1} eps1 + (1-g)^{-2} delta eps2 + (1-g)^{-5/2} delta^{3/2} eps_max.
double discrepancy_chi(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                       const TabularPolicy& pi_ref, double delta);

/// Constants as they come out of the chi-square chain argument:
/// kappa eps1 + kappa (1-g)^{-1} delta^{1/2} eps2^{1/2} + kappa (1-g)^{-3/2} delta^{3/4} eps_max.
double discrepancy_chi_chain_form(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                                  const TabularPolicy& pi_ref, double delta);

double true_gap(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi);

DiscrepancyReport discrepancy_report(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                                     const TabularPolicy& pi_ref, double delta);

/// One-to-one relabelling of states: state s becomes `perm[s]`. The new
/// embedding (rows indexed by the new labels) defaults to the old one carried
/// along; supplying a different matrix changes the state representation.
struct StateBijection {
  std::vector<int> perm;
  std::optional<Mat> embedding;
};

FiniteMdp transform_mdp(const FiniteMdp& mdp, const StateBijection& map);
TabularPolicy transform_policy(const TabularPolicy& pi, const StateBijection& map);
Vec transform_state_vector(const Vec& v, const StateBijection& map);

}  // namespace mbrl

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbrl/rng.hpp"

namespace mbrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerance applied to every probability vector on construction.
inline constexpr double kProbTol = 1e-12;

/// Finite discounted MDP with a known reward and initial distribution.
///
/// The transition tensor P[s][a][s'] is stored as an (S*A) x S matrix whose
/// row `s * A + a` is the next-state distribution of the pair (s, a). Rows are
/// validated, never renormalized. Deterministic models use one-hot rows of the
/// same storage and are flagged on construction.
class FiniteMdp {
 public:
  FiniteMdp(int n_states, int n_actions, Mat transition, Mat reward, double gamma, Vec init_dist,
            std::optional<Mat> embedding = std::nullopt);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  /// gamma / (1 - gamma)
  double kappa() const { return gamma_ / (1.0 - gamma_); }

  const Mat& transition() const { return transition_; }
  auto next_dist(int s, int a) const { return transition_.row(s * n_actions_ + a); }
  const Mat& reward() const { return reward_; }
  double reward(int s, int a) const { return reward_(s, a); }
  double reward_max() const { return reward_.cwiseAbs().maxCoeff(); }
  const Vec& init_dist() const { return init_dist_; }

  bool deterministic() const { return deterministic_; }
  /// Successor of (s, a); only valid for deterministic models.
  int successor(int s, int a) const;

  bool has_embedding() const { return embedding_.has_value(); }
  /// n_states x d matrix of state features; throws if absent.
  const Mat& embedding() const;

  FiniteMdp with_transition(Mat transition) const;
  FiniteMdp with_embedding(Mat embedding) const;

  /// Same spaces, discount, reward and initial distribution.
  bool shares_spaces_with(const FiniteMdp& other) const;

 private:
  int n_states_;
  int n_actions_;
  Mat transition_;
  Mat reward_;
  double gamma_;
  Vec init_dist_;
  std::optional<Mat> embedding_;
  bool deterministic_ = false;
};

/// Row-stochastic action distribution per state.
class TabularPolicy {
 public:
  explicit TabularPolicy(Mat probs);

  static TabularPolicy uniform(int n_states, int n_actions);
  static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions);
  static TabularPolicy random(int n_states, int n_actions, Rng& rng);
  /// (1 - alpha) * a + alpha * b
  static TabularPolicy mixture(const TabularPolicy& a, const TabularPolicy& b, double alpha);

  int n_states() const { return static_cast<int>(probs_.rows()); }
  int n_actions() const { return static_cast<int>(probs_.cols()); }
  const Mat& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }
  auto row(int s) const { return probs_.row(s); }

 private:
  Mat probs_;
};

enum class DistKind { rho, beta, custom };

/// Probability vector over states.
struct StateDist {
  StateDist(Vec w, DistKind k);
  Vec weights;
  DistKind kind;
};

struct ValueVector {
  Vec v;
  /// <mu, v>
  double scalar;
};

struct Transition {
  int state;
  int action;
  double reward;
  int next_state;
};

struct Episode {
  int initial_state;
  std::vector<Transition> steps;
  /// State at index t (0 = initial state, steps.size() = state after the last step).
  int state_at(std::size_t t) const { return t == 0 ? initial_state : steps[t - 1].next_state; }
};

struct TrajectoryBatch {
  std::vector<Episode> episodes;
  std::string policy_id;
  std::uint64_t seed = 0;
};

/// P_pi[s][s'] = sum_a pi(a|s) P[s][a][s'].
Mat policy_kernel(const FiniteMdp& mdp, const TabularPolicy& pi);
/// r_pi[s] = sum_a pi(a|s) R[s][a].
Vec policy_reward(const FiniteMdp& mdp, const TabularPolicy& pi);

/// Exact value by solving (I - gamma P_pi) v = r_pi.
ValueVector value_fn(const FiniteMdp& mdp, const TabularPolicy& pi);
/// Q[s][a] = R[s][a] + gamma * E_{s'} v(s').
Mat q_values(const FiniteMdp& mdp, const Vec& v);

/// Discounted state visitation (1-gamma) sum_t gamma^t p(S_t).
StateDist rho(const FiniteMdp& mdp, const TabularPolicy& pi);
/// Step-reweighted visitation (1-gamma)^2 sum_{t>=1} t gamma^{t-1} p(S_t).
StateDist beta(const FiniteMdp& mdp, const TabularPolicy& pi);

/// Normalized resolvent (1-gamma)(I - gamma P_pi)^{-1}. Row-stochastic; the
/// discounted visitation from mu is resolvent^T mu.
Mat resolvent(const FiniteMdp& mdp, const TabularPolicy& pi);
Mat resolvent(const Mat& kernel, double gamma);

/// Distribution after one step of a row-stochastic kernel: kernel^T mu.
inline Vec push_forward(const Mat& kernel, const Vec& mu) { return kernel.transpose() * mu; }

/// n episodes of fixed length `horizon` starting from mu. Deterministic in seed.
TrajectoryBatch sample_trajectories(const FiniteMdp& mdp, const TabularPolicy& pi, int n, int horizon,
                                    std::uint64_t seed, std::string policy_id = "pi");

/// One state per episode taken at a Geometric(1 - gamma) time, so the samples
/// are distributed per the discounted visitation. Times past the episode end
/// are clamped to its last state, a bias of at most gamma^(horizon+1).
std::vector<int> geometric_stop_states(const TrajectoryBatch& batch, double gamma, std::uint64_t seed);

}  // namespace mbrl

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbrl/rng.hpp"

namespace mbrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct StepResult {
  Vec next_state;
  double reward;
};

/// Continuous-state environment whose reward is a known function of
/// (state, action). States are the observations.
struct ContinuousEnv {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 200;
  Vec action_low;
  Vec action_high;
  /// Expected optimal undiscounted return over one episode from the reset distribution.
  std::optional<double> known_optimum;
  double noise_std = 0.0;

  std::function<Vec(Rng&)> reset;
  /// Noise-free next state for an already clipped action.
  std::function<Vec(const Vec&, const Vec&)> dynamics;
  std::function<double(const Vec&, const Vec&)> reward;

  Vec clip(const Vec& action) const;
  /// s' = dynamics(s, clip(a)) + noise_std * noise, r = reward(s, clip(a)).
  StepResult step(const Vec& state, const Vec& action, const Vec& noise) const;
  StepResult step(const Vec& state, const Vec& action, Rng& rng) const;
};

struct LqrSystem {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;
  Vec init_mean;
  double init_std = 0.0;
  double noise_std = 0.0;
  int horizon = 0;
};

struct RiccatiSolution {
  std::vector<Mat> P;     // P[t]: cost-to-go matrix with horizon - t steps left, P[horizon] = 0
  std::vector<Mat> K;     // a_t = -K[t] s_t
  std::vector<double> c;  // noise-induced constant of the cost-to-go
};

/// Finite-horizon Riccati recursion for cost sum_t s'Qs + a'Ra.
RiccatiSolution riccati(const LqrSystem& sys);
/// Expected optimal cost E[s0' P0 s0] + c0 under the system's initial distribution.
double lqr_optimal_cost(const LqrSystem& sys);

/// Random linear system with dims states and dims actions: A scaled to
/// spectral radius 0.98, noise std 0.01, r = -|s|^2 - 0.1 |a|^2, actions in
/// [-10, 10], horizon 200, s0 ~ N(c, 0.1^2 I) for a fixed unit vector c.
LqrSystem lqr_system(int dims, std::uint64_t seed);
ContinuousEnv lqr_env(int dims, std::uint64_t seed);

struct PendulumGrid {
  int n_theta = 201;
  int n_velocity = 201;
  int n_torque = 41;
};

/// Optimal expected return of the pendulum task by backward dynamic
/// programming on a (theta, velocity) grid with bilinear interpolation.
double pendulum_dp_optimum(const PendulumGrid& grid = {});

/// Torque-limited pendulum, theta measured from upright: theta'' = (g/l) sin(theta) + u/(m l^2),
/// g = 10, m = l = 1, dt = 0.05, |u| <= 2, |theta'| <= 8, horizon 200.
/// Observation (cos theta, sin theta, theta'); r = -(theta^2 + 0.1 theta'^2 + 0.001 u^2).
/// known_optimum comes from the default DP grid, computed once per process.
ContinuousEnv pendulum_env(bool with_optimum = true);

/// "lqr2", "lqr3", "lqr4" or "pendulum".
ContinuousEnv make_env(const std::string& name);

/// Running per-dimension mean and variance.
struct NormStats {
  static constexpr double kStdFloor = 1e-6;

  explicit NormStats(int dim = 0) : mean(Vec::Zero(dim)), m2(Vec::Zero(dim)) {}

  Vec mean;
  Vec m2;  // sum of squared deviations
  double count = 0.0;

  int dim() const { return static_cast<int>(mean.size()); }
  /// Population std floored at kStdFloor; 1 while empty.
  Vec std() const;
};

/// Columns of `batch` are samples.
NormStats update_stats(const NormStats& stats, const Mat& batch);
NormStats merge(const NormStats& a, const NormStats& b);
Mat normalize(const NormStats& stats, const Mat& x);
Mat denormalize(const NormStats& stats, const Mat& x);

}  // namespace mbrl

#include "mbrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mbrl {

namespace {
// Wide enough that the Riccati controller never saturates from the reset distribution.
constexpr double kLqrActionBound = 10.0;
}  // namespace

Vec ContinuousEnv::clip(const Vec& action) const {
  if (action.size() != action_dim) throw std::invalid_argument(name + ": action has wrong dimension");
  return action.cwiseMax(action_low).cwiseMin(action_high);
}

StepResult ContinuousEnv::step(const Vec& state, const Vec& action, const Vec& noise) const {
  if (state.size() != state_dim) throw std::invalid_argument(name + ": state has wrong dimension");
  if (noise.size() != state_dim) throw std::invalid_argument(name + ": noise has wrong dimension");
  const Vec a = clip(action);
  return {dynamics(state, a) + noise_std * noise, reward(state, a)};
}

StepResult ContinuousEnv::step(const Vec& state, const Vec& action, Rng& rng) const {
  return step(state, action, rng.normal_vector(state_dim));
}

RiccatiSolution riccati(const LqrSystem& sys) {
  const auto n = sys.A.rows();
  const int T = sys.horizon;
  RiccatiSolution out;
  out.P.assign(static_cast<std::size_t>(T) + 1, Mat::Zero(n, n));
  out.K.assign(static_cast<std::size_t>(T), Mat::Zero(sys.B.cols(), n));
  out.c.assign(static_cast<std::size_t>(T) + 1, 0.0);
  const double var = sys.noise_std * sys.noise_std;
  for (int t = T - 1; t >= 0; --t) {
    const Mat& P = out.P[static_cast<std::size_t>(t) + 1];
    const Mat gain_lhs = sys.R + sys.B.transpose() * P * sys.B;
    const Mat K = gain_lhs.ldlt().solve(sys.B.transpose() * P * sys.A);
    const Mat closed = sys.A - sys.B * K;
    Mat next = sys.Q + K.transpose() * sys.R * K + closed.transpose() * P * closed;
    out.P[static_cast<std::size_t>(t)] = 0.5 * (next + next.transpose());
    out.K[static_cast<std::size_t>(t)] = K;
    out.c[static_cast<std::size_t>(t)] = out.c[static_cast<std::size_t>(t) + 1] + var * P.trace();
  }
  return out;
}

double lqr_optimal_cost(const LqrSystem& sys) {
  const RiccatiSolution sol = riccati(sys);
  const Mat& P0 = sol.P.front();
  return sys.init_mean.dot(P0 * sys.init_mean) + sys.init_std * sys.init_std * P0.trace() + sol.c.front();
}

LqrSystem lqr_system(int dims, std::uint64_t seed) {
  if (dims < 2 || dims > 4) throw std::invalid_argument("lqr_system: dims must be 2, 3 or 4");
  Rng rng(seed ^ (0x1a2b3c4dULL * static_cast<std::uint64_t>(dims)));
  Mat A(dims, dims);
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j) A(i, j) = rng.normal();
  const double radius = A.eigenvalues().cwiseAbs().maxCoeff();
  A *= 0.98 / radius;
  Mat B = Mat::Identity(dims, dims);
  for (int i = 0; i < dims; ++i)
    for (int j = 0; j < dims; ++j) B(i, j) += 0.2 * rng.normal();
  Vec c = rng.normal_vector(dims);
  LqrSystem sys;
  sys.A = A;
  sys.B = B;
  sys.Q = Mat::Identity(dims, dims);
  sys.R = 0.1 * Mat::Identity(dims, dims);
  sys.init_mean = c / c.norm();
  sys.init_std = 0.1;
  sys.noise_std = 0.01;
  sys.horizon = 200;
  return sys;
}

ContinuousEnv lqr_env(int dims, std::uint64_t seed) {
  const LqrSystem sys = lqr_system(dims, seed);
  ContinuousEnv env;
  env.name = "lqr" + std::to_string(dims);
  env.state_dim = dims;
  env.action_dim = dims;
  env.horizon = sys.horizon;
  env.action_low = Vec::Constant(dims, -kLqrActionBound);
  env.action_high = Vec::Constant(dims, kLqrActionBound);
  env.noise_std = sys.noise_std;
  env.known_optimum = -lqr_optimal_cost(sys);
  env.reset = [mean = sys.init_mean, sd = sys.init_std](Rng& rng) -> Vec {
    return mean + sd * rng.normal_vector(mean.size());
  };
  env.dynamics = [A = sys.A, B = sys.B](const Vec& s, const Vec& a) -> Vec { return A * s + B * a; };
  env.reward = [](const Vec& s, const Vec& a) { return -s.squaredNorm() - 0.1 * a.squaredNorm(); };
  return env;
}

namespace {

constexpr double kGravity = 10.0;
constexpr double kMass = 1.0;
constexpr double kLength = 1.0;
constexpr double kDt = 0.05;
constexpr double kMaxTorque = 2.0;
constexpr double kMaxSpeed = 8.0;
constexpr int kPendulumHorizon = 200;

double wrap_angle(double theta) {
  return std::remainder(theta, 2.0 * std::numbers::pi);
}

struct PendulumState {
  double theta;
  double velocity;
};

PendulumState pendulum_step(double theta, double velocity, double u) {
  const double accel = kGravity / kLength * std::sin(theta) + u / (kMass * kLength * kLength);
  const double v = std::clamp(velocity + accel * kDt, -kMaxSpeed, kMaxSpeed);
  return {wrap_angle(theta + v * kDt), v};
}

double pendulum_reward(double theta, double velocity, double u) {
  const double th = wrap_angle(theta);
  return -(th * th + 0.1 * velocity * velocity + 0.001 * u * u);
}

// Bilinear interpolation on a periodic-theta, clamped-velocity grid.
class GridValue {
 public:
  GridValue(int n_theta, int n_velocity)
      : nt_(n_theta), nv_(n_velocity), values_(static_cast<std::size_t>(n_theta) * n_velocity, 0.0) {}

  double theta_at(int i) const { return -std::numbers::pi + 2.0 * std::numbers::pi * i / nt_; }
  double velocity_at(int j) const { return -kMaxSpeed + 2.0 * kMaxSpeed * j / (nv_ - 1); }
  double& at(int i, int j) { return values_[static_cast<std::size_t>(i) * nv_ + j]; }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * nv_ + j]; }

  double interpolate(double theta, double velocity) const {
    const double ft = (wrap_angle(theta) + std::numbers::pi) / (2.0 * std::numbers::pi) * nt_;
    int i0 = static_cast<int>(std::floor(ft));
    const double wt = ft - i0;
    i0 = ((i0 % nt_) + nt_) % nt_;
    const int i1 = (i0 + 1) % nt_;
    const double fv = std::clamp((velocity + kMaxSpeed) / (2.0 * kMaxSpeed) * (nv_ - 1), 0.0, nv_ - 1.0);
    const int j0 = std::min(static_cast<int>(std::floor(fv)), nv_ - 2);
    const double wv = fv - j0;
    return (1 - wt) * ((1 - wv) * at(i0, j0) + wv * at(i0, j0 + 1)) +
           wt * ((1 - wv) * at(i1, j0) + wv * at(i1, j0 + 1));
  }

 private:
  int nt_;
  int nv_;
  std::vector<double> values_;
};

}  // namespace

double pendulum_dp_optimum(const PendulumGrid& grid) {
  if (grid.n_theta < 4 || grid.n_velocity < 3 || grid.n_torque < 2)
    throw std::invalid_argument("pendulum_dp_optimum: grid too coarse");
  GridValue value(grid.n_theta, grid.n_velocity);
  std::vector<double> torques(static_cast<std::size_t>(grid.n_torque));
  for (int k = 0; k < grid.n_torque; ++k) torques[static_cast<std::size_t>(k)] = -kMaxTorque + 2.0 * kMaxTorque * k / (grid.n_torque - 1);

  for (int t = 0; t < kPendulumHorizon; ++t) {
    GridValue next(grid.n_theta, grid.n_velocity);
    for (int i = 0; i < grid.n_theta; ++i) {
      for (int j = 0; j < grid.n_velocity; ++j) {
        const double th = value.theta_at(i), v = value.velocity_at(j);
        double best = -std::numeric_limits<double>::infinity();
        for (double u : torques) {
          const PendulumState s = pendulum_step(th, v, u);
          best = std::max(best, pendulum_reward(th, v, u) + value.interpolate(s.theta, s.velocity));
        }
        next.at(i, j) = best;
      }
    }
    value = std::move(next);
  }

  // Average over the reset distribution theta ~ U[-pi, pi), theta' ~ U[-1, 1].
  const int nt = 400, nv = 41;
  double total = 0.0;
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nv; ++j)
      total += value.interpolate(-std::numbers::pi + 2.0 * std::numbers::pi * (i + 0.5) / nt, -1.0 + 2.0 * j / (nv - 1));
  return total / (nt * nv);
}

ContinuousEnv pendulum_env(bool with_optimum) {
  ContinuousEnv env;
  env.name = "pendulum";
  env.state_dim = 3;
  env.action_dim = 1;
  env.horizon = kPendulumHorizon;
  env.action_low = Vec::Constant(1, -kMaxTorque);
  env.action_high = Vec::Constant(1, kMaxTorque);
  env.noise_std = 0.0;
  if (with_optimum) {
    static std::once_flag once;
    static double cached = 0.0;
    std::call_once(once, [] { cached = pendulum_dp_optimum(); });
    env.known_optimum = cached;
  }
  env.reset = [](Rng& rng) -> Vec {
    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Vec s(3);
    s << std::cos(th), std::sin(th), rng.uniform(-1.0, 1.0);
    return s;
  };
  env.dynamics = [](const Vec& s, const Vec& a) -> Vec {
    const PendulumState n = pendulum_step(std::atan2(s[1], s[0]), s[2], a[0]);
    Vec out(3);
    out << std::cos(n.theta), std::sin(n.theta), n.velocity;
    return out;
  };
  env.reward = [](const Vec& s, const Vec& a) { return pendulum_reward(std::atan2(s[1], s[0]), s[2], a[0]); };
  return env;
}

ContinuousEnv make_env(const std::string& name) {
  if (name == "lqr2") return lqr_env(2, 0);
  if (name == "lqr3") return lqr_env(3, 0);
  if (name == "lqr4") return lqr_env(4, 0);
  if (name == "pendulum") return pendulum_env();
  throw std::invalid_argument("unknown environment '" + name + "' (expected lqr2, lqr3, lqr4 or pendulum)");
}

Vec NormStats::std() const {
  if (count <= 0.0) return Vec::Ones(dim());
  return (m2 / count).cwiseSqrt().cwiseMax(kStdFloor);
}

NormStats merge(const NormStats& a, const NormStats& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("NormStats: dimension mismatch");
  if (a.count == 0.0) return b;
  if (b.count == 0.0) return a;
  NormStats out(a.dim());
  out.count = a.count + b.count;
  const Vec delta = b.mean - a.mean;
  out.mean = a.mean + delta * (b.count / out.count);
  out.m2 = a.m2 + b.m2 + delta.cwiseAbs2() * (a.count * b.count / out.count);
  return out;
}

NormStats update_stats(const NormStats& stats, const Mat& batch) {
  if (batch.rows() != stats.dim()) throw std::invalid_argument("NormStats: batch has wrong dimension");
  if (batch.cols() == 0) return stats;
  NormStats fresh(stats.dim());
  fresh.count = static_cast<double>(batch.cols());
  fresh.mean = batch.rowwise().mean();
  fresh.m2 = (batch.colwise() - fresh.mean).rowwise().squaredNorm();
  return merge(stats, fresh);
}

Mat normalize(const NormStats& stats, const Mat& x) {
  if (x.rows() != stats.dim()) throw std::invalid_argument("NormStats: input has wrong dimension");
  return (x.colwise() - stats.mean).array().colwise() / stats.std().array();
}

Mat denormalize(const NormStats& stats, const Mat& x) {
  if (x.rows() != stats.dim()) throw std::invalid_argument("NormStats: input has wrong dimension");
  return (x.array().colwise() * stats.std().array()).matrix().colwise() + stats.mean;
}

}  // namespace mbrl

#include "mbrl/mdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mbrl {

namespace {

void check_prob_vector(const Eigen::Ref<const Vec>& p, const std::string& what) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      std::ostringstream msg;
      msg << what << ": entry " << i << " is " << p[i];
      throw std::invalid_argument(msg.str());
    }
  }
  const double total = p.sum();
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": sums to " << total;
    throw std::invalid_argument(msg.str());
  }
}

bool is_one_hot(const Eigen::Ref<const Vec>& p) {
  int ones = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 1.0)
      ++ones;
    else if (p[i] != 0.0)
      return false;
  }
  return ones == 1;
}

}  // namespace

FiniteMdp::FiniteMdp(int n_states, int n_actions, Mat transition, Mat reward, double gamma, Vec init_dist,
                     std::optional<Mat> embedding)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      init_dist_(std::move(init_dist)),
      embedding_(std::move(embedding)) {
  if (n_states_ <= 0 || n_actions_ <= 0) throw std::invalid_argument("FiniteMdp: empty state or action set");
  if (transition_.rows() != n_states_ * n_actions_ || transition_.cols() != n_states_)
    throw std::invalid_argument("FiniteMdp: transition must be (S*A) x S");
  if (reward_.rows() != n_states_ || reward_.cols() != n_actions_)
    throw std::invalid_argument("FiniteMdp: reward must be S x A");
  if (!reward_.allFinite()) throw std::invalid_argument("FiniteMdp: non-finite reward");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("FiniteMdp: gamma must lie in (0,1)");
  if (init_dist_.size() != n_states_) throw std::invalid_argument("FiniteMdp: init_dist has wrong length");
  check_prob_vector(init_dist_, "FiniteMdp init_dist");

  deterministic_ = true;
  for (int r = 0; r < transition_.rows(); ++r) {
    check_prob_vector(transition_.row(r).transpose(),
                      "FiniteMdp transition row (s=" + std::to_string(r / n_actions_) +
                          ", a=" + std::to_string(r % n_actions_) + ")");
    if (!is_one_hot(transition_.row(r).transpose())) deterministic_ = false;
  }
  if (embedding_) {
    if (embedding_->rows() != n_states_ || embedding_->cols() == 0)
      throw std::invalid_argument("FiniteMdp: embedding must be S x d with d >= 1");
    if (!embedding_->allFinite()) throw std::invalid_argument("FiniteMdp: non-finite embedding");
  }
}

int FiniteMdp::successor(int s, int a) const {
  if (!deterministic_) throw std::logic_error("FiniteMdp::successor on a stochastic model");
  Eigen::Index idx = 0;
  next_dist(s, a).maxCoeff(&idx);
  return static_cast<int>(idx);
}

const Mat& FiniteMdp::embedding() const {
  if (!embedding_) throw std::logic_error("FiniteMdp has no state embedding");
  return *embedding_;
}

FiniteMdp FiniteMdp::with_transition(Mat transition) const {
  return FiniteMdp(n_states_, n_actions_, std::move(transition), reward_, gamma_, init_dist_, embedding_);
}

FiniteMdp FiniteMdp::with_embedding(Mat embedding) const {
  return FiniteMdp(n_states_, n_actions_, transition_, reward_, gamma_, init_dist_, std::move(embedding));
}

bool FiniteMdp::shares_spaces_with(const FiniteMdp& other) const {
  return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ && gamma_ == other.gamma_ &&
         reward_ == other.reward_ && init_dist_ == other.init_dist_;
}

TabularPolicy::TabularPolicy(Mat probs) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw std::invalid_argument("TabularPolicy: empty");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s)
    check_prob_vector(probs_.row(s).transpose(), "TabularPolicy row " + std::to_string(s));
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  return TabularPolicy(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

TabularPolicy TabularPolicy::deterministic(const std::vector<int>& actions, int n_actions) {
  Mat p = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) throw std::invalid_argument("TabularPolicy: action out of range");
    p(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return TabularPolicy(std::move(p));
}

TabularPolicy TabularPolicy::random(int n_states, int n_actions, Rng& rng) {
  Mat p(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) p.row(s) = rng.dirichlet(n_actions).transpose();
  return TabularPolicy(std::move(p));
}

TabularPolicy TabularPolicy::mixture(const TabularPolicy& a, const TabularPolicy& b, double alpha) {
  if (a.probs_.rows() != b.probs_.rows() || a.probs_.cols() != b.probs_.cols())
    throw std::invalid_argument("TabularPolicy::mixture: shape mismatch");
  if (alpha <= 0.0) return a;
  if (alpha >= 1.0) return b;
  return TabularPolicy((1.0 - alpha) * a.probs_ + alpha * b.probs_);
}

StateDist::StateDist(Vec w, DistKind k) : weights(std::move(w)), kind(k) {
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("StateDist: not a probability vector");
}

namespace {

void check_dims(const FiniteMdp& mdp, const TabularPolicy& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
    throw std::invalid_argument("policy dimensions do not match the MDP");
}

// Solve (I - gamma K) x = b for row-stochastic K.
Vec solve_resolvent(const Mat& kernel, double gamma, const Vec& b) {
  const Eigen::Index n = kernel.rows();
  return (Mat::Identity(n, n) - gamma * kernel).partialPivLu().solve(b);
}

// Clip round-off negatives and renormalize a computed distribution.
Vec clean_distribution(Vec w) {
  w = w.cwiseMax(0.0);
  return w / w.sum();
}

}  // namespace

Mat policy_kernel(const FiniteMdp& mdp, const TabularPolicy& pi) {
  check_dims(mdp, pi);
  const int S = mdp.n_states(), A = mdp.n_actions();
  Mat kernel = Mat::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) kernel.row(s) += pi(s, a) * mdp.next_dist(s, a);
  return kernel;
}

Vec policy_reward(const FiniteMdp& mdp, const TabularPolicy& pi) {
  check_dims(mdp, pi);
  return mdp.reward().cwiseProduct(pi.probs()).rowwise().sum();
}

ValueVector value_fn(const FiniteMdp& mdp, const TabularPolicy& pi) {
  Vec v = solve_resolvent(policy_kernel(mdp, pi), mdp.gamma(), policy_reward(mdp, pi));
  if (!v.allFinite()) throw std::runtime_error("value_fn: singular Bellman system");
  const double scalar = mdp.init_dist().dot(v);
  return {std::move(v), scalar};
}

Mat q_values(const FiniteMdp& mdp, const Vec& v) {
  const int S = mdp.n_states(), A = mdp.n_actions();
  Mat q(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) q(s, a) = mdp.reward(s, a) + mdp.gamma() * mdp.next_dist(s, a).dot(v);
  return q;
}

StateDist rho(const FiniteMdp& mdp, const TabularPolicy& pi) {
  const Mat kernel = policy_kernel(mdp, pi);
  const double g = mdp.gamma();
  Vec w = (1.0 - g) * solve_resolvent(kernel.transpose(), g, mdp.init_dist());
  return StateDist(clean_distribution(std::move(w)), DistKind::rho);
}

StateDist beta(const FiniteMdp& mdp, const TabularPolicy& pi) {
  const Mat kernel = policy_kernel(mdp, pi);
  const double g = mdp.gamma();
  const Mat kt = kernel.transpose();
  Vec w = solve_resolvent(kt, g, kt * mdp.init_dist());
  w = (1.0 - g) * (1.0 - g) * solve_resolvent(kt, g, w);
  return StateDist(clean_distribution(std::move(w)), DistKind::beta);
}

Mat resolvent(const Mat& kernel, double gamma) {
  const Eigen::Index n = kernel.rows();
  return (1.0 - gamma) * (Mat::Identity(n, n) - gamma * kernel).partialPivLu().inverse();
}

Mat resolvent(const FiniteMdp& mdp, const TabularPolicy& pi) {
  return resolvent(policy_kernel(mdp, pi), mdp.gamma());
}

TrajectoryBatch sample_trajectories(const FiniteMdp& mdp, const TabularPolicy& pi, int n, int horizon,
                                    std::uint64_t seed, std::string policy_id) {
  check_dims(mdp, pi);
  if (n < 1 || horizon < 1) throw std::invalid_argument("sample_trajectories: n and horizon must be >= 1");
  TrajectoryBatch batch;
  batch.policy_id = std::move(policy_id);
  batch.seed = seed;
  batch.episodes.reserve(static_cast<std::size_t>(n));
  const Rng root(seed);
  for (int i = 0; i < n; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    Episode ep;
    ep.initial_state = static_cast<int>(rng.categorical(mdp.init_dist()));
    ep.steps.reserve(static_cast<std::size_t>(horizon));
    int s = ep.initial_state;
    for (int t = 0; t < horizon; ++t) {
      const int a = static_cast<int>(rng.categorical(pi.row(s).transpose()));
      const int next = static_cast<int>(rng.categorical(mdp.next_dist(s, a).transpose()));
      ep.steps.push_back({s, a, mdp.reward(s, a), next});
      s = next;
    }
    batch.episodes.push_back(std::move(ep));
  }
  return batch;
}

std::vector<int> geometric_stop_states(const TrajectoryBatch& batch, double gamma, std::uint64_t seed) {
  const Rng root(seed);
  std::vector<int> out;
  out.reserve(batch.episodes.size());
  for (std::size_t i = 0; i < batch.episodes.size(); ++i) {
    Rng rng = root.derive(i);
    const auto& ep = batch.episodes[i];
    const std::uint64_t t = std::min<std::uint64_t>(rng.geometric(1.0 - gamma), ep.steps.size());
    out.push_back(ep.state_at(static_cast<std::size_t>(t)));
  }
  return out;
}

}  // namespace mbrl

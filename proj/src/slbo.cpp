#include "mbrl/slbo.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mbrl {

ModelLoss parse_model_loss(const std::string& name) {
  if (name == "l2") return ModelLoss::l2;
  if (name == "mse") return ModelLoss::mse;
  throw std::invalid_argument("unknown model loss '" + name + "' (expected l2 or mse)");
}

std::string to_string(ModelLoss kind) { return kind == ModelLoss::l2 ? "l2" : "mse"; }

void validate(const SlboConfig& cfg) {
  const auto require = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw std::invalid_argument(std::string("config field '") + field + "' " + rule);
  };
  require(cfg.n_outer >= 0, "n_outer", "must be >= 0");
  require(cfg.n_inner >= 0, "n_inner", "must be >= 0");
  require(cfg.n_model >= 0, "n_model", "must be >= 0");
  require(cfg.n_policy >= 0, "n_policy", "must be >= 0");
  require(cfg.n_collect >= 0, "n_collect", "must be >= 0");
  require(cfg.n_trpo >= 1, "n_trpo", "must be >= 1");
  require(cfg.H >= 1, "H", "must be >= 1");
  require(cfg.lambda_entropy >= 0.0, "lambda_entropy", "must be >= 0");
  require(cfg.max_kl > 0.0, "max_kl", "must be > 0");
  require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0, "gae_lambda", "must lie in [0, 1]");
  require(cfg.cg_iters >= 1, "cg_iters", "must be >= 1");
  require(cfg.cg_damping >= 0.0, "cg_damping", "must be >= 0");
  require(cfg.ou_theta >= 0.0 && cfg.ou_theta <= 1.0, "ou_theta", "must lie in [0, 1]");
  require(cfg.ou_sigma >= 0.0, "ou_sigma", "must be >= 0");
  require(cfg.model_lr > 0.0, "model_lr", "must be > 0");
  require(cfg.model_l2 >= 0.0, "model_l2", "must be >= 0");
  require(cfg.batch_size >= 1, "batch_size", "must be >= 1");
  require(cfg.value_lr > 0.0, "value_lr", "must be > 0");
  require(cfg.value_steps >= 0, "value_steps", "must be >= 0");
  require(cfg.value_batch >= 1, "value_batch", "must be >= 1");
  require(cfg.eval_episodes >= 1, "eval_episodes", "must be >= 1");
  for (int h : cfg.model_hidden) require(h >= 1, "model_hidden", "entries must be >= 1");
  for (int h : cfg.policy_hidden) require(h >= 1, "policy_hidden", "entries must be >= 1");
  for (int h : cfg.value_hidden) require(h >= 1, "value_hidden", "entries must be >= 1");
}

ModelNet::ModelNet(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng)
    : state_stats(state_dim), diff_stats(state_dim) {
  std::vector<int> sizes{state_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(state_dim);
  std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  net = DenseNet(sizes, acts, rng);
}

Mat ModelNet::input(const Mat& states, const Mat& actions) const {
  if (states.cols() != actions.cols()) throw std::invalid_argument("ModelNet: state and action batch sizes differ");
  Mat x(states.rows() + actions.rows(), states.cols());
  x << normalize(state_stats, states), actions;
  return x;
}

Mat ModelNet::predict(const Mat& states, const Mat& actions) const {
  return states + denormalize(diff_stats, net.forward(input(states, actions)));
}

void ReplayDataset::add_episode(Mat states, Mat actions) {
  if (states.rows() != state_dim_ || actions.rows() != action_dim_)
    throw std::invalid_argument("ReplayDataset: episode has wrong dimensions");
  if (actions.cols() < 1 || states.cols() != actions.cols() + 1)
    throw std::invalid_argument("ReplayDataset: need T >= 1 actions and T + 1 states");
  n_transitions_ += actions.cols();
  states_.push_back(std::move(states));
  actions_.push_back(std::move(actions));
}

std::pair<Mat, Mat> ReplayDataset::window(int e, int t, int H) const {
  if (e < 0 || e >= n_episodes()) throw std::invalid_argument("ReplayDataset: episode index out of range");
  const Mat& a = actions_[static_cast<std::size_t>(e)];
  if (H < 1 || t < 0 || t + H > a.cols()) {
    std::ostringstream msg;
    msg << "ReplayDataset: window [" << t << ", " << t + H << ") crosses the end of episode " << e << " (length "
        << a.cols() << ")";
    throw std::invalid_argument(msg.str());
  }
  return {states_[static_cast<std::size_t>(e)].middleCols(t, H + 1), a.middleCols(t, H)};
}

long ReplayDataset::n_windows(int H) const {
  long total = 0;
  for (const auto& a : actions_) total += std::max<long>(0, a.cols() - H + 1);
  return total;
}

std::pair<int, int> ReplayDataset::sample_window_start(int H, Rng& rng) const {
  const long total = n_windows(H);
  if (total == 0) throw std::invalid_argument("ReplayDataset: no window of the requested length");
  long k = static_cast<long>(rng.below(static_cast<std::uint64_t>(total)));
  for (int e = 0; e < n_episodes(); ++e) {
    const long count = std::max<long>(0, actions_[static_cast<std::size_t>(e)].cols() - H + 1);
    if (k < count) return {e, static_cast<int>(k)};
    k -= count;
  }
  throw std::logic_error("ReplayDataset: window sampling overran");
}

Vec ReplayDataset::sample_state(Rng& rng) const {
  if (states_.empty()) throw std::invalid_argument("ReplayDataset: empty");
  long k = static_cast<long>(rng.below(static_cast<std::uint64_t>(n_transitions_ + n_episodes())));
  for (const auto& s : states_) {
    if (k < s.cols()) return s.col(k);
    k -= s.cols();
  }
  throw std::logic_error("ReplayDataset: state sampling overran");
}

Vec ReplayDataset::sample_initial_state(Rng& rng) const {
  if (states_.empty()) throw std::invalid_argument("ReplayDataset: empty");
  return states_[rng.below(states_.size())].col(0);
}

Mat ReplayDataset::all_states() const {
  Mat out(state_dim_, n_transitions_ + n_episodes());
  Eigen::Index c = 0;
  for (const auto& s : states_) {
    out.middleCols(c, s.cols()) = s;
    c += s.cols();
  }
  return out;
}

Mat ReplayDataset::all_differences() const {
  Mat out(state_dim_, n_transitions_);
  Eigen::Index c = 0;
  for (const auto& s : states_) {
    out.middleCols(c, s.cols() - 1) = s.rightCols(s.cols() - 1) - s.leftCols(s.cols() - 1);
    c += s.cols() - 1;
  }
  return out;
}

WindowBatch sample_windows(const ReplayDataset& data, int H, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("sample_windows: batch must be >= 1");
  const int d = static_cast<int>(data.episode_states(0).rows());
  const int a = static_cast<int>(data.episode_actions(0).rows());
  WindowBatch out;
  out.states.assign(static_cast<std::size_t>(H) + 1, Mat(d, batch));
  out.actions.assign(static_cast<std::size_t>(H), Mat(a, batch));
  for (int b = 0; b < batch; ++b) {
    const auto [e, t] = data.sample_window_start(H, rng);
    const auto [s, u] = data.window(e, t, H);
    for (int i = 0; i <= H; ++i) out.states[static_cast<std::size_t>(i)].col(b) = s.col(i);
    for (int i = 0; i < H; ++i) out.actions[static_cast<std::size_t>(i)].col(b) = u.col(i);
  }
  return out;
}

LossAndGrad multi_step_loss(const ModelNet& model, const WindowBatch& batch, ModelLoss kind) {
  const int H = batch.H();
  if (H < 1 || batch.states.size() != static_cast<std::size_t>(H) + 1)
    throw std::invalid_argument("multi_step_loss: window batch needs H >= 1 actions and H + 1 states");
  const Eigen::Index B = batch.states[0].cols();
  const Vec sd_s = model.state_stats.std();
  const Vec sd_d = model.diff_stats.std();
  const Vec& mu_d = model.diff_stats.mean;
  const double scale = 1.0 / (static_cast<double>(H) * static_cast<double>(B));

  std::vector<ForwardCache> caches(static_cast<std::size_t>(H));
  std::vector<Mat> direct(static_cast<std::size_t>(H));
  LossAndGrad out;
  Mat s_hat = batch.states[0];
  for (int i = 0; i < H; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const Mat pred = model.net.forward(model.input(s_hat, batch.actions[ii]), caches[ii]);
    const Mat target =
        ((batch.states[ii + 1] - batch.states[ii]).colwise() - mu_d).array().colwise() / sd_d.array();
    const Mat resid = pred - target;
    const Vec norms = resid.colwise().norm().transpose();
    if (kind == ModelLoss::l2) {
      out.loss += norms.sum() * scale;
      Mat g = resid;
      for (Eigen::Index b = 0; b < B; ++b) g.col(b) = norms[b] > 0.0 ? Vec(resid.col(b) / norms[b]) : Vec::Zero(resid.rows());
      direct[ii] = g * scale;
    } else {
      out.loss += norms.squaredNorm() * scale;
      direct[ii] = 2.0 * scale * resid;
    }
    s_hat = s_hat + ((pred.array().colwise() * sd_d.array()).matrix().colwise() + mu_d);
  }

  out.grad = Vec::Zero(model.net.num_params());
  const Eigen::Index d = s_hat.rows();
  Mat g_state = Mat::Zero(d, B);  // dL / d s_hat_{i+1}
  for (int i = H - 1; i >= 0; --i) {
    const auto ii = static_cast<std::size_t>(i);
    const Mat g_out = direct[ii] + (g_state.array().colwise() * sd_d.array()).matrix();
    const Mat g_in = model.net.backward(caches[ii], g_out, out.grad);
    g_state += (g_in.topRows(d).array().colwise() / sd_s.array()).matrix();
  }
  return out;
}

const Vec& OuNoise::step(Rng& rng) {
  x = x - theta * x + sigma * rng.normal_vector(x.size());
  return x;
}

RolloutBatch virtual_rollouts(const ModelNet& model, const ContinuousEnv& env, const GaussianPolicy& policy,
                              const ReplayDataset& data, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("virtual_rollouts: n_samples must be >= 1");
  const int L = env.horizon;
  const int E = (n_samples + L - 1) / L;
  const int d = env.state_dim, a = env.action_dim;
  RolloutBatch out;
  out.n_episodes = E;
  out.length = L;
  out.obs.resize(d, static_cast<Eigen::Index>(E) * L);
  out.actions.resize(a, static_cast<Eigen::Index>(E) * L);
  out.rewards.resize(static_cast<Eigen::Index>(E) * L);

  Mat s(d, E);
  for (int e = 0; e < E; ++e) s.col(e) = data.sample_initial_state(rng);
  // Keep imagined states within a band around the data.
  const Vec lo = model.state_stats.mean - 10.0 * model.state_stats.std();
  const Vec hi = model.state_stats.mean + 10.0 * model.state_stats.std();
  const Vec sd = policy.log_std().array().exp();
  Mat clipped(a, E);
  for (int t = 0; t < L; ++t) {
    const Mat mean = policy.mean(s);
    for (int e = 0; e < E; ++e) {
      const Eigen::Index n = static_cast<Eigen::Index>(e) * L + t;
      out.obs.col(n) = s.col(e);
      Vec act = mean.col(e);
      for (int j = 0; j < a; ++j) act[j] += sd[j] * rng.normal();
      out.actions.col(n) = act;
      clipped.col(e) = env.clip(act);
      out.rewards[n] = env.reward(s.col(e), clipped.col(e));
    }
    s = model.predict(s, clipped).cwiseMax(lo.replicate(1, E)).cwiseMin(hi.replicate(1, E));
  }
  out.last_obs = s;
  return out;
}

ValueBaseline::ValueBaseline(int obs_dim, const std::vector<int>& hidden, double lr, Rng& rng) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  std::vector<Activation> acts(sizes.size() - 1, Activation::tanh);
  acts.back() = Activation::identity;
  net = DenseNet(sizes, acts, rng);
  AdamConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = 0.0;
  adam = AdamState(net.num_params(), cfg);
}

Vec ValueBaseline::predict(const Mat& obs) const {
  return (offset + scale * net.forward(obs).row(0).array()).matrix().transpose();
}

double ValueBaseline::fit(const Mat& obs, const Vec& targets, int steps, int batch, Rng& rng) {
  if (obs.cols() != targets.size() || targets.size() == 0) throw std::invalid_argument("ValueBaseline: bad targets");
  const double mean = targets.mean();
  const double sd = std::sqrt((targets.array() - mean).square().mean());
  // Re-express the current net in the new output scale before fitting.
  const double new_scale = std::max(sd, 1e-6);
  Vec p = net.params();
  const Eigen::Index out_w = net.sizes()[net.sizes().size() - 2];
  p.segment(p.size() - out_w - 1, out_w + 1) *= scale / new_scale;
  p[p.size() - 1] += (offset - mean) / new_scale;
  net.set_params(p);
  offset = mean;
  scale = new_scale;

  const Eigen::Index n = obs.cols();
  const Eigen::Index B = std::min<Eigen::Index>(batch, n);
  double last = 0.0;
  Mat x(obs.rows(), B);
  Vec y(B);
  for (int k = 0; k < steps; ++k) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      x.col(b) = obs.col(i);
      y[b] = (targets[i] - offset) / scale;
    }
    ForwardCache cache;
    const Mat pred = net.forward(x, cache);
    const Mat resid = pred - y.transpose();
    last = resid.squaredNorm() / static_cast<double>(B);
    Vec grad = Vec::Zero(net.num_params());
    net.backward(cache, 2.0 * resid / static_cast<double>(B), grad);
    p = net.params();
    adam_step(adam, p, grad);
    net.set_params(p);
  }
  return last;
}

Vec gae_advantages(const RolloutBatch& batch, const Vec& values, const Vec& last_values, double gamma,
                   double lambda) {
  const Eigen::Index N = static_cast<Eigen::Index>(batch.n_episodes) * batch.length;
  if (values.size() != N || batch.rewards.size() != N || last_values.size() != batch.n_episodes)
    throw std::invalid_argument("gae_advantages: size mismatch");
  Vec adv(N);
  for (int e = 0; e < batch.n_episodes; ++e) {
    double running = 0.0;
    for (int t = batch.length - 1; t >= 0; --t) {
      const Eigen::Index n = static_cast<Eigen::Index>(e) * batch.length + t;
      const double next = t == batch.length - 1 ? last_values[e] : values[n + 1];
      const double delta = batch.rewards[n] + gamma * next - values[n];
      running = delta + gamma * lambda * running;
      adv[n] = running;
    }
  }
  return adv;
}

Vec conjugate_gradient(const std::function<Vec(const Vec&)>& apply, const Vec& g, int iters) {
  Vec x = Vec::Zero(g.size());
  Vec r = g;
  Vec p = g;
  double rr = r.squaredNorm();
  for (int k = 0; k < iters && rr > 1e-20; ++k) {
    const Vec Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

TrpoStats trpo_update(GaussianPolicy& policy, ValueBaseline& baseline, const RolloutBatch& batch,
                      const SlboConfig& cfg, Rng& rng) {
  const Eigen::Index N = batch.obs.cols();
  if (N == 0) throw std::invalid_argument("trpo_update: empty batch");
  TrpoStats stats;
  const Vec values = baseline.predict(batch.obs);
  const Vec adv_raw = gae_advantages(batch, values, baseline.predict(batch.last_obs), cfg.gamma, cfg.gae_lambda);
  const Vec returns = adv_raw + values;
  Vec adv = adv_raw.array() - adv_raw.mean();
  const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(N));
  if (sd > 1e-8) adv /= sd;

  const GaussianPolicy old = policy;
  const Vec logp_old = policy_logprob(old, batch.obs, batch.actions);
  const double lam = cfg.lambda_entropy;
  const auto surrogate = [&](const GaussianPolicy& p) {
    const Vec ratio = (policy_logprob(p, batch.obs, batch.actions) - logp_old).array().exp();
    return ratio.dot(adv) / static_cast<double>(N) + lam * policy_entropy(p);
  };

  Vec g = policy_logprob_grad(old, batch.obs, batch.actions, adv / static_cast<double>(N));
  g.tail(old.act_dim()).array() += lam;

  const Eigen::Index P = old.net().num_params();
  ForwardCache cache;
  old.net().forward(batch.obs, cache);
  const Vec inv_var = (-2.0 * old.log_std()).array().exp();
  const auto fisher = [&](const Vec& v) -> Vec {
    const Mat jv = old.net().jvp(cache, v.head(P));
    const Mat up = (jv.array().colwise() * inv_var.array()) / static_cast<double>(N);
    Vec out = Vec::Zero(v.size());
    Vec net_part = Vec::Zero(P);
    old.net().backward(cache, up, net_part);
    out.head(P) = net_part;
    out.tail(old.act_dim()) = 2.0 * v.tail(old.act_dim());
    return out + cfg.cg_damping * v;
  };

  if (g.allFinite() && g.norm() > 1e-12) {
    const Vec x = conjugate_gradient(fisher, g, cfg.cg_iters);
    const double shs = x.dot(fisher(x));
    if (x.allFinite() && shs > 0.0 && std::isfinite(shs)) {
      const Vec full = std::sqrt(2.0 * cfg.max_kl / shs) * x;
      const Vec theta = old.flat_params();
      const double base = surrogate(old);
      double frac = 1.0;
      GaussianPolicy cand = old;
      for (int k = 0; k < 10; ++k, frac *= 0.8) {
        const Vec next = theta + frac * full;
        if (!next.allFinite()) continue;
        cand.set_flat_params(next);
        const double kl = policy_kl(old, cand, batch.obs);
        const double gain = surrogate(cand) - base;
        if (gain > 0.0 && kl <= cfg.max_kl) {
          policy = cand;
          stats.accepted = true;
          stats.kl = kl;
          stats.improvement = gain;
          stats.backtracks = k;
          break;
        }
      }
    }
  }
  stats.entropy = policy_entropy(policy);
  stats.value_loss = baseline.fit(batch.obs, returns, cfg.value_steps, cfg.value_batch, rng);
  return stats;
}

std::pair<double, double> evaluate_policy(const ContinuousEnv& env, const GaussianPolicy& policy, int episodes,
                                          std::uint64_t seed, long* steps) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  const Rng root(seed);
  Vec returns(episodes);
  for (int k = 0; k < episodes; ++k) {
    Rng rng = root.derive(static_cast<std::uint64_t>(k));
    Vec s = env.reset(rng);
    double total = 0.0;
    for (int t = 0; t < env.horizon; ++t) {
      const StepResult r = env.step(s, policy.mean(s), rng);
      total += r.reward;
      s = r.next_state;
    }
    if (steps) *steps += env.horizon;
    returns[k] = total;
  }
  const double mean = returns.mean();
  const double sd = episodes > 1 ? std::sqrt((returns.array() - mean).square().sum() / (episodes - 1)) : 0.0;
  return {mean, sd};
}

namespace {

// Wraps the real environment so every transition is counted.
class CountedEnv {
 public:
  explicit CountedEnv(const ContinuousEnv& env) : env_(env) {}
  StepResult step(const Vec& s, const Vec& a, Rng& rng) {
    ++samples_;
    return env_.step(s, a, rng);
  }
  Vec reset(Rng& rng) const { return env_.reset(rng); }
  long samples() const { return samples_; }

 private:
  const ContinuousEnv& env_;
  long samples_ = 0;
};

void collect(CountedEnv& real, const ContinuousEnv& env, const GaussianPolicy& policy, const SlboConfig& cfg,
             ReplayDataset& data, Rng& rng) {
  int remaining = cfg.n_collect;
  OuNoise noise(env.action_dim, cfg.ou_theta, cfg.ou_sigma);
  while (remaining > 0) {
    const int len = std::min(env.horizon, remaining);
    Mat states(env.state_dim, len + 1);
    Mat actions(env.action_dim, len);
    Vec s = real.reset(rng);
    noise.reset();
    states.col(0) = s;
    for (int t = 0; t < len; ++t) {
      const Vec a = env.clip(policy.mean(s) + noise.step(rng));
      s = real.step(s, a, rng).next_state;
      if (!s.allFinite()) throw std::runtime_error("collect: non-finite environment state");
      actions.col(t) = a;
      states.col(t + 1) = s;
    }
    data.add_episode(std::move(states), std::move(actions));
    remaining -= len;
  }
}

TrainingResult train(const ContinuousEnv& env, const SlboConfig& cfg, int n_inner, int n_model, int n_policy) {
  validate(cfg);
  const Rng root(cfg.seed);
  Rng init_rng = root.derive(1);
  TrainingResult result;
  result.policy = GaussianPolicy(env.state_dim, env.action_dim, cfg.policy_hidden, init_rng, cfg.init_log_std);
  ModelNet model(env.state_dim, env.action_dim, cfg.model_hidden, init_rng);
  ValueBaseline baseline(env.state_dim, cfg.value_hidden, cfg.value_lr, init_rng);
  AdamConfig model_opt;
  model_opt.lr = cfg.model_lr;
  model_opt.weight_decay = cfg.model_l2;
  AdamState model_adam(model.net.num_params(), model_opt);
  ReplayDataset data(env.state_dim, env.action_dim);
  CountedEnv real(env);

  for (int outer = 0; outer < cfg.n_outer; ++outer) {
    const auto o = static_cast<std::uint64_t>(outer);
    Rng collect_rng = root.derive(100).derive(o);
    Rng model_rng = root.derive(200).derive(o);
    Rng policy_rng = root.derive(300).derive(o);
    collect(real, env, result.policy, cfg, data, collect_rng);

    // Statistics stay fixed for the whole inner phase.
    model.state_stats = update_stats(NormStats(env.state_dim), data.all_states());
    model.diff_stats = update_stats(NormStats(env.state_dim), data.all_differences());

    TraceRow row;
    row.outer_iter = outer;
    double kl_sum = 0.0;
    int kl_count = 0;
    const bool can_fit = data.n_windows(cfg.H) > 0;
    for (int inner = 0; inner < n_inner; ++inner) {
      double loss_sum = 0.0;
      for (int m = 0; m < n_model && can_fit; ++m) {
        const WindowBatch batch = sample_windows(data, cfg.H, cfg.batch_size, model_rng);
        const LossAndGrad lg = multi_step_loss(model, batch, cfg.loss_kind);
        Vec p = model.net.params();
        adam_step(model_adam, p, lg.grad);
        model.net.set_params(p);
        loss_sum += lg.loss;
      }
      if (n_model > 0 && can_fit) row.model_loss = loss_sum / n_model;

      const long real_before = real.samples();
      const Vec model_params = model.net.params();
      for (int k = 0; k < n_policy; ++k) {
        const RolloutBatch batch = virtual_rollouts(model, env, result.policy, data, cfg.n_trpo, policy_rng);
        if (!batch.rewards.allFinite()) throw std::runtime_error("virtual rollout produced non-finite rewards");
        result.virtual_samples += batch.obs.cols();
        const TrpoStats st = trpo_update(result.policy, baseline, batch, cfg, policy_rng);
        if (st.accepted) {
          ++result.accepted_updates;
          result.max_accepted_kl = std::max(result.max_accepted_kl, st.kl);
          kl_sum += st.kl;
          ++kl_count;
        } else {
          ++result.skipped_updates;
        }
      }
      if (real.samples() != real_before)
        throw std::logic_error("policy optimization touched the real environment");
      if (model.net.params() != model_params) throw std::logic_error("policy optimization changed the model");
    }

    row.real_samples = real.samples();
    const auto [mean, sd] =
        evaluate_policy(env, result.policy, cfg.eval_episodes, root.derive(400).derive(o)(), &result.eval_samples);
    row.eval_return_mean = mean;
    row.eval_return_std = sd;
    row.policy_kl = kl_count > 0 ? kl_sum / kl_count : 0.0;
    row.entropy = policy_entropy(result.policy);
    result.trace.push_back(row);
  }
  result.real_samples = real.samples();
  return result;
}

}  // namespace

TrainingResult slbo_train(const ContinuousEnv& env, const SlboConfig& cfg) {
  return train(env, cfg, cfg.n_inner, cfg.n_model, cfg.n_policy);
}

TrainingResult mbtrpo_train(const ContinuousEnv& env, const SlboConfig& cfg) {
  return train(env, cfg, cfg.n_inner > 0 ? 1 : 0, cfg.n_model * cfg.n_inner, cfg.n_policy * cfg.n_inner);
}

AblationAxis parse_ablation_axis(const std::string& name) {
  if (name == "H") return AblationAxis::horizon;
  if (name == "lambda_entropy") return AblationAxis::entropy;
  if (name == "loss_kind") return AblationAxis::loss;
  throw std::invalid_argument("unknown ablation axis '" + name + "' (expected H, lambda_entropy or loss_kind)");
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::horizon:
      return "H";
    case AblationAxis::entropy:
      return "lambda_entropy";
    case AblationAxis::loss:
      return "loss_kind";
  }
  return "?";
}

std::vector<std::string> ablation_values(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::horizon:
      return {"1", "2", "4", "8"};
    case AblationAxis::entropy:
      return {"0", "0.001", "0.003", "0.005"};
    case AblationAxis::loss:
      return {"l2", "mse"};
  }
  return {};
}

SlboConfig ablation_config(const SlboConfig& base, AblationAxis axis, const std::string& value) {
  SlboConfig cfg = base;
  switch (axis) {
    case AblationAxis::horizon:
      cfg.H = std::stoi(value);
      if (cfg.H < 1) throw std::invalid_argument("ablation: H must be >= 1");
      cfg.batch_size = std::max(1, base.batch_size * base.H / cfg.H);
      break;
    case AblationAxis::entropy:
      cfg.lambda_entropy = std::stod(value);
      break;
    case AblationAxis::loss:
      cfg.loss_kind = parse_model_loss(value);
      break;
  }
  return cfg;
}

AblationResult ablate(const ContinuousEnv& env, const SlboConfig& base, AblationAxis axis, int seeds) {
  if (seeds < 1) throw std::invalid_argument("ablate: seeds must be >= 1");
  AblationResult out;
  for (const std::string& value : ablation_values(axis)) {
    AblationCell cell{to_string(axis), value, 0.0, 0.0, 0};
    std::vector<double> finals;
    for (int k = 0; k < seeds; ++k) {
      SlboConfig cfg = ablation_config(base, axis, value);
      cfg.seed = base.seed + static_cast<std::uint64_t>(k);
      const TrainingResult r = slbo_train(env, cfg);
      const double final_return =
          r.trace.empty() ? evaluate_policy(env, r.policy, cfg.eval_episodes, cfg.seed).first
                          : r.trace.back().eval_return_mean;
      out.rows.push_back({cell.axis, value, cfg.seed, final_return, r.real_samples, r.max_accepted_kl});
      finals.push_back(final_return);
    }
    double sum = 0.0;
    for (double f : finals) sum += f;
    cell.n = static_cast<int>(finals.size());
    cell.mean = sum / cell.n;
    double ss = 0.0;
    for (double f : finals) ss += (f - cell.mean) * (f - cell.mean);
    cell.std = cell.n > 1 ? std::sqrt(ss / (cell.n - 1)) : 0.0;
    out.cells.push_back(cell);
  }
  return out;
}

}  // namespace mbrl

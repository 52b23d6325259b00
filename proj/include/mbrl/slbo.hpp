#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mbrl/envs.hpp"
#include "mbrl/nn.hpp"

namespace mbrl {

enum class ModelLoss { l2, mse };

ModelLoss parse_model_loss(const std::string& name);
std::string to_string(ModelLoss kind);

/// Training schedule and hyper-parameters. Defaults are the published ones;
/// the network sizes, value-fit and evaluation fields are local additions.
struct SlboConfig {
  int n_outer = 100;
  int n_inner = 20;
  int n_model = 100;
  int n_policy = 40;
  int n_collect = 10000;
  int n_trpo = 4000;
  int H = 2;
  double lambda_entropy = 0.005;
  double max_kl = 0.01;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double ou_theta = 0.15;
  double ou_sigma = 0.3;
  double model_lr = 1e-3;
  double model_l2 = 1e-5;
  int batch_size = 128;
  ModelLoss loss_kind = ModelLoss::l2;
  std::uint64_t seed = 0;

  /// Weight of the model loss in the joint objective; the alternating schedule never mixes the two terms.
  double model_loss_weight = 1.0;
  std::vector<int> model_hidden{500, 500};
  std::vector<int> policy_hidden{32, 32};
  std::vector<int> value_hidden{64, 64};
  double init_log_std = -0.5;
  double value_lr = 1e-3;
  int value_steps = 25;
  int value_batch = 256;
  int eval_episodes = 20;
};

/// Throws std::invalid_argument naming the first bad field.
void validate(const SlboConfig& cfg);

/// Dynamics model predicting the normalized state difference from
/// (normalized state, action). Statistics are refreshed from data.
struct ModelNet {
  ModelNet() = default;
  ModelNet(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);

  DenseNet net;
  NormStats state_stats;
  NormStats diff_stats;

  int state_dim() const { return state_stats.dim(); }
  Mat input(const Mat& states, const Mat& actions) const;
  /// Predicted next states for column batches of states and (clipped) actions.
  Mat predict(const Mat& states, const Mat& actions) const;
};

/// Append-only store of real episodes.
class ReplayDataset {
 public:
  ReplayDataset(int state_dim, int action_dim) : state_dim_(state_dim), action_dim_(action_dim) {}

  /// states has one more column than actions.
  void add_episode(Mat states, Mat actions);

  int n_episodes() const { return static_cast<int>(states_.size()); }
  long n_transitions() const { return n_transitions_; }
  const Mat& episode_states(int e) const { return states_.at(static_cast<std::size_t>(e)); }
  const Mat& episode_actions(int e) const { return actions_.at(static_cast<std::size_t>(e)); }

  /// Window s_{t..t+H}, a_{t..t+H-1} of episode e; throws if it would cross the episode end.
  std::pair<Mat, Mat> window(int e, int t, int H) const;
  long n_windows(int H) const;
  /// Uniform over all windows of length H.
  std::pair<int, int> sample_window_start(int H, Rng& rng) const;
  /// Uniform over all stored states.
  Vec sample_state(Rng& rng) const;
  /// Uniform over the first states of stored episodes.
  Vec sample_initial_state(Rng& rng) const;

  Mat all_states() const;
  Mat all_differences() const;

 private:
  int state_dim_;
  int action_dim_;
  std::vector<Mat> states_;
  std::vector<Mat> actions_;
  long n_transitions_ = 0;
};

/// B windows of depth H: states[i] and actions[i] are (dim x B) slices at offset i.
struct WindowBatch {
  std::vector<Mat> states;   // H + 1 entries
  std::vector<Mat> actions;  // H entries
  int H() const { return static_cast<int>(actions.size()); }
};

WindowBatch sample_windows(const ReplayDataset& data, int H, int batch, Rng& rng);

struct LossAndGrad {
  double loss = 0.0;
  Vec grad;
};

/// Multi-step loss over a recursive model rollout from the first state of
/// each window, averaged over steps and windows:
///   (1/H) sum_i ||dhat_i - d_i||     (l2)   or   ||dhat_i - d_i||^2 (mse)
/// with differences measured in normalized units. The gradient is taken
/// through the rollout with respect to the model parameters only.
LossAndGrad multi_step_loss(const ModelNet& model, const WindowBatch& batch, ModelLoss kind);

/// Ornstein-Uhlenbeck process x <- x - theta x + sigma N(0, I), unit time step.
struct OuNoise {
  OuNoise(int dim, double theta, double sigma) : x(Vec::Zero(dim)), theta(theta), sigma(sigma) {}
  Vec x;
  double theta;
  double sigma;
  const Vec& step(Rng& rng);
  void reset() { x.setZero(); }
};

/// Fixed-length episodes laid out contiguously: sample e * length + t.
struct RolloutBatch {
  int n_episodes = 0;
  int length = 0;
  Mat obs;       // state_dim x N
  Mat actions;   // action_dim x N, pre-clip samples
  Vec rewards;   // N
  Mat last_obs;  // state_dim x n_episodes, bootstrap states after truncation
};

/// Policy rollouts inside the learned model; never touches the real environment.
/// Start states are recorded episode starts from the dataset and the known
/// reward is reused.
RolloutBatch virtual_rollouts(const ModelNet& model, const ContinuousEnv& env, const GaussianPolicy& policy,
                              const ReplayDataset& data, int n_samples, Rng& rng);

/// Value baseline: DenseNet on observations with an output offset and scale.
struct ValueBaseline {
  ValueBaseline() = default;
  ValueBaseline(int obs_dim, const std::vector<int>& hidden, double lr, Rng& rng);

  DenseNet net;
  AdamState adam;
  double offset = 0.0;
  double scale = 1.0;

  Vec predict(const Mat& obs) const;
  /// Regression toward targets with `steps` Adam minibatch steps; returns the final mean squared error.
  double fit(const Mat& obs, const Vec& targets, int steps, int batch, Rng& rng);
};

/// GAE(gamma, lambda) with bootstrap at truncation; returns advantages.
Vec gae_advantages(const RolloutBatch& batch, const Vec& values, const Vec& last_values, double gamma, double lambda);

struct TrpoStats {
  bool accepted = false;
  double kl = 0.0;
  double improvement = 0.0;
  int backtracks = 0;
  double entropy = 0.0;
  double value_loss = 0.0;
};

/// Conjugate-gradient solve of F x = g for a symmetric positive definite operator.
Vec conjugate_gradient(const std::function<Vec(const Vec&)>& apply, const Vec& g, int iters);

/// One trust-region policy step followed by a baseline refit.
TrpoStats trpo_update(GaussianPolicy& policy, ValueBaseline& baseline, const RolloutBatch& batch,
                      const SlboConfig& cfg, Rng& rng);

struct TraceRow {
  int outer_iter = 0;
  long real_samples = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double model_loss = 0.0;
  double policy_kl = 0.0;
  double entropy = 0.0;
};

struct TrainingResult {
  std::vector<TraceRow> trace;
  GaussianPolicy policy;
  long real_samples = 0;
  long eval_samples = 0;
  long virtual_samples = 0;
  int accepted_updates = 0;
  int skipped_updates = 0;
  double max_accepted_kl = 0.0;
};

/// Mean and std of undiscounted returns of the policy mean over `episodes` real episodes.
std::pair<double, double> evaluate_policy(const ContinuousEnv& env, const GaussianPolicy& policy, int episodes,
                                          std::uint64_t seed, long* steps = nullptr);

/// Alternates n_model model steps and n_policy TRPO steps n_inner times per
/// outer iteration, after collecting n_collect real steps with OU noise.
TrainingResult slbo_train(const ContinuousEnv& env, const SlboConfig& cfg);

/// One model-fit phase then one policy phase per outer iteration.
TrainingResult mbtrpo_train(const ContinuousEnv& env, const SlboConfig& cfg);

enum class AblationAxis { horizon, entropy, loss };

AblationAxis parse_ablation_axis(const std::string& name);
std::string to_string(AblationAxis axis);

struct AblationRow {
  std::string axis;
  std::string value;
  std::uint64_t seed = 0;
  double final_return = 0.0;
  long real_samples = 0;
  double max_accepted_kl = 0.0;
};

struct AblationCell {
  std::string axis;
  std::string value;
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<AblationCell> cells;
};

/// Grid values for an axis: H {1,2,4,8}, lambda_entropy {0,0.001,0.003,0.005}, loss {l2,mse}.
std::vector<std::string> ablation_values(AblationAxis axis);
/// base with one axis set to `value`; the H axis keeps H * batch_size fixed.
SlboConfig ablation_config(const SlboConfig& base, AblationAxis axis, const std::string& value);

AblationResult ablate(const ContinuousEnv& env, const SlboConfig& base, AblationAxis axis, int seeds);

}  // namespace mbrl

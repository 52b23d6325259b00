#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mbrl/rng.hpp"

namespace mbrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { relu, tanh, identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation act);

/// Intermediate values of one forward pass, needed by backward and jvp.
struct ForwardCache {
  std::vector<Mat> inputs;  // inputs[l] feeds layer l
  std::vector<Mat> pre;     // pre-activations of layer l
  std::vector<Mat> slope;   // activation derivative at pre[l]
};

/// Fully connected network acting on column batches (features x samples).
///
/// All weights and biases live in one flat parameter vector; layer l stores
/// its out x in weight matrix (column-major) followed by its bias.
class DenseNet {
 public:
  DenseNet() = default;
  /// sizes = {in, h1, ..., out}; one activation per layer. Weights are
  /// uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  DenseNet(std::vector<int> sizes, std::vector<Activation> activations, Rng& rng);
  DenseNet(std::vector<int> sizes, std::vector<Activation> activations, Vec params);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }

  Eigen::Index num_params() const { return params_.size(); }
  const Vec& params() const { return params_; }
  void set_params(const Vec& params);

  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, ForwardCache& cache) const;

  /// Adds dL/dparams to `grad` for upstream = dL/dy and returns dL/dx.
  Mat backward(const ForwardCache& cache, const Mat& upstream, Vec& grad) const;

  /// Directional derivative of the output along a parameter tangent.
  Mat jvp(const ForwardCache& cache, const Vec& tangent) const;

  /// Smallest |pre-activation| over relu layers for input x (+inf without relu).
  double min_abs_relu_preactivation(const Mat& x) const;

 private:
  Eigen::Map<const Mat> weight(const Vec& flat, int l) const;
  Eigen::Map<const Vec> bias(const Vec& flat, int l) const;
  void check_input(const Mat& x) const;
  void layout();

  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  std::vector<Eigen::Index> offsets_;
  Vec params_;
};

/// Max over parameters and inputs of |analytic - central difference| / max(1, |analytic|)
/// for the scalar loss 0.5 ||net(x)||^2.
double grad_check(const DenseNet& net, const Mat& x, double h = 1e-5);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled L2
};

struct AdamState {
  AdamState() = default;
  AdamState(Eigen::Index n, AdamConfig cfg = {});

  Vec m;
  Vec v;
  long step = 0;
  AdamConfig config;
};

/// One Adam update with decoupled weight decay. Non-finite gradients throw
/// std::runtime_error naming the first offending index.
void adam_step(AdamState& state, Vec& params, const Vec& grad);

/// Diagonal Gaussian policy: mean = DenseNet with tanh hidden layers and a
/// linear output, state-independent log standard deviation.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& rng, double init_log_std);

  int obs_dim() const { return net_.input_dim(); }
  int act_dim() const { return net_.output_dim(); }
  const DenseNet& net() const { return net_; }
  const Vec& log_std() const { return log_std_; }

  /// Network parameters followed by log_std.
  Eigen::Index num_params() const { return net_.num_params() + log_std_.size(); }
  Vec flat_params() const;
  void set_flat_params(const Vec& flat);

  Mat mean(const Mat& obs) const { return net_.forward(obs); }
  Vec sample(const Vec& obs, Rng& rng) const;

 private:
  DenseNet net_;
  Vec log_std_;
};

/// Per-sample log-density of pre-squash actions (columns of act).
Vec gaussian_logprob(const Mat& mean, const Vec& log_std, const Mat& act);
/// Mean over samples of KL(N(mean_a, s_a) || N(mean_b, s_b)).
double gaussian_kl(const Mat& mean_a, const Vec& log_std_a, const Mat& mean_b, const Vec& log_std_b);

Vec policy_logprob(const GaussianPolicy& pi, const Mat& obs, const Mat& act);
/// Differential entropy; the same for every state.
double policy_entropy(const GaussianPolicy& pi);
/// Mean over the state batch of KL(pi_a(s) || pi_b(s)).
double policy_kl(const GaussianPolicy& pi_a, const GaussianPolicy& pi_b, const Mat& obs);
/// Gradient of sum_n weights[n] log pi(act_n | obs_n) in flat parameter layout.
Vec policy_logprob_grad(const GaussianPolicy& pi, const Mat& obs, const Mat& act, const Vec& weights);

/// `<base>.json` holds sizes and activations, `<base>.bin` the raw float64 parameters.
void save_checkpoint(const DenseNet& net, const std::string& base);
DenseNet load_checkpoint(const std::string& base);

}  // namespace mbrl

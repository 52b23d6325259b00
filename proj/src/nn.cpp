#include "mbrl/nn.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mbrl {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "?";
}

namespace {

Mat activate(Activation act, const Mat& z) {
  switch (act) {
    case Activation::relu:
      return z.cwiseMax(0.0);
    case Activation::tanh:
      return z.array().tanh().matrix();
    case Activation::identity:
      return z;
  }
  return z;
}

// Elementwise derivative of the activation from its pre-activation z and output h.
Mat activate_grad(Activation act, const Mat& z, const Mat& h) {
  switch (act) {
    case Activation::relu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh:
      return (1.0 - h.array().square()).matrix();
    case Activation::identity:
      return Mat::Ones(z.rows(), z.cols());
  }
  return Mat::Ones(z.rows(), z.cols());
}

}  // namespace

void DenseNet::layout() {
  if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least input and output sizes");
  if (activations_.size() != sizes_.size() - 1)
    throw std::invalid_argument("DenseNet: one activation per layer required");
  for (int s : sizes_)
    if (s <= 0) throw std::invalid_argument("DenseNet: layer sizes must be positive");
  offsets_.clear();
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  offsets_.push_back(total);
}

DenseNet::DenseNet(std::vector<int> sizes, std::vector<Activation> activations, Rng& rng)
    : sizes_(std::move(sizes)), activations_(std::move(activations)) {
  layout();
  params_ = Vec::Zero(offsets_.back());
  for (int l = 0; l < n_layers(); ++l) {
    const int in = sizes_[static_cast<std::size_t>(l)], out = sizes_[static_cast<std::size_t>(l) + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i)
      params_[offsets_[static_cast<std::size_t>(l)] + i] = rng.uniform(-limit, limit);
  }
}

DenseNet::DenseNet(std::vector<int> sizes, std::vector<Activation> activations, Vec params)
    : sizes_(std::move(sizes)), activations_(std::move(activations)) {
  layout();
  set_params(params);
}

void DenseNet::set_params(const Vec& params) {
  if (params.size() != offsets_.back()) throw std::invalid_argument("DenseNet: parameter vector has wrong length");
  if (!params.allFinite()) throw std::invalid_argument("DenseNet: non-finite parameters");
  params_ = params;
}

Eigen::Map<const Mat> DenseNet::weight(const Vec& flat, int l) const {
  const auto li = static_cast<std::size_t>(l);
  return {flat.data() + offsets_[li], sizes_[li + 1], sizes_[li]};
}

Eigen::Map<const Vec> DenseNet::bias(const Vec& flat, int l) const {
  const auto li = static_cast<std::size_t>(l);
  return {flat.data() + offsets_[li] + static_cast<Eigen::Index>(sizes_[li + 1]) * sizes_[li], sizes_[li + 1]};
}

void DenseNet::check_input(const Mat& x) const {
  if (sizes_.empty()) throw std::logic_error("DenseNet: uninitialized network");
  if (x.rows() != input_dim()) {
    std::ostringstream msg;
    msg << "DenseNet: input has " << x.rows() << " rows, expected " << input_dim();
    throw std::invalid_argument(msg.str());
  }
}

Mat DenseNet::forward(const Mat& x) const {
  check_input(x);
  Mat h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Mat z = weight(params_, l) * h;
    z.colwise() += bias(params_, l);
    h = activate(activations_[static_cast<std::size_t>(l)], z);
  }
  return h;
}

Mat DenseNet::forward(const Mat& x, ForwardCache& cache) const {
  check_input(x);
  cache.inputs.assign(1, x);
  cache.pre.clear();
  cache.slope.clear();
  for (int l = 0; l < n_layers(); ++l) {
    const Activation act = activations_[static_cast<std::size_t>(l)];
    Mat z = weight(params_, l) * cache.inputs.back();
    z.colwise() += bias(params_, l);
    cache.inputs.push_back(activate(act, z));
    cache.slope.push_back(activate_grad(act, z, cache.inputs.back()));
    cache.pre.push_back(std::move(z));
  }
  Mat out = std::move(cache.inputs.back());
  cache.inputs.pop_back();
  return out;
}

Mat DenseNet::backward(const ForwardCache& cache, const Mat& upstream, Vec& grad) const {
  if (static_cast<int>(cache.slope.size()) != n_layers()) throw std::invalid_argument("DenseNet: stale forward cache");
  if (upstream.rows() != output_dim() || upstream.cols() != cache.inputs.front().cols())
    throw std::invalid_argument("DenseNet: upstream gradient has wrong shape");
  if (grad.size() != num_params()) throw std::invalid_argument("DenseNet: gradient buffer has wrong length");
  Mat delta = upstream;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    delta = delta.cwiseProduct(cache.slope[li]);
    const Eigen::Index rows = sizes_[li + 1], cols = sizes_[li];
    Eigen::Map<Mat>(grad.data() + offsets_[li], rows, cols).noalias() += delta * cache.inputs[li].transpose();
    Eigen::Map<Vec>(grad.data() + offsets_[li] + rows * cols, rows) += delta.rowwise().sum();
    delta = weight(params_, l).transpose() * delta;
  }
  return delta;
}

Mat DenseNet::jvp(const ForwardCache& cache, const Vec& tangent) const {
  if (tangent.size() != num_params()) throw std::invalid_argument("DenseNet: tangent has wrong length");
  Mat dh = Mat::Zero(input_dim(), cache.inputs.front().cols());
  for (int l = 0; l < n_layers(); ++l) {
    const auto li = static_cast<std::size_t>(l);
    Mat dz = weight(tangent, l) * cache.inputs[li] + weight(params_, l) * dh;
    dz.colwise() += bias(tangent, l);
    dh = dz.cwiseProduct(cache.slope[li]);
  }
  return dh;
}

double DenseNet::min_abs_relu_preactivation(const Mat& x) const {
  ForwardCache cache;
  forward(x, cache);
  double best = std::numeric_limits<double>::infinity();
  for (int l = 0; l < n_layers(); ++l)
    if (activations_[static_cast<std::size_t>(l)] == Activation::relu)
      best = std::min(best, cache.pre[static_cast<std::size_t>(l)].cwiseAbs().minCoeff());
  return best;
}

double grad_check(const DenseNet& net, const Mat& x, double h) {
  const auto loss = [](const Mat& y) { return 0.5 * y.squaredNorm(); };
  ForwardCache cache;
  const Mat y = net.forward(x, cache);
  Vec grad = Vec::Zero(net.num_params());
  const Mat dx = net.backward(cache, y, grad);

  double worst = 0.0;
  const auto record = [&](double analytic, double numeric) {
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
  };
  DenseNet probe = net;
  Vec p = net.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    probe.set_params(p);
    const double up = loss(probe.forward(x));
    p[i] = keep - h;
    probe.set_params(p);
    const double down = loss(probe.forward(x));
    p[i] = keep;
    record(grad[i], (up - down) / (2.0 * h));
  }
  Mat xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = xp.data()[i];
    xp.data()[i] = keep + h;
    const double up = loss(net.forward(xp));
    xp.data()[i] = keep - h;
    const double down = loss(net.forward(xp));
    xp.data()[i] = keep;
    record(dx.data()[i], (up - down) / (2.0 * h));
  }
  return worst;
}

AdamState::AdamState(Eigen::Index n, AdamConfig cfg) : m(Vec::Zero(n)), v(Vec::Zero(n)), config(cfg) {}

void adam_step(AdamState& state, Vec& params, const Vec& grad) {
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      std::ostringstream msg;
      msg << "adam_step: non-finite gradient at index " << i << " (step " << state.step << ")";
      throw std::runtime_error(msg.str());
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const Vec update = (state.m / m_corr).array() / ((state.v / v_corr).array().sqrt() + c.eps);
  params -= c.lr * (update + c.weight_decay * params);
}

GaussianPolicy::GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& rng,
                               double init_log_std) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(act_dim);
  std::vector<Activation> acts(sizes.size() - 1, Activation::tanh);
  acts.back() = Activation::identity;
  net_ = DenseNet(sizes, acts, rng);
  // Start near the zero action.
  Vec params = net_.params();
  params.tail(static_cast<Eigen::Index>(act_dim) * (sizes[sizes.size() - 2] + 1)) *= 0.01;
  net_.set_params(params);
  log_std_ = Vec::Constant(act_dim, init_log_std);
}

Vec GaussianPolicy::flat_params() const {
  Vec flat(num_params());
  flat << net_.params(), log_std_;
  return flat;
}

void GaussianPolicy::set_flat_params(const Vec& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("GaussianPolicy: parameter vector has wrong length");
  net_.set_params(flat.head(net_.num_params()));
  log_std_ = flat.tail(log_std_.size());
}

Vec GaussianPolicy::sample(const Vec& obs, Rng& rng) const {
  const Vec mu = mean(obs);
  return mu + log_std_.array().exp().matrix().cwiseProduct(rng.normal_vector(act_dim()));
}

Vec gaussian_logprob(const Mat& mean, const Vec& log_std, const Mat& act) {
  if (mean.rows() != log_std.size() || act.rows() != mean.rows() || act.cols() != mean.cols())
    throw std::invalid_argument("gaussian_logprob: shape mismatch");
  const Vec inv_std = (-log_std).array().exp();
  const double constant = -log_std.sum() - 0.5 * log_std.size() * std::log(2.0 * std::numbers::pi);
  const Mat z = (act - mean).array().colwise() * inv_std.array();
  return (constant - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
}

double gaussian_kl(const Mat& mean_a, const Vec& log_std_a, const Mat& mean_b, const Vec& log_std_b) {
  if (mean_a.rows() != mean_b.rows() || mean_a.cols() != mean_b.cols() || log_std_a.size() != mean_a.rows() ||
      log_std_b.size() != mean_b.rows())
    throw std::invalid_argument("gaussian_kl: shape mismatch");
  const Vec var_a = (2.0 * log_std_a).array().exp();
  const Vec inv_var_b = (-2.0 * log_std_b).array().exp();
  const double per_state = (log_std_b - log_std_a).sum() + 0.5 * var_a.cwiseProduct(inv_var_b).sum() -
                           0.5 * static_cast<double>(log_std_a.size());
  const Mat diff = mean_a - mean_b;
  const double quad = (diff.array().square().colwise() * inv_var_b.array()).sum();
  return per_state + 0.5 * quad / static_cast<double>(mean_a.cols());
}

Vec policy_logprob(const GaussianPolicy& pi, const Mat& obs, const Mat& act) {
  return gaussian_logprob(pi.mean(obs), pi.log_std(), act);
}

double policy_entropy(const GaussianPolicy& pi) {
  return pi.log_std().sum() + 0.5 * pi.act_dim() * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

double policy_kl(const GaussianPolicy& pi_a, const GaussianPolicy& pi_b, const Mat& obs) {
  return gaussian_kl(pi_a.mean(obs), pi_a.log_std(), pi_b.mean(obs), pi_b.log_std());
}

Vec policy_logprob_grad(const GaussianPolicy& pi, const Mat& obs, const Mat& act, const Vec& weights) {
  if (weights.size() != obs.cols()) throw std::invalid_argument("policy_logprob_grad: weights length");
  ForwardCache cache;
  const Mat mean = pi.net().forward(obs, cache);
  const Vec inv_var = (-2.0 * pi.log_std()).array().exp();
  const Mat diff = act - mean;
  // d logp / d mean = (a - mu) / sigma^2; d logp / d log_std = (a - mu)^2 / sigma^2 - 1.
  const Mat upstream = (diff.array().colwise() * inv_var.array()).rowwise() * weights.transpose().array();
  Vec grad = Vec::Zero(pi.num_params());
  Vec net_grad = Vec::Zero(pi.net().num_params());
  pi.net().backward(cache, upstream, net_grad);
  grad.head(net_grad.size()) = net_grad;
  const Mat scaled = diff.array().square().colwise() * inv_var.array() - 1.0;
  grad.tail(pi.act_dim()) = scaled * weights;
  return grad;
}

void save_checkpoint(const DenseNet& net, const std::string& base) {
  nlohmann::json header;
  header["sizes"] = net.sizes();
  std::vector<std::string> acts;
  for (Activation a : net.activations()) acts.push_back(to_string(a));
  header["activations"] = acts;
  header["num_params"] = net.num_params();
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  std::ofstream js(base + ".json");
  if (!js) throw std::runtime_error("save_checkpoint: cannot write " + base + ".json");
  js << header.dump(2) << '\n';
  std::ofstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("save_checkpoint: cannot write " + base + ".bin");
  bin.write(reinterpret_cast<const char*>(net.params().data()),
            static_cast<std::streamsize>(net.num_params() * static_cast<Eigen::Index>(sizeof(double))));
}

DenseNet load_checkpoint(const std::string& base) {
  std::ifstream js(base + ".json");
  if (!js) throw std::runtime_error("load_checkpoint: cannot read " + base + ".json");
  const nlohmann::json header = nlohmann::json::parse(js);
  const auto sizes = header.at("sizes").get<std::vector<int>>();
  std::vector<Activation> acts;
  for (const auto& a : header.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
  const auto n = header.at("num_params").get<Eigen::Index>();
  Vec params(n);
  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load_checkpoint: cannot read " + base + ".bin");
  bin.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(double))));
  if (bin.gcount() != static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(double))))
    throw std::runtime_error("load_checkpoint: truncated parameter file");
  return DenseNet(sizes, acts, std::move(params));
}

}  // namespace mbrl

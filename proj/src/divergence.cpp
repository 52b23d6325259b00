#include "mbrl/divergence.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mbrl {

namespace {

void check_same_size(const Vec& p, const Vec& q, const char* what) {
  if (p.size() != q.size() || p.size() == 0) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

[[noreturn]] void support_error(const char* what, Eigen::Index i) {
  std::ostringstream msg;
  msg << what << ": reference distribution has zero mass at index " << i;
  throw std::domain_error(msg.str());
}

}  // namespace

DivergenceValue chi_square(const Vec& p, const Vec& q) {
  check_same_size(p, q, "chi_square");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(q[i] > 0.0)) support_error("chi_square", i);
    const double d = p[i] - q[i];
    acc += d * d / q[i];
  }
  return {acc, DivergenceKind::chi2};
}

double chi_square_on_support(const Vec& p, const Vec& q) {
  check_same_size(p, q, "chi_square_on_support");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (q[i] > 0.0) {
      const double d = p[i] - q[i];
      acc += d * d / q[i];
    } else if (p[i] > 0.0) {
      support_error("chi_square_on_support", i);
    }
  }
  return acc;
}

DivergenceValue kl(const Vec& p, const Vec& q) {
  check_same_size(p, q, "kl");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (!(q[i] > 0.0)) support_error("kl", i);
    acc += p[i] * std::log(p[i] / q[i]);
  }
  // Exact zero for equal inputs; tiny negative round-off otherwise.
  return {std::max(acc, 0.0), DivergenceKind::kl};
}

double l1_distance(const Vec& p, const Vec& q) {
  check_same_size(p, q, "l1_distance");
  return (p - q).cwiseAbs().sum();
}

DivergenceValue tv(const Vec& p, const Vec& q) { return {0.5 * l1_distance(p, q), DivergenceKind::tv}; }

DivergenceValue kernel_chi_square(const Mat& kernel_a, const Mat& kernel_b, const Vec& mu) {
  if (kernel_a.rows() != kernel_b.rows() || kernel_a.cols() != kernel_b.cols() || kernel_a.rows() != mu.size())
    throw std::invalid_argument("kernel_chi_square: shape mismatch");
  double acc = 0.0;
  for (Eigen::Index x = 0; x < mu.size(); ++x) {
    if (mu[x] == 0.0) continue;
    acc += mu[x] * chi_square_on_support(kernel_a.row(x).transpose(), kernel_b.row(x).transpose());
  }
  return {acc, DivergenceKind::chi2};
}

BoundCheck check_kl_below_chi(const Vec& p, const Vec& q) {
  return make_check("kl<=chi2", kl(p, q).value, chi_square(p, q).value);
}

BoundCheck check_pinsker(const Vec& p, const Vec& q) {
  return make_check("pinsker", l1_distance(p, q), std::sqrt(2.0 * kl(p, q).value));
}

BoundCheck check_data_processing(const Vec& mu, const Vec& mu_prime, const Mat& kernel) {
  return make_check("data_processing", chi_square(push_forward(kernel, mu), push_forward(kernel, mu_prime)).value,
                    chi_square(mu, mu_prime).value);
}

BoundCheck check_mixture_bound(const Vec& mu, const Mat& kernel_a, const Mat& kernel_b) {
  return make_check("mixture_bound",
                    chi_square(push_forward(kernel_a, mu), push_forward(kernel_b, mu)).value,
                    kernel_chi_square(kernel_a, kernel_b, mu).value);
}

BoundCheck check_action_contraction(const FiniteMdp& mdp, const TabularPolicy& pi_a, const TabularPolicy& pi_b,
                                    int s) {
  Vec next_a = Vec::Zero(mdp.n_states());
  Vec next_b = Vec::Zero(mdp.n_states());
  for (int a = 0; a < mdp.n_actions(); ++a) {
    next_a += pi_a(s, a) * mdp.next_dist(s, a).transpose();
    next_b += pi_b(s, a) * mdp.next_dist(s, a).transpose();
  }
  return make_check("action_contraction", chi_square_on_support(next_a, next_b),
                    chi_square(pi_a.row(s).transpose(), pi_b.row(s).transpose()).value);
}

BoundCheck check_inner_product(const Vec& p, const Vec& q, const Vec& f) {
  const double inner = (q - p).dot(f);
  return make_check("inner_product", inner * inner, chi_square(q, p).value * p.dot(f.cwiseAbs2()));
}

BoundCheck check_single_step(const Mat& w, const Mat& kernel, const Mat& kernel_prime, const Vec& mu,
                             const Vec& f) {
  const Vec diff = push_forward(w, push_forward(kernel_prime, mu) - push_forward(kernel, mu));
  const double inner = diff.dot(f);
  const Vec wp = push_forward(w, push_forward(kernel, mu));
  return make_check("single_step", inner * inner,
                    kernel_chi_square(kernel_prime, kernel, mu).value * wp.dot(f.cwiseAbs2()));
}

ResolventResidual resolvent_identity_residual(const FiniteMdp& mdp, const TabularPolicy& pi_a,
                                              const TabularPolicy& pi_b, int terms) {
  if (terms < 1) throw std::invalid_argument("resolvent_identity_residual: terms must be >= 1");
  const double g = mdp.gamma();
  // Column convention: operators act on distributions from the left.
  const Mat p = policy_kernel(mdp, pi_a).transpose();
  const Mat p_prime = policy_kernel(mdp, pi_b).transpose();
  const Eigen::Index n = p.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat delta = g * (p_prime - p);

  const Mat big_g = (id - g * p).partialPivLu().inverse();
  const Mat big_g_prime = (id - g * p_prime).partialPivLu().inverse();
  const Mat gbar = (1.0 - g) * big_g;
  const Mat gbar_prime = (1.0 - g) * big_g_prime;

  ResolventResidual out;
  out.terms = terms;
  out.identity_residual =
      ((gbar_prime - gbar) - gbar_prime * delta * gbar / (1.0 - g)).cwiseAbs().maxCoeff();

  const Mat g_delta = big_g * delta;
  Mat power = g_delta;
  Mat series = Mat::Zero(n, n);
  for (int k = 1; k <= terms; ++k) {
    series += power * big_g;
    power = power * g_delta;
  }
  out.neumann_residual = ((big_g_prime - big_g) - series).cwiseAbs().maxCoeff();
  // Induced l1 norm = max column sum.
  const double gd_norm = g_delta.cwiseAbs().colwise().sum().maxCoeff();
  const double gp_norm = big_g_prime.cwiseAbs().colwise().sum().maxCoeff();
  out.neumann_tail_bound = std::pow(gd_norm, terms + 1) * gp_norm;
  return out;
}

BoundCheck tv_visitation_bound(const FiniteMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pi_prime) {
  const Vec r = rho(mdp, pi).weights;
  const Vec r_prime = rho(mdp, pi_prime).weights;
  double expected = 0.0;
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (r[s] == 0.0) continue;
    expected += r[s] * std::sqrt(kl(pi.row(s).transpose(), pi_prime.row(s).transpose()).value);
  }
  return make_check("tv_visitation", l1_distance(r, r_prime), mdp.kappa() * expected);
}

std::vector<BoundCheck> chain_perturbation_bounds(const FiniteMdp& mdp, const TabularPolicy& pi,
                                                  const TabularPolicy& pi_prime, const Vec& f, int levels) {
  if (levels < 1 || levels > 4) throw std::invalid_argument("chain_perturbation_bounds: levels must be in [1, 4]");
  if (f.size() != mdp.n_states()) throw std::invalid_argument("chain_perturbation_bounds: f has wrong length");
  const double g = mdp.gamma();
  const Mat kernel = policy_kernel(mdp, pi);
  const Mat kernel_prime = policy_kernel(mdp, pi_prime);
  const Mat res = resolvent(kernel, g);
  const Mat res_prime = resolvent(kernel_prime, g);
  const Vec& mu = mdp.init_dist();

  const double scale = f.cwiseAbs().maxCoeff();
  std::vector<BoundCheck> out;
  if (scale == 0.0) {
    out.push_back(make_check("chain_delta1", 0.0, 0.0));
    out.push_back(make_check("chain_two_term", 0.0, 0.0));
    for (int k = 1; k <= levels; ++k) out.push_back(make_check("chain_level" + std::to_string(k), 0.0, 0.0));
    return out;
  }
  const Vec h = f / scale;  // ||h||_inf = 1

  const Vec visit = res.transpose() * mu;
  const Vec visit_prime = res_prime.transpose() * mu;
  const double lhs = std::abs(visit_prime.dot(h) - visit.dot(h));

  // d_0 = Gbar mu, d_k = Gbar P d_{k-1}; delta_k uses d_{k-1}.
  std::vector<Vec> d{visit};
  for (int k = 1; k <= levels; ++k) d.push_back(res.transpose() * (kernel.transpose() * d.back()));
  std::vector<double> delta(static_cast<std::size_t>(levels) + 2, 0.0);
  for (int k = 1; k <= std::max(levels, 2); ++k) {
    delta[static_cast<std::size_t>(k)] =
        std::sqrt(kernel_chi_square(kernel_prime, kernel, d[static_cast<std::size_t>(k - 1)]).value) / (1.0 - g);
  }

  out.push_back(make_check("chain_delta1", scale * lhs, scale * delta[1]));
  const double two_term = delta[1] * std::sqrt(d[1].dot(h.cwiseAbs2())) + delta[1] * std::sqrt(delta[2]);
  out.push_back(make_check("chain_two_term", scale * lhs, scale * two_term));

  for (int level = 1; level <= levels; ++level) {
    double total = 0.0;
    double coeff = 1.0;
    for (int k = 1; k <= level; ++k) {
      coeff *= std::pow(delta[static_cast<std::size_t>(k)], std::ldexp(1.0, -(k - 1)));
      const double exponent = std::ldexp(1.0, k);
      const double moment = d[static_cast<std::size_t>(k)].dot(h.array().abs().pow(exponent).matrix());
      total += coeff * std::pow(moment, 1.0 / exponent);
    }
    total += coeff;  // coeff * ||h||_inf
    out.push_back(make_check("chain_level" + std::to_string(level), scale * lhs, scale * total));
  }
  return out;
}

}  // namespace mbrl

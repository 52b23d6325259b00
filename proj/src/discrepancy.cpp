#include "mbrl/discrepancy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mbrl {

namespace {

void check_pair(const FiniteMdp& m_hat, const FiniteMdp& m_star) {
  if (!m_hat.shares_spaces_with(m_star))
    throw std::invalid_argument("models must share states, actions, discount, reward and initial distribution");
}

double expect(const Vec& dist, const Vec& values) { return dist.dot(values); }

// Per-state expectation of a per-(s,a) table under pi.
Vec under_policy(const Mat& table, const TabularPolicy& pi) {
  return table.cwiseProduct(pi.probs()).rowwise().sum();
}

void require_embedded_deterministic(const FiniteMdp& m) {
  if (!m.deterministic()) throw std::invalid_argument("norm-based bound needs a deterministic model");
  if (!m.has_embedding()) throw std::invalid_argument("norm-based bound needs state embeddings");
}

// ||e(M_hat(s,a)) - e(M_star(s,a))||_2 per pair.
Mat prediction_errors(const FiniteMdp& m_hat, const FiniteMdp& m_star) {
  require_embedded_deterministic(m_hat);
  require_embedded_deterministic(m_star);
  const Mat& e = m_hat.embedding();
  Mat err(m_hat.n_states(), m_hat.n_actions());
  for (int s = 0; s < m_hat.n_states(); ++s)
    for (int a = 0; a < m_hat.n_actions(); ++a)
      err(s, a) = (e.row(m_hat.successor(s, a)) - e.row(m_star.successor(s, a))).norm();
  return err;
}

}  // namespace

Mat g_table(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi) {
  check_pair(m_hat, m_star);
  const Vec v = value_fn(m_hat, pi).v;
  const int S = m_hat.n_states(), A = m_hat.n_actions();
  Mat g(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) g(s, a) = m_hat.next_dist(s, a).dot(v) - m_star.next_dist(s, a).dot(v);
  return g;
}

double g_value(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi, int s, int a) {
  if (s < 0 || s >= m_hat.n_states() || a < 0 || a >= m_hat.n_actions())
    throw std::invalid_argument("g_value: state or action out of range");
  return g_table(m_hat, m_star, pi)(s, a);
}

Vec g_state(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi) {
  return under_policy(g_table(m_hat, m_star, pi), pi);
}

BoundCheck telescoping_check(const FiniteMdp& m_hat, const FiniteMdp& m, const TabularPolicy& pi) {
  const double lhs = value_fn(m_hat, pi).scalar - value_fn(m, pi).scalar;
  const Vec visit = rho(m, pi).weights;
  const double rhs = m.kappa() * expect(visit, g_state(m_hat, m, pi));
  return make_check("telescoping", lhs, rhs);
}

double d_kl_policies(const TabularPolicy& pi, const TabularPolicy& pi_ref, const FiniteMdp& m_star) {
  const Vec visit = rho(m_star, pi).weights;
  double acc = 0.0;
  for (int s = 0; s < m_star.n_states(); ++s) {
    if (visit[s] == 0.0) continue;
    acc += visit[s] * std::sqrt(kl(pi.row(s).transpose(), pi_ref.row(s).transpose()).value);
  }
  return acc;
}

double d_chi_policies(const TabularPolicy& pi, const TabularPolicy& pi_ref, const FiniteMdp& m_star) {
  const Vec r = rho(m_star, pi_ref).weights;
  const Vec b = beta(m_star, pi_ref).weights;
  Vec chi(m_star.n_states());
  for (int s = 0; s < m_star.n_states(); ++s) {
    if (r[s] == 0.0 && b[s] == 0.0) {
      chi[s] = 0.0;
      continue;
    }
    chi[s] = chi_square_on_support(pi.row(s).transpose(), pi_ref.row(s).transpose());
  }
  return std::max(expect(r, chi), expect(b, chi));
}

double policy_distance(PolicyDistance kind, const TabularPolicy& pi, const TabularPolicy& pi_ref,
                       const FiniteMdp& m_star) {
  try {
    return kind == PolicyDistance::kl ? d_kl_policies(pi, pi_ref, m_star) : d_chi_policies(pi, pi_ref, m_star);
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

double feasible_mixture_weight(const TabularPolicy& from, const TabularPolicy& toward, double delta,
                               const std::function<double(const TabularPolicy&)>& distance, int steps) {
  if (distance(toward) <= delta) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (distance(TabularPolicy::mixture(from, toward, mid)) <= delta)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

EpsilonStats epsilon_stats(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                           const TabularPolicy& pi_ref) {
  const Mat g = g_table(m_hat, m_star, pi);
  const Vec gs = under_policy(g, pi);
  const Vec r = rho(m_star, pi_ref).weights;
  const Vec b = beta(m_star, pi_ref).weights;
  EpsilonStats out;
  out.eps1 = expect(r, gs.cwiseAbs());
  out.eps2 = expect(b, gs.cwiseAbs2());
  out.eps_max = gs.cwiseAbs().maxCoeff();
  out.eps1_pairwise = expect(r, under_policy(g.cwiseAbs(), pi));
  return out;
}

double lipschitz_estimate(const FiniteMdp& m_hat, const TabularPolicy& pi) {
  if (m_hat.n_states() < 2) throw std::invalid_argument("lipschitz_estimate: needs at least two states");
  const Mat& e = m_hat.embedding();
  const Vec v = value_fn(m_hat, pi).v;
  double best = 0.0;
  for (int s = 0; s < m_hat.n_states(); ++s) {
    for (int t = s + 1; t < m_hat.n_states(); ++t) {
      const double gap = std::abs(v[s] - v[t]);
      const double dist = (e.row(s) - e.row(t)).norm();
      if (dist == 0.0) {
        if (gap > 1e-12) return std::numeric_limits<double>::infinity();
        continue;
      }
      best = std::max(best, gap / dist);
    }
  }
  return best;
}

NormBounds discrepancy_norm(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                            const TabularPolicy& pi_ref, double delta) {
  check_pair(m_hat, m_star);
  const Mat err = prediction_errors(m_hat, m_star);
  const Vec err_s = under_policy(err, pi);
  const double kappa = m_star.kappa();

  NormBounds out;
  out.lipschitz = lipschitz_estimate(m_hat, pi);
  out.state_bound = m_hat.embedding().rowwise().norm().maxCoeff();
  out.max_error = err.maxCoeff();
  const double on_policy = expect(rho(m_star, pi).weights, err_s);
  const double on_ref = expect(rho(m_star, pi_ref).weights, err_s);
  // Zero error makes the bound zero regardless of L (avoids 0 * inf).
  const auto scaled = [&](double e) { return e == 0.0 ? 0.0 : kappa * out.lipschitz * e; };
  out.bound_lemma = scaled(on_policy);
  out.bound_prop = scaled(on_ref) + 2.0 * kappa * kappa * delta * out.state_bound;
  out.bound_prop_max_error = scaled(on_ref) + 2.0 * kappa * kappa * delta * out.max_error;
  return out;
}

double discrepancy_G(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                     const TabularPolicy& pi_ref, double delta) {
  const EpsilonStats eps = epsilon_stats(m_hat, m_star, pi, pi_ref);
  const double kappa = m_star.kappa();
  return kappa * eps.eps1 + kappa * kappa * delta * eps.eps_max;
}

double discrepancy_chi(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                       const TabularPolicy& pi_ref, double delta) {
  const EpsilonStats eps = epsilon_stats(m_hat, m_star, pi, pi_ref);
  const double h = 1.0 - m_star.gamma();
  return eps.eps1 / h + delta * eps.eps2 / (h * h) + std::pow(delta, 1.5) * eps.eps_max / std::pow(h, 2.5);
}

double discrepancy_chi_chain_form(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                                  const TabularPolicy& pi_ref, double delta) {
  const EpsilonStats eps = epsilon_stats(m_hat, m_star, pi, pi_ref);
  const double h = 1.0 - m_star.gamma();
  const double kappa = m_star.kappa();
  return kappa * (eps.eps1 + std::sqrt(delta * eps.eps2) / h + std::pow(delta, 0.75) * eps.eps_max / std::pow(h, 1.5));
}

double true_gap(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi) {
  return std::abs(value_fn(m_star, pi).scalar - value_fn(m_hat, pi).scalar);
}

DiscrepancyReport discrepancy_report(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi,
                                     const TabularPolicy& pi_ref, double delta) {
  const EpsilonStats eps = epsilon_stats(m_hat, m_star, pi, pi_ref);
  const double kappa = m_star.kappa();
  const double h = 1.0 - m_star.gamma();
  DiscrepancyReport r;
  r.eps1 = eps.eps1;
  r.eps2 = eps.eps2;
  r.eps_max = eps.eps_max;
  r.d_kl = policy_distance(PolicyDistance::kl, pi, pi_ref, m_star);
  r.d_chi = policy_distance(PolicyDistance::chi, pi, pi_ref, m_star);
  r.bound_G = kappa * eps.eps1 + kappa * kappa * delta * eps.eps_max;
  r.bound_chi = eps.eps1 / h + delta * eps.eps2 / (h * h) + std::pow(delta, 1.5) * eps.eps_max / std::pow(h, 2.5);
  r.true_gap = true_gap(m_hat, m_star, pi);
  r.delta = delta;
  r.bound_norm = std::numeric_limits<double>::quiet_NaN();
  if (m_hat.deterministic() && m_star.deterministic() && m_hat.has_embedding() && m_hat.n_states() >= 2) {
    const NormBounds nb = discrepancy_norm(m_hat, m_star, pi, pi_ref, delta);
    r.bound_norm = nb.bound_prop;
    r.L_lipschitz = nb.lipschitz;
    r.B_state = nb.state_bound;
  }
  return r;
}

namespace {

void check_bijection(const std::vector<int>& perm, int n) {
  if (static_cast<int>(perm.size()) != n) throw std::invalid_argument("state map has wrong length");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int t : perm) {
    if (t < 0 || t >= n || seen[static_cast<std::size_t>(t)])
      throw std::invalid_argument("state map is not a bijection");
    seen[static_cast<std::size_t>(t)] = true;
  }
}

}  // namespace

Vec transform_state_vector(const Vec& v, const StateBijection& map) {
  check_bijection(map.perm, static_cast<int>(v.size()));
  Vec out(v.size());
  for (Eigen::Index s = 0; s < v.size(); ++s) out[map.perm[static_cast<std::size_t>(s)]] = v[s];
  return out;
}

TabularPolicy transform_policy(const TabularPolicy& pi, const StateBijection& map) {
  check_bijection(map.perm, pi.n_states());
  Mat probs(pi.n_states(), pi.n_actions());
  for (int s = 0; s < pi.n_states(); ++s) probs.row(map.perm[static_cast<std::size_t>(s)]) = pi.row(s);
  return TabularPolicy(std::move(probs));
}

FiniteMdp transform_mdp(const FiniteMdp& mdp, const StateBijection& map) {
  const int S = mdp.n_states(), A = mdp.n_actions();
  check_bijection(map.perm, S);
  const auto& perm = map.perm;
  Mat transition = Mat::Zero(S * A, S);
  Mat reward(S, A);
  Vec init(S);
  for (int s = 0; s < S; ++s) {
    const int ts = perm[static_cast<std::size_t>(s)];
    init[ts] = mdp.init_dist()[s];
    for (int a = 0; a < A; ++a) {
      reward(ts, a) = mdp.reward(s, a);
      for (int t = 0; t < S; ++t) transition(ts * A + a, perm[static_cast<std::size_t>(t)]) = mdp.next_dist(s, a)[t];
    }
  }
  std::optional<Mat> embedding;
  if (map.embedding) {
    embedding = *map.embedding;
  } else if (mdp.has_embedding()) {
    Mat e(S, mdp.embedding().cols());
    for (int s = 0; s < S; ++s) e.row(perm[static_cast<std::size_t>(s)]) = mdp.embedding().row(s);
    embedding = std::move(e);
  }
  return FiniteMdp(S, A, std::move(transition), std::move(reward), mdp.gamma(), std::move(init),
                   std::move(embedding));
}

}  // namespace mbrl

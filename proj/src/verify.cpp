#include "mbrl/verify.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mbrl/discrepancy.hpp"
#include "mbrl/generators.hpp"
#include "mbrl/meta_opt.hpp"

namespace mbrl {

namespace {

std::uint64_t instance_seed(std::uint64_t seed, int i) { return seed * 1000000ULL + static_cast<std::uint64_t>(i); }

Mat random_kernel(int n, Rng& rng) {
  Mat k(n, n);
  for (int i = 0; i < n; ++i) k.row(i) = rng.dirichlet(n).transpose();
  return k;
}

FiniteMdp random_small_mdp(Rng& rng, double gamma, bool deterministic = false) {
  RandomMdpOptions opts;
  opts.n_states = 2 + static_cast<int>(rng.below(5));
  opts.n_actions = 2 + static_cast<int>(rng.below(2));
  opts.gamma = gamma;
  opts.deterministic = deterministic;
  opts.embedding_dim = deterministic ? 2 : 0;
  return random_mdp(opts, rng);
}

double pick_gamma(Rng& rng) {
  static const double gammas[] = {0.5, 0.9, 0.99};
  return gammas[rng.below(3)];
}

// A policy a random fraction of the way from pi_ref to the edge of the ball.
TabularPolicy policy_in_ball(const TabularPolicy& pi_ref, const FiniteMdp& m_star, PolicyDistance kind, double delta,
                             Rng& rng) {
  const auto target = TabularPolicy::random(pi_ref.n_states(), pi_ref.n_actions(), rng);
  const auto dist = [&](const TabularPolicy& p) { return policy_distance(kind, p, pi_ref, m_star); };
  const double alpha = feasible_mixture_weight(pi_ref, target, delta, dist);
  return TabularPolicy::mixture(pi_ref, target, alpha * rng.uniform());
}

void divergence_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  const auto add = [&](BoundCheck c) { out.push_back({std::move(c), seed}); };
  const int n = 2 + static_cast<int>(rng.below(7));
  const Vec p = rng.dirichlet(n), q = rng.dirichlet(n);
  const Vec mu = rng.dirichlet(n), mu2 = rng.dirichlet(n);
  const Mat k = random_kernel(n, rng), k2 = random_kernel(n, rng), w = random_kernel(n, rng);
  const Vec f = rng.normal_vector(n);
  add(check_kl_below_chi(p, q));
  add(check_pinsker(p, q));
  add(check_data_processing(mu, mu2, k));
  add(check_mixture_bound(mu, k, k2));
  add(check_inner_product(p, q, f));
  add(check_single_step(w, k, k2, mu, f));

  const FiniteMdp m = random_small_mdp(rng, pick_gamma(rng));
  const int S = m.n_states(), A = m.n_actions();
  const auto pi = TabularPolicy::random(S, A, rng);
  const auto pi2 = TabularPolicy::mixture(pi, TabularPolicy::random(S, A, rng), rng.uniform());
  for (int s = 0; s < S; ++s) add(check_action_contraction(m, pi, pi2, s));
  for (auto& c : chain_perturbation_bounds(m, pi, pi2, rng.normal_vector(S) * 3.0, 3)) add(std::move(c));
  const ResolventResidual r = resolvent_identity_residual(m, pi, pi2);
  add(make_check("resolvent_identity", r.identity_residual, 1e-10));
  add(make_check("neumann_tail", r.neumann_residual, r.neumann_tail_bound));
  add(tv_visitation_bound(m, pi, pi2));
}

void discrepancy_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  const auto add = [&](BoundCheck c) { out.push_back({std::move(c), seed}); };
  const FiniteMdp m_star = random_small_mdp(rng, pick_gamma(rng));
  const FiniteMdp m_hat = perturbed_copy(m_star, rng.uniform(0.05, 0.5), rng);
  const auto pi_ref = TabularPolicy::random(m_star.n_states(), m_star.n_actions(), rng);
  const double delta = rng.uniform(0.01, 0.3);

  const auto pi_kl = policy_in_ball(pi_ref, m_star, PolicyDistance::kl, delta, rng);
  add(make_check("G_sound", true_gap(m_hat, m_star, pi_kl), discrepancy_G(m_hat, m_star, pi_kl, pi_ref, delta)));
  const auto pi_chi = policy_in_ball(pi_ref, m_star, PolicyDistance::chi, delta, rng);
  add(make_check("chi_sound", true_gap(m_hat, m_star, pi_chi),
                 discrepancy_chi(m_hat, m_star, pi_chi, pi_ref, delta)));

  add(make_check("G_zero_at_truth", std::abs(discrepancy_G(m_star, m_star, pi_kl, pi_ref, delta)), 1e-12));
  add(make_check("chi_zero_at_truth", std::abs(discrepancy_chi(m_star, m_star, pi_chi, pi_ref, delta)), 1e-12));
}

void telescoping_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  const FiniteMdp m = random_small_mdp(rng, pick_gamma(rng));
  const FiniteMdp m_hat = perturbed_copy(m, rng.uniform(0.05, 1.0), rng);
  const auto pi = TabularPolicy::random(m.n_states(), m.n_actions(), rng);
  const BoundCheck c = telescoping_check(m_hat, m, pi);
  out.push_back({make_check("telescoping", std::abs(c.lhs - c.rhs), 1e-8), seed});
}

void invariance_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  const FiniteMdp m_star = random_small_mdp(rng, pick_gamma(rng));
  const FiniteMdp m_hat = perturbed_copy(m_star, rng.uniform(0.05, 0.5), rng);
  const int S = m_star.n_states();
  const auto pi = TabularPolicy::random(S, m_star.n_actions(), rng);
  std::vector<int> perm(static_cast<std::size_t>(S));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = S - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(i + 1)]);
  const StateBijection map{perm, std::nullopt};
  const FiniteMdp hat2 = transform_mdp(m_hat, map), star2 = transform_mdp(m_star, map);
  const TabularPolicy pi2 = transform_policy(pi, map);

  const Vec v = transform_state_vector(value_fn(m_hat, pi).v, map);
  const double dv = (v - value_fn(hat2, pi2).v).cwiseAbs().maxCoeff();
  out.push_back({make_check("value_invariant", dv, 1e-10), seed});
  const Vec g = transform_state_vector(g_state(m_hat, m_star, pi), map);
  const double dg = (g - g_state(hat2, star2, pi2)).cwiseAbs().maxCoeff();
  out.push_back({make_check("G_invariant", dg, 1e-10), seed});
  const double dj = std::abs(value_fn(m_hat, pi).scalar - value_fn(hat2, pi2).scalar);
  out.push_back({make_check("expected_value_invariant", dj, 1e-10), seed});
}

// Same dynamics with the embedding stretched tenfold: the norm bound moves.
void norm_not_invariant(std::uint64_t seed, std::vector<VerifyRow>& out) {
  Rng rng(seed);
  RandomMdpOptions opts;
  opts.n_states = 4;
  opts.deterministic = true;
  opts.embedding_dim = 2;
  const FiniteMdp m_star = random_mdp(opts, rng);
  const FiniteMdp m_hat = perturbed_deterministic_copy(m_star, 0.5, rng);
  const auto pi_ref = TabularPolicy::random(4, 2, rng);
  const auto pi = TabularPolicy::mixture(pi_ref, TabularPolicy::random(4, 2, rng), 0.05);
  std::vector<int> perm{3, 2, 1, 0};
  const StateBijection map{perm, std::nullopt};
  const StateBijection stretch{perm, transform_mdp(m_hat, map).embedding() * 10.0};
  const NormBounds a = discrepancy_norm(m_hat, m_star, pi, pi_ref, 0.1);
  const NormBounds b = discrepancy_norm(transform_mdp(m_hat, stretch), transform_mdp(m_star, stretch),
                                        transform_policy(pi, map), transform_policy(pi_ref, map), 0.1);
  // Passes when the bound differs by more than 1e-6.
  out.push_back({make_check("norm_bound_changes_under_stretch", 1e-6, std::abs(a.bound_prop - b.bound_prop)), seed});
}

void norm_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  const FiniteMdp m_star = random_small_mdp(rng, pick_gamma(rng), true);
  const FiniteMdp m_hat = perturbed_deterministic_copy(m_star, rng.uniform(0.1, 0.5), rng);
  const auto pi_ref = TabularPolicy::random(m_star.n_states(), m_star.n_actions(), rng);
  const double delta = rng.uniform(0.01, 0.3);
  const auto pi = policy_in_ball(pi_ref, m_star, PolicyDistance::kl, delta, rng);
  const NormBounds nb = discrepancy_norm(m_hat, m_star, pi, pi_ref, delta);
  const double gap = true_gap(m_hat, m_star, pi);
  out.push_back({make_check("norm_lemma", gap, nb.bound_lemma), seed});
  out.push_back({make_check("norm_prop", gap, nb.bound_prop), seed});
}

void meta_instance(Rng& rng, std::uint64_t seed, std::vector<VerifyRow>& out) {
  RandomMdpOptions opts;
  opts.n_states = 2 + static_cast<int>(rng.below(5));
  opts.n_actions = 2 + static_cast<int>(rng.below(2));
  opts.gamma = 0.9;
  const FiniteMdp m_star = random_mdp(opts, rng);
  const ModelFamily family = make_family(m_star, 8, rng);
  const auto pi_0 = TabularPolicy::random(opts.n_states, opts.n_actions, rng);
  for (BoundKind kind : {BoundKind::G, BoundKind::chi}) {
    const auto trace = run_meta(pi_0, family, m_star, 0.1, kind, 25);
    for (std::size_t k = 1; k < trace.size(); ++k)
      out.push_back({make_check("monotone_" + to_string(kind) + "_k" + std::to_string(k), trace[k - 1].true_value,
                                trace[k].true_value),
                     seed});
  }
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"divergence", "discrepancy", "telescoping",
                                              "invariance", "norm",        "meta"};
  return names;
}

std::vector<VerifyRow> run_suite(const std::string& name, const SuiteOptions& opts) {
  using Instance = void (*)(Rng&, std::uint64_t, std::vector<VerifyRow>&);
  Instance fn = nullptr;
  if (name == "divergence") fn = divergence_instance;
  if (name == "discrepancy") fn = discrepancy_instance;
  if (name == "telescoping") fn = telescoping_instance;
  if (name == "invariance") fn = invariance_instance;
  if (name == "norm") fn = norm_instance;
  if (name == "meta") fn = meta_instance;
  if (!fn) {
    std::string known;
    for (const auto& n : suite_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown suite '" + name + "' (expected one of " + known + ")");
  }
  if (opts.instances < 1) throw std::invalid_argument("suite needs at least one instance");
  std::vector<VerifyRow> out;
  for (int i = 0; i < opts.instances; ++i) {
    const std::uint64_t s = instance_seed(opts.seed, i);
    Rng rng(s);
    fn(rng, s, out);
  }
  if (name == "invariance") norm_not_invariant(instance_seed(opts.seed, opts.instances), out);
  return out;
}

std::vector<VerifyRow> violations(const std::vector<VerifyRow>& rows, double tol) {
  std::vector<VerifyRow> bad;
  for (const auto& r : rows)
    if (!r.check.holds(tol)) bad.push_back(r);
  return bad;
}

}  // namespace mbrl

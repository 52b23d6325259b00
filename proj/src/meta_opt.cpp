#include "mbrl/meta_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mbrl/generators.hpp"

namespace mbrl {

BoundKind parse_bound_kind(const std::string& name) {
  if (name == "G") return BoundKind::G;
  if (name == "chi") return BoundKind::chi;
  if (name == "norm") return BoundKind::norm;
  throw std::invalid_argument("unknown bound kind '" + name + "' (expected G, chi or norm)");
}

std::string to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::G:
      return "G";
    case BoundKind::chi:
      return "chi";
    case BoundKind::norm:
      return "norm";
  }
  return "?";
}

PolicyDistance distance_for(BoundKind kind) {
  return kind == BoundKind::chi ? PolicyDistance::chi : PolicyDistance::kl;
}

TabularPolicy exact_policy_opt(const FiniteMdp& mdp) {
  const int S = mdp.n_states(), A = mdp.n_actions();
  std::vector<int> actions(static_cast<std::size_t>(S), 0);
  for (int iter = 0; iter < 10 * S * A + 100; ++iter) {
    const Mat q = q_values(mdp, value_fn(mdp, TabularPolicy::deterministic(actions, A)).v);
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      auto& cur = actions[static_cast<std::size_t>(s)];
      int best = cur;
      for (int a = 0; a < A; ++a)
        if (q(s, a) > q(s, best) + 1e-12) best = a;
      if (best != cur) {
        cur = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Every greedy action is optimal at the fixed point; keep the lowest.
  const Mat q = q_values(mdp, value_fn(mdp, TabularPolicy::deterministic(actions, A)).v);
  for (int s = 0; s < S; ++s) {
    const double top = q.row(s).maxCoeff();
    const double tol = 1e-12 * std::max(1.0, std::abs(top));
    for (int a = 0; a < A; ++a) {
      if (q(s, a) >= top - tol) {
        actions[static_cast<std::size_t>(s)] = a;
        break;
      }
    }
  }
  return TabularPolicy::deterministic(actions, A);
}

double lower_bound(const TabularPolicy& pi, const FiniteMdp& model, const TabularPolicy& pi_ref,
                   const FiniteMdp& m_star, double delta, BoundKind kind) {
  const double v = value_fn(model, pi).scalar;
  switch (kind) {
    case BoundKind::G:
      return v - discrepancy_G(model, m_star, pi, pi_ref, delta);
    case BoundKind::chi:
      return v - discrepancy_chi(model, m_star, pi, pi_ref, delta);
    case BoundKind::norm:
      return v - discrepancy_norm(model, m_star, pi, pi_ref, delta).bound_prop;
  }
  throw std::invalid_argument("lower_bound: unknown kind");
}

namespace {

void check_family(const ModelFamily& family, const FiniteMdp& m_star) {
  if (family.candidates.empty()) throw std::invalid_argument("model family is empty");
  for (const auto& m : family.candidates)
    if (!m.shares_spaces_with(m_star))
      throw std::invalid_argument("family member does not share spaces, reward and initial distribution");
}

// Lower bounds against a fixed reference policy, with the reference
// visitation on M_star computed once.
class BoundEvaluator {
 public:
  BoundEvaluator(const TabularPolicy& pi_ref, const FiniteMdp& m_star, double delta, BoundKind kind)
      : pi_ref_(pi_ref),
        m_star_(m_star),
        delta_(delta),
        kind_(kind),
        rho_ref_(rho(m_star, pi_ref).weights),
        beta_ref_(beta(m_star, pi_ref).weights) {}

  double operator()(const TabularPolicy& pi, const FiniteMdp& model) const {
    if (kind_ == BoundKind::norm) return lower_bound(pi, model, pi_ref_, m_star_, delta_, kind_);
    const Vec v = value_fn(model, pi).v;
    const int S = model.n_states(), A = model.n_actions();
    Vec gs = Vec::Zero(S);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        gs[s] += pi(s, a) * (model.next_dist(s, a).dot(v) - m_star_.next_dist(s, a).dot(v));
    const double eps1 = rho_ref_.dot(gs.cwiseAbs());
    const double eps_max = gs.cwiseAbs().maxCoeff();
    const double value = model.init_dist().dot(v);
    const double g = m_star_.gamma();
    if (kind_ == BoundKind::G) {
      const double kappa = m_star_.kappa();
      return value - (kappa * eps1 + kappa * kappa * delta_ * eps_max);
    }
    const double h = 1.0 - g;
    const double eps2 = beta_ref_.dot(gs.cwiseAbs2());
    return value - (eps1 / h + delta_ * eps2 / (h * h) + std::pow(delta_, 1.5) * eps_max / std::pow(h, 2.5));
  }

 private:
  const TabularPolicy& pi_ref_;
  const FiniteMdp& m_star_;
  double delta_;
  BoundKind kind_;
  Vec rho_ref_;
  Vec beta_ref_;
};

constexpr int kStepFractions = 8;

}  // namespace

MetaStep meta_step(const TabularPolicy& pi_k, const ModelFamily& family, const FiniteMdp& m_star, double delta,
                   BoundKind kind) {
  check_family(family, m_star);
  if (delta < 0.0) throw std::invalid_argument("meta_step: delta must be >= 0");
  const BoundEvaluator bound(pi_k, m_star, delta, kind);
  const PolicyDistance dist_kind = distance_for(kind);
  const auto distance = [&](const TabularPolicy& pi) { return policy_distance(dist_kind, pi, pi_k, m_star); };
  const int F = static_cast<int>(family.candidates.size());

  // Incumbent: pi_k with the best-fitting model.
  MetaStep best{pi_k, 0, -std::numeric_limits<double>::infinity(), 0.0};
  double best_fit = std::numeric_limits<double>::infinity();
  std::vector<double> lb_at_k(static_cast<std::size_t>(F));
  for (int j = 0; j < F; ++j) {
    const auto& m = family.candidates[static_cast<std::size_t>(j)];
    const double lb = bound(pi_k, m);
    lb_at_k[static_cast<std::size_t>(j)] = lb;
    const double fit = value_fn(m, pi_k).scalar - lb;
    if (fit < best_fit) {
      best_fit = fit;
      best.model = j;
      best.lower_bound = lb;
    }
  }
  for (int j = 0; j < F; ++j) {
    if (lb_at_k[static_cast<std::size_t>(j)] > best.lower_bound + 1e-12) {
      best.model = j;
      best.lower_bound = lb_at_k[static_cast<std::size_t>(j)];
    }
  }

  for (int t = 0; t < F; ++t) {
    const TabularPolicy target = exact_policy_opt(family.candidates[static_cast<std::size_t>(t)]);
    const double alpha_max = feasible_mixture_weight(pi_k, target, delta, distance);
    if (alpha_max <= 0.0) continue;
    for (int i = 1; i <= kStepFractions; ++i) {
      const TabularPolicy pi = TabularPolicy::mixture(pi_k, target, alpha_max * i / kStepFractions);
      const double d = distance(pi);
      if (!(d <= delta)) continue;
      for (int j = 0; j < F; ++j) {
        const double lb = bound(pi, family.candidates[static_cast<std::size_t>(j)]);
        if (lb > best.lower_bound + 1e-12) best = {pi, j, lb, d};
      }
    }
  }
  return best;
}

std::vector<MetaIterate> run_meta(const TabularPolicy& pi_0, const ModelFamily& family, const FiniteMdp& m_star,
                                  double delta, BoundKind kind, int iterations) {
  check_family(family, m_star);
  if (iterations < 0) throw std::invalid_argument("run_meta: iterations must be >= 0");
  std::vector<MetaIterate> trace;
  trace.reserve(static_cast<std::size_t>(iterations) + 1);

  // Initial entry: pi_0 scored against its best model under its own reference.
  const BoundEvaluator bound0(pi_0, m_star, delta, kind);
  MetaIterate first{0, pi_0, 0, value_fn(m_star, pi_0).scalar, -std::numeric_limits<double>::infinity(), 0.0};
  for (int j = 0; j < static_cast<int>(family.candidates.size()); ++j) {
    const double lb = bound0(pi_0, family.candidates[static_cast<std::size_t>(j)]);
    if (lb > first.lower_bound + 1e-12) {
      first.lower_bound = lb;
      first.model = j;
    }
  }
  trace.push_back(first);

  for (int k = 1; k <= iterations; ++k) {
    const MetaStep step = meta_step(trace.back().policy, family, m_star, delta, kind);
    trace.push_back({k, step.policy, step.model, value_fn(m_star, step.policy).scalar, step.lower_bound,
                     step.distance});
  }
  return trace;
}

double local_improvement_gap(const TabularPolicy& pi, const ModelFamily& family, const FiniteMdp& m_star,
                             double delta, BoundKind kind, int grid) {
  check_family(family, m_star);
  if (grid < 1) throw std::invalid_argument("local_improvement_gap: grid must be >= 1");
  const PolicyDistance dist_kind = distance_for(kind);
  const auto distance = [&](const TabularPolicy& p) { return policy_distance(dist_kind, p, pi, m_star); };
  const double base = value_fn(m_star, pi).scalar;
  double gap = 0.0;
  for (const auto& m : family.candidates) {
    const TabularPolicy target = exact_policy_opt(m);
    const double alpha_max = feasible_mixture_weight(pi, target, delta, distance);
    for (int i = 1; i <= grid; ++i) {
      const TabularPolicy cand = TabularPolicy::mixture(pi, target, alpha_max * i / grid);
      if (!(distance(cand) <= delta)) continue;
      gap = std::max(gap, value_fn(m_star, cand).scalar - base);
    }
  }
  return gap;
}

ModelFamily make_family(const FiniteMdp& m_star, int size, Rng& rng) {
  if (size < 1) throw std::invalid_argument("make_family: size must be >= 1");
  ModelFamily family;
  family.contains_truth = true;
  family.candidates.push_back(m_star);
  for (int i = 1; i < size; ++i) {
    if (m_star.deterministic())
      family.candidates.push_back(perturbed_deterministic_copy(m_star, rng.uniform(0.1, 0.4), rng));
    else
      family.candidates.push_back(perturbed_copy(m_star, rng.uniform(0.05, 0.5), rng));
  }
  return family;
}

namespace {

// Per-state payoff f(s) whose rho^{pi_ref} average is D.
Vec payoff_by_state(const FiniteMdp& m_hat, const FiniteMdp& m_star, const TabularPolicy& pi, double delta,
                    BoundKind kind) {
  const double kappa = m_star.kappa();
  if (kind == BoundKind::G) {
    const Vec gs = g_state(m_hat, m_star, pi).cwiseAbs();
    return (kappa * gs).array() + kappa * kappa * delta * gs.maxCoeff();
  }
  if (kind == BoundKind::norm) {
    if (!m_hat.deterministic() || !m_star.deterministic() || !m_hat.has_embedding())
      throw std::invalid_argument("norm payoff needs deterministic embedded models");
    const Mat& e = m_hat.embedding();
    Vec err = Vec::Zero(m_hat.n_states());
    for (int s = 0; s < m_hat.n_states(); ++s)
      for (int a = 0; a < m_hat.n_actions(); ++a)
        err[s] += pi(s, a) * (e.row(m_hat.successor(s, a)) - e.row(m_star.successor(s, a))).norm();
    const double L = lipschitz_estimate(m_hat, pi);
    const double B = e.rowwise().norm().maxCoeff();
    Vec f(m_hat.n_states());
    for (int s = 0; s < m_hat.n_states(); ++s) f[s] = err[s] == 0.0 ? 0.0 : kappa * L * err[s];
    return f.array() + 2.0 * kappa * kappa * delta * B;
  }
  throw std::invalid_argument("sampled discrepancy supports the G and norm kinds only");
}

EmpiricalEstimate average_over_states(const Vec& f, const std::vector<int>& states) {
  EmpiricalEstimate out;
  out.n = states.size();
  double sum = 0.0, sum_sq = 0.0;
  for (int s : states) {
    sum += f[s];
    sum_sq += f[s] * f[s];
  }
  const double n = static_cast<double>(states.size());
  out.value = sum / n;
  const double var = states.size() > 1 ? std::max(0.0, (sum_sq - n * out.value * out.value) / (n - 1.0)) : 0.0;
  out.std_error = std::sqrt(var / n);
  return out;
}

}  // namespace

EmpiricalEstimate empirical_discrepancy(const TrajectoryBatch& batch, const FiniteMdp& m_hat,
                                        const FiniteMdp& m_star, const TabularPolicy& pi,
                                        const TabularPolicy& pi_ref, double delta, BoundKind kind,
                                        std::uint64_t seed) {
  if (batch.episodes.empty()) throw std::invalid_argument("empirical_discrepancy: empty batch");
  if (!m_hat.shares_spaces_with(m_star)) throw std::invalid_argument("empirical_discrepancy: incompatible models");
  if (pi_ref.n_states() != m_star.n_states()) throw std::invalid_argument("empirical_discrepancy: pi_ref shape");
  const Vec f = payoff_by_state(m_hat, m_star, pi, delta, kind);
  return average_over_states(f, geometric_stop_states(batch, m_star.gamma(), seed));
}

SampleComplexityProblem default_sample_complexity_problem(std::uint64_t seed, int grid_size) {
  Rng rng(seed);
  RandomMdpOptions opts;
  opts.n_states = 5;
  opts.n_actions = 2;
  opts.gamma = 0.8;
  Rng mdp_rng = rng.derive(0);
  FiniteMdp m_star = random_mdp(opts, mdp_rng);
  Rng ref_rng = rng.derive(1);
  TabularPolicy pi_ref = TabularPolicy::random(opts.n_states, opts.n_actions, ref_rng);
  SampleComplexityProblem problem{m_star, pi_ref, {}, 0.1, BoundKind::G};
  for (int i = 0; i < grid_size; ++i) {
    Rng r = rng.derive(100 + static_cast<std::uint64_t>(i));
    FiniteMdp m_hat = perturbed_copy(m_star, r.uniform(0.1, 0.6), r);
    TabularPolicy pi = TabularPolicy::mixture(pi_ref, TabularPolicy::random(opts.n_states, opts.n_actions, r), 0.2);
    problem.grid.emplace_back(std::move(pi), std::move(m_hat));
  }
  return problem;
}

SampleComplexityResult sample_complexity_experiment(const SampleComplexityConfig& cfg,
                                                    const SampleComplexityProblem& problem) {
  if (cfg.n_grid.size() < 3) throw std::invalid_argument("sample_complexity_experiment: need >= 3 grid points");
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] < 2 || (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]))
      throw std::invalid_argument("sample_complexity_experiment: n_grid must be strictly increasing and >= 2");
  }
  if (cfg.seeds < 1 || cfg.horizon < 1) throw std::invalid_argument("sample_complexity_experiment: bad seeds/horizon");
  if (problem.grid.empty()) throw std::invalid_argument("sample_complexity_experiment: empty evaluation grid");

  const FiniteMdp& m_star = problem.m_star;
  std::vector<Vec> payoffs;
  std::vector<double> exact;
  double sup_f = 0.0;
  const Vec rho_ref = rho(m_star, problem.pi_ref).weights;
  for (const auto& [pi, m_hat] : problem.grid) {
    payoffs.push_back(payoff_by_state(m_hat, m_star, pi, problem.delta, problem.kind));
    exact.push_back(rho_ref.dot(payoffs.back()));
    sup_f = std::max(sup_f, payoffs.back().maxCoeff());
  }

  SampleComplexityResult result;
  result.B_f = cfg.B_f > 0.0 ? cfg.B_f : sup_f;
  const Rng root(cfg.seed);
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const int n = cfg.n_grid[ni];
    SampleComplexityRow row;
    row.n = n;
    row.hoeffding_bound = 4.0 * std::sqrt(result.B_f * std::log(static_cast<double>(n)) / n);
    int within = 0;
    for (int k = 0; k < cfg.seeds; ++k) {
      const Rng rng = root.derive(ni).derive(static_cast<std::uint64_t>(k));
      const TrajectoryBatch batch = sample_trajectories(m_star, problem.pi_ref, n, cfg.horizon, rng.derive(0)());
      const std::vector<int> states = geometric_stop_states(batch, m_star.gamma(), rng.derive(1)());
      double sup_err = 0.0;
      for (std::size_t g = 0; g < payoffs.size(); ++g)
        sup_err = std::max(sup_err, std::abs(average_over_states(payoffs[g], states).value - exact[g]));
      row.mean_sup_error += sup_err / cfg.seeds;
      row.max_sup_error = std::max(row.max_sup_error, sup_err);
      if (sup_err <= row.hoeffding_bound) ++within;
    }
    row.frac_within = static_cast<double>(within) / cfg.seeds;
    result.rows.push_back(row);
  }

  // Least squares on (log n, log error); all-zero errors give slope 0.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (const auto& row : result.rows) {
    if (row.mean_sup_error <= 0.0) continue;
    const double x = std::log(static_cast<double>(row.n)), y = std::log(row.mean_sup_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  result.slope = m >= 2 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
  return result;
}

}  // namespace mbrl

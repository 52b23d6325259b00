// Acceptance suite: one PASS/FAIL line per criterion with its runtime.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbrl/config.hpp"
#include "mbrl/generators.hpp"
#include "mbrl/meta_opt.hpp"
#include "mbrl/nn.hpp"
#include "mbrl/slbo.hpp"
#include "mbrl/verify.hpp"
#include "oracles.hpp"

using namespace mbrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Context {
  fs::path out;
  std::string desk_config;
  double max_kl_seen = 0.0;
  int training_runs = 0;
  long accepted_updates = 0;
  double kl_limit = 0.01;
};

void note_run(Context& ctx, double max_kl, long accepted) {
  ctx.max_kl_seen = std::max(ctx.max_kl_seen, max_kl);
  ++ctx.training_runs;
  ctx.accepted_updates += accepted;
}

// Counts rows by label and the worst margin among them.
struct Tally {
  long rows = 0;
  long bad = 0;
  double worst = 1e300;
};

Tally tally(const std::vector<VerifyRow>& rows, const std::function<bool(const VerifyRow&)>& ok,
            const std::function<bool(const std::string&)>& select = [](const std::string&) { return true; }) {
  Tally t;
  for (const auto& r : rows) {
    if (!select(r.check.label)) continue;
    ++t.rows;
    if (!ok(r)) ++t.bad;
    t.worst = std::min(t.worst, r.check.margin);
  }
  return t;
}

std::uint64_t instance_seed_for_acceptance(int i) { return 77000 + static_cast<std::uint64_t>(i); }

Outcome monotonicity(Context&) {
  int steps = 0, bad = 0;
  double worst = 1e300;
  for (int inst = 0; inst < 10; ++inst) {
    Rng rng(instance_seed_for_acceptance(inst));
    RandomMdpOptions opts;
    opts.n_states = 2 + static_cast<int>(rng.below(5));
    opts.n_actions = 2 + static_cast<int>(rng.below(2));
    opts.gamma = 0.9;
    const FiniteMdp m_star = random_mdp(opts, rng);
    const ModelFamily family = make_family(m_star, 8, rng);
    const auto pi_0 = TabularPolicy::random(opts.n_states, opts.n_actions, rng);
    for (BoundKind kind : {BoundKind::G, BoundKind::chi}) {
      const auto trace = run_meta(pi_0, family, m_star, 0.1, kind, 25);
      // True values recomputed by Bellman iteration, independent of the library's linear solves.
      double prev = oracle::value(m_star, trace[0].policy).dot(m_star.init_dist());
      for (std::size_t k = 1; k < trace.size(); ++k) {
        const double v = oracle::value(m_star, trace[k].policy).dot(m_star.init_dist());
        ++steps;
        worst = std::min(worst, v - prev);
        if (v < prev - 1e-9) ++bad;
        prev = v;
      }
    }
  }
  return {bad == 0, std::to_string(steps) + " steps over 10 MDPs x {G, chi}, " + std::to_string(bad) +
                        " decreases, smallest step " + fmt("%.3g", worst)};
}

Outcome soundness(Context&) {
  SuiteOptions opts;
  opts.instances = 1000;
  const auto rows = run_suite("discrepancy", opts);
  const auto sound = [](const VerifyRow& r) { return r.check.margin >= -1e-9; };
  const auto exact_zero = [](const VerifyRow& r) { return r.check.lhs <= 1e-12; };
  const Tally g = tally(rows, sound, [](const std::string& l) { return l == "G_sound"; });
  const Tally chi = tally(rows, sound, [](const std::string& l) { return l == "chi_sound"; });
  const Tally zero = tally(rows, exact_zero, [](const std::string& l) { return l.find("zero_at_truth") != std::string::npos; });
  const bool pass = g.rows >= 1000 && chi.rows >= 1000 && g.bad + chi.bad + zero.bad == 0;
  return {pass, "D^G " + std::to_string(g.rows) + " tuples / " + std::to_string(g.bad) + " violations, D^chi " +
                    std::to_string(chi.rows) + " / " + std::to_string(chi.bad) + ", zero-at-truth " +
                    std::to_string(zero.rows) + " / " + std::to_string(zero.bad)};
}

Outcome telescoping(Context&) {
  SuiteOptions opts;
  opts.instances = 1000;
  const auto rows = run_suite("telescoping", opts);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.check.lhs);
  return {rows.size() >= 1000 && worst <= 1e-8,
          std::to_string(rows.size()) + " instances, max |lhs - rhs| = " + fmt("%.3g", worst)};
}

Outcome divergence_suite(Context&) {
  SuiteOptions opts;
  opts.instances = 1000;
  const auto rows = run_suite("divergence", opts);
  const Tally all = tally(rows, [](const VerifyRow& r) { return r.check.margin >= -1e-9; });
  double resolvent = 0.0;
  for (const auto& r : rows)
    if (r.check.label == "resolvent_identity") resolvent = std::max(resolvent, r.check.lhs);
  return {all.bad == 0 && resolvent <= 1e-10,
          std::to_string(all.rows) + " checks over 1000 instances, " + std::to_string(all.bad) +
              " violations, resolvent residual " + fmt("%.3g", resolvent)};
}

Outcome invariance(Context&) {
  SuiteOptions opts;
  opts.instances = 100;
  const auto rows = run_suite("invariance", opts);
  double worst = 0.0;
  bool witness = false;
  long n = 0;
  for (const auto& r : rows) {
    if (r.check.label == "norm_bound_changes_under_stretch") {
      witness = r.check.margin > 0.0;
      continue;
    }
    worst = std::max(worst, r.check.lhs);
    ++n;
  }
  return {worst <= 1e-10 && witness, std::to_string(n) + " invariance checks, max deviation " + fmt("%.3g", worst) +
                                          (witness ? ", norm bound moves under stretch" : ", NO stretch witness")};
}

Outcome norm_bounds(Context&) {
  SuiteOptions opts;
  opts.instances = 500;
  const auto rows = run_suite("norm", opts);
  const auto ok = [](const VerifyRow& r) { return r.check.margin >= -1e-9; };
  const Tally lemma = tally(rows, ok, [](const std::string& l) { return l == "norm_lemma"; });
  const Tally prop = tally(rows, ok, [](const std::string& l) { return l == "norm_prop"; });
  return {lemma.rows >= 500 && lemma.bad + prop.bad == 0,
          "lemma " + std::to_string(lemma.rows) + " tuples / " + std::to_string(lemma.bad) + " violations, prop " +
              std::to_string(prop.rows) + " / " + std::to_string(prop.bad)};
}

Outcome sample_complexity(Context&) {
  SampleComplexityConfig cfg;
  const auto problem = default_sample_complexity_problem(0);
  const auto r = sample_complexity_experiment(cfg, problem);
  bool within = true;
  std::string per_n;
  for (const auto& row : r.rows) {
    within = within && row.frac_within >= 0.95;
    per_n += " n=" + std::to_string(row.n) + ":" + fmt("%.2f", row.frac_within);
  }
  const bool slope_ok = r.slope >= -0.65 && r.slope <= -0.35;
  return {slope_ok && within, "slope " + fmt("%.3f", r.slope) + ", fraction within bound" + per_n};
}

// Smallest |relu pre-activation| met along the model's own rollout of a window.
double rollout_kink_distance(const ModelNet& m, const WindowBatch& w) {
  double closest = 1e300;
  Mat s = w.states[0];
  for (const Mat& act : w.actions) {
    closest = std::min(closest, m.net.min_abs_relu_preactivation(m.input(s, act)));
    s = m.predict(s, act);
  }
  return closest;
}

Outcome gradients(Context&) {
  Rng rng(2024);
  double worst_tanh = 0.0, worst_relu = 0.0, worst_loss = 0.0;
  int relu_done = 0, relu_skipped = 0;
  for (int k = 0; k < 100; ++k) {
    const int depth = 1 + static_cast<int>(rng.below(3));
    std::vector<int> sizes{1 + static_cast<int>(rng.below(5))};
    for (int l = 0; l < depth; ++l) sizes.push_back(2 + static_cast<int>(rng.below(32)));
    sizes.push_back(1 + static_cast<int>(rng.below(4)));
    const auto make_acts = [&](Activation hidden) {
      std::vector<Activation> a(sizes.size() - 1, hidden);
      a.back() = Activation::identity;
      return a;
    };
    const Mat x = Mat::NullaryExpr(sizes.front(), 1 + static_cast<int>(rng.below(4)), [&] { return rng.normal(); });
    worst_tanh = std::max(worst_tanh, grad_check(DenseNet(sizes, make_acts(Activation::tanh), rng), x));
    // Resample relu inputs until no pre-activation sits near a kink.
    const DenseNet relu(sizes, make_acts(Activation::relu), rng);
    Mat xr = x;
    while (relu.min_abs_relu_preactivation(xr) <= 1e-3) {
      ++relu_skipped;
      xr = Mat::NullaryExpr(sizes.front(), x.cols(), [&] { return rng.normal(); });
    }
    worst_relu = std::max(worst_relu, grad_check(relu, xr));
    ++relu_done;
  }
  for (int k = 0; k < 20; ++k) {
    const int H = 1 + static_cast<int>(rng.below(4));
    const int d = 2, a = 2, B = 3;
    ModelNet m(d, a, {8, 8}, rng);
    m.state_stats = update_stats(NormStats(d), Mat::NullaryExpr(d, 30, [&] { return rng.normal(); }));
    m.diff_stats = update_stats(NormStats(d), Mat::NullaryExpr(d, 30, [&] { return 0.3 * rng.normal(); }));
    WindowBatch w;
    do {
      w = WindowBatch{};
      for (int i = 0; i <= H; ++i) w.states.push_back(Mat::NullaryExpr(d, B, [&] { return rng.normal(); }));
      for (int i = 0; i < H; ++i) w.actions.push_back(Mat::NullaryExpr(a, B, [&] { return rng.normal(); }));
    } while (rollout_kink_distance(m, w) <= 1e-3);
    const ModelLoss kind = k % 2 ? ModelLoss::mse : ModelLoss::l2;
    const Vec g = multi_step_loss(m, w, kind).grad;
    const Vec p = m.net.params();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      ModelNet up = m, down = m;
      Vec q = p;
      q[i] += 1e-6;
      up.net.set_params(q);
      q[i] -= 2e-6;
      down.net.set_params(q);
      const double fd = (multi_step_loss(up, w, kind).loss - multi_step_loss(down, w, kind).loss) / 2e-6;
      worst_loss = std::max(worst_loss, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
    }
  }
  return {worst_tanh <= 1e-4 && worst_relu <= 1e-4 && worst_loss <= 1e-4,
          "max rel. error tanh " + fmt("%.2g", worst_tanh) + ", relu " + fmt("%.2g", worst_relu) + " (" +
              std::to_string(relu_done) + " nets, " + std::to_string(relu_skipped) +
              " kink inputs resampled), multi-step loss " + fmt("%.2g", worst_loss) + " (20 rollouts)"};
}

// Exact expected cost of the zero policy on a linear system.
double zero_policy_return(const LqrSystem& sys) {
  Vec m = sys.init_mean;
  Mat cov = sys.init_std * sys.init_std * Mat::Identity(m.size(), m.size());
  double cost = 0.0;
  for (int t = 0; t < sys.horizon; ++t) {
    cost += m.dot(sys.Q * m) + (sys.Q * cov).trace();
    m = sys.A * m;
    cov = sys.A * cov * sys.A.transpose() + sys.noise_std * sys.noise_std * Mat::Identity(m.size(), m.size());
  }
  return -cost;
}

Outcome lqr_benchmark(Context& ctx) {
  const SlboConfig cfg = load_slbo_config(ctx.desk_config);
  const ContinuousEnv env = make_env("lqr2");
  const double opt = *env.known_optimum;
  const double zero = zero_policy_return(lqr_system(2, 0));
  const long budget = static_cast<long>(cfg.n_outer) * cfg.n_collect;
  std::vector<double> finals;
  bool counters_ok = budget <= 20000;
  std::string per_seed;
  std::ofstream csv(ctx.out / "lqr2_final_returns.csv");
  csv << "seed,final_return,real_samples,virtual_samples,eval_samples,max_accepted_kl\n";
  for (std::uint64_t s = 0; s < 5; ++s) {
    SlboConfig run = cfg;
    run.seed = s;
    const TrainingResult r = slbo_train(env, run);
    note_run(ctx, r.max_accepted_kl, r.accepted_updates);
    const double f = r.trace.back().eval_return_mean;
    finals.push_back(f);
    counters_ok = counters_ok && r.real_samples == budget && r.virtual_samples > 0;
    per_seed += (per_seed.empty() ? "" : " ") + fmt("%.3f", f);
    csv << s << "," << fmt("%.17g", f) << "," << r.real_samples << "," << r.virtual_samples << "," << r.eval_samples
        << "," << fmt("%.17g", r.max_accepted_kl) << "\n";
    std::cerr << "  lqr2 seed " << s << ": final return " << f << "\n";
  }
  std::sort(finals.begin(), finals.end());
  const double median = finals[2];
  const double cost_ratio = opt / median;
  const double normalized = (median - zero) / (opt - zero);
  return {cost_ratio >= 0.9 && counters_ok,
          "median " + fmt("%.3f", median) + " vs optimum " + fmt("%.3f", opt) + ", cost ratio " +
              fmt("%.3f", cost_ratio) + " (need >= 0.9), normalized score vs zero policy " + fmt("%.4f", normalized) +
              ", seeds [" + per_seed + "], real samples " + std::to_string(budget) + " per run" +
              (counters_ok ? "" : ", COUNTER MISMATCH")};
}

Outcome ablations(Context& ctx) {
  const SlboConfig cfg = load_slbo_config(ctx.desk_config);
  const ContinuousEnv env = make_env("lqr2");
  std::ostringstream rows, cells;
  rows << "axis,value,seed,final_return,real_samples,max_accepted_kl\n";
  cells << "axis,value,mean,std,n\n";
  bool complete = true;
  std::vector<AblationCell> all;
  for (AblationAxis axis : {AblationAxis::horizon, AblationAxis::entropy, AblationAxis::loss}) {
    const AblationResult r = ablate(env, cfg, axis, 3);
    for (const auto& row : r.rows) {
      note_run(ctx, row.max_accepted_kl, 0);
      rows << row.axis << "," << row.value << "," << row.seed << "," << fmt("%.17g", row.final_return) << ","
           << row.real_samples << "," << fmt("%.17g", row.max_accepted_kl) << "\n";
    }
    for (const auto& c : r.cells) {
      complete = complete && c.n == 3 && std::isfinite(c.mean);
      cells << c.axis << "," << c.value << "," << fmt("%.17g", c.mean) << "," << fmt("%.17g", c.std) << "," << c.n
            << "\n";
      std::cerr << "  " << c.axis << "=" << c.value << ": " << c.mean << " +- " << c.std << "\n";
      all.push_back(c);
    }
  }
  std::ofstream(ctx.out / "ablation_rows.csv") << rows.str();
  std::ofstream(ctx.out / "ablation_cells.csv") << cells.str();
  const auto mean_of = [&](const std::string& axis, const std::string& value) {
    for (const auto& c : all)
      if (c.axis == axis && c.value == value) return c.mean;
    return std::nan("");
  };
  double best_bonus = -1e300;
  for (const char* v : {"0.001", "0.003", "0.005"}) best_bonus = std::max(best_bonus, mean_of("lambda_entropy", v));
  const bool mse_worse = mean_of("loss_kind", "mse") < mean_of("loss_kind", "l2");
  const bool entropy_helps = best_bonus > mean_of("lambda_entropy", "0");
  return {complete, std::to_string(all.size()) + " cells x 3 seeds written; recorded: mse worse than l2: " +
                        (mse_worse ? "yes" : "no") + " (" + fmt("%.3f", mean_of("loss_kind", "mse")) + " vs " +
                        fmt("%.3f", mean_of("loss_kind", "l2")) + "), entropy bonus helps: " +
                        (entropy_helps ? "yes" : "no") + " (best bonus " + fmt("%.3f", best_bonus) + " vs none " +
                        fmt("%.3f", mean_of("lambda_entropy", "0")) + ")"};
}

Outcome trust_region(Context& ctx) {
  // Dedicated short runs on both environments and both schedules.
  SlboConfig cfg = load_slbo_config(ctx.desk_config);
  cfg.n_outer = 1;
  cfg.n_collect = 1000;
  cfg.eval_episodes = 2;
  for (const char* name : {"lqr2", "pendulum"}) {
    const ContinuousEnv env = make_env(name);
    const TrainingResult s = slbo_train(env, cfg);
    note_run(ctx, s.max_accepted_kl, s.accepted_updates);
    const TrainingResult m = mbtrpo_train(env, cfg);
    note_run(ctx, m.max_accepted_kl, m.accepted_updates);
  }
  return {ctx.max_kl_seen <= ctx.kl_limit + 1e-6,
          "max accepted KL " + fmt("%.6f", ctx.max_kl_seen) + " over " + std::to_string(ctx.training_runs) +
              " training runs (limit " + fmt("%.2f", ctx.kl_limit) + " + 1e-6)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the lower-bound model-based RL library", "acceptance"};
  std::vector<int> only;
  std::string out = "acceptance_out";
  std::string desk = MBRL_DESK_CONFIG;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  app.add_option("--out", out, "Directory for result tables")->capture_default_str();
  app.add_option("--config", desk, "Training config for the lqr2 runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.out = out;
  ctx.desk_config = desk;
  fs::create_directories(ctx.out);

  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)(Context&);
    double limit_s;  // 0: no runtime limit
  };
  // The trust-region line comes last so it covers every training run above it.
  const std::vector<Criterion> criteria{
      {1, "lower-bound iteration is monotone", monotonicity, 30},
      {2, "discrepancy bounds are sound", soundness, 60},
      {3, "telescoping identity", telescoping, 30},
      {4, "divergence inequality suite", divergence_suite, 120},
      {5, "relabelling invariance", invariance, 0},
      {6, "norm-based bounds are sound", norm_bounds, 0},
      {7, "empirical bound sample complexity", sample_complexity, 0},
      {8, "gradient correctness", gradients, 0},
      {10, "SLBO reaches the lqr2 optimum", lqr_benchmark, 900},
      {11, "ablations run end-to-end", ablations, 0},
      {9, "TRPO respects the trust region", trust_region, 0},
  };
  const auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!wanted(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.limit_s) + " s limit";
    }
    if (!o.pass) ++failed;
    std::printf("%s  [%2d] %-36s %8.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

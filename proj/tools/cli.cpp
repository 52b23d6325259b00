#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "mbrl/config.hpp"
#include "mbrl/generators.hpp"
#include "mbrl/meta_opt.hpp"
#include "mbrl/slbo.hpp"
#include "mbrl/verify.hpp"

namespace mbrl::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Written beside the target and renamed into place.
void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
  std::cout << "wrote " << path.string() << "\n";
}

struct Csv {
  std::ostringstream text;
  explicit Csv(const char* header) { text << header << "\n"; }
  template <class... T>
  void row(const T&... cells) {
    std::size_t i = 0;
    ((text << (i++ ? "," : "") << cells), ...);
    text << "\n";
  }
};

struct Common {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool with_config) {
  if (with_config) sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Output directory")->envname("SLBO_LAB_OUT")->capture_default_str();
  sub->add_option("--seed", c.seed, "Root seed");
}

// One string flag per config field except seed, applied after the config file.
using Overrides = std::map<std::string, std::string>;

void add_field_flags(CLI::App* sub, const std::vector<std::string>& fields, Overrides& values,
                     std::map<std::string, CLI::Option*>& opts) {
  for (const auto& f : fields) {
    if (f == "seed") continue;
    opts[f] = sub->add_option("--" + kebab(f), values[f], "Override config field " + f);
  }
}

template <class Cfg>
void apply_overrides(Cfg& cfg, const Overrides& values, const std::map<std::string, CLI::Option*>& opts) {
  for (const auto& [f, opt] : opts)
    if (opt->count() > 0) set_field(cfg, f, values.at(f));
}

fs::path prepare_out(const Common& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& sub, const Json& config, std::uint64_t seed,
                    const std::string& started, const Json& summary) {
  RunManifest m;
  m.subcommand = sub;
  m.config = config;
  m.seed = seed;
  m.version = code_version();
  m.started = started;
  m.finished = utc_timestamp();
  m.summary = summary;
  write_file(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

void list_failures(const std::vector<BoundCheck>& failed, const std::vector<std::uint64_t>& seeds) {
  std::cerr << failed.size() << " assertion(s) failed:\n";
  std::cerr << kVerifyHeader << "\n";
  for (std::size_t i = 0; i < failed.size(); ++i) {
    const auto& c = failed[i];
    std::cerr << c.label << "," << seeds[i] << "," << num(c.lhs) << "," << num(c.rhs) << "," << num(c.margin)
              << ",0\n";
  }
}

int do_verify(const Common& c, const std::string& suite, int instances, double tol) {
  const std::string started = utc_timestamp();
  SuiteOptions opts;
  opts.seed = c.seed.value_or(0);
  opts.instances = instances;
  opts.tol = tol;
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = suite_names();
  } else {
    suites.push_back(suite);
  }
  // Resolve names before any work so a typo is a usage error.
  for (const auto& s : suites)
    if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
      run_suite(s, opts);

  const fs::path dir = prepare_out(c);
  std::vector<BoundCheck> failed;
  std::vector<std::uint64_t> failed_seeds;
  Json per_suite = Json::object();
  for (const auto& s : suites) {
    const auto rows = run_suite(s, opts);
    Csv csv(kVerifyHeader);
    for (const auto& r : rows)
      csv.row(r.check.label, r.seed, num(r.check.lhs), num(r.check.rhs), num(r.check.margin),
              r.check.holds(tol) ? 1 : 0);
    write_file(dir / ("verify_" + s + ".csv"), csv.text.str());
    const auto bad = violations(rows, tol);
    for (const auto& b : bad) {
      failed.push_back(b.check);
      failed_seeds.push_back(b.seed);
    }
    per_suite[s] = {{"checks", rows.size()}, {"violations", bad.size()}};
    std::cout << s << ": " << rows.size() << " checks, " << bad.size() << " violations\n";
  }
  const Json config{{"suite", suite}, {"instances", instances}, {"tol", tol}};
  write_manifest(dir, "verify", config, opts.seed, started,
                 {{"pass", failed.empty()}, {"suites", per_suite}});
  if (!failed.empty()) {
    list_failures(failed, failed_seeds);
    return kAssertionFailed;
  }
  return kOk;
}

int do_meta(const Common& c, MetaConfig cfg) {
  const std::string started = utc_timestamp();
  if (c.seed) cfg.seed = *c.seed;
  validate(cfg);
  Rng root(cfg.seed);
  Rng rng = root.derive(1);
  RandomMdpOptions opts;
  opts.n_states = cfg.states;
  opts.n_actions = cfg.actions;
  opts.gamma = cfg.gamma;
  if (cfg.bound == BoundKind::norm) {
    opts.deterministic = true;
    opts.embedding_dim = 2;
  }
  const FiniteMdp m_star = random_mdp(opts, rng);
  const ModelFamily family = make_family(m_star, cfg.family_size, rng);
  const auto pi_0 = TabularPolicy::random(cfg.states, cfg.actions, rng);
  const auto trace = run_meta(pi_0, family, m_star, cfg.delta, cfg.bound, cfg.iters);

  const fs::path dir = prepare_out(c);
  Csv csv(kMetaHeader);
  std::vector<BoundCheck> failed;
  std::vector<std::uint64_t> failed_seeds;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& it = trace[k];
    csv.row(it.k, num(it.true_value), num(it.lower_bound), it.model, num(it.d_to_prev));
    if (k == 0) continue;
    const auto check = make_check("monotone_k" + std::to_string(k), trace[k - 1].true_value, it.true_value);
    if (!check.holds(1e-9)) {
      failed.push_back(check);
      failed_seeds.push_back(cfg.seed);
    }
  }
  write_file(dir / "meta_trace.csv", csv.text.str());
  const double v0 = trace.front().true_value, vT = trace.back().true_value;
  std::cout << "V_true " << num(v0) << " -> " << num(vT) << " over " << cfg.iters << " iterations\n";
  write_manifest(dir, "meta", to_json(cfg), cfg.seed, started,
                 {{"pass", failed.empty()}, {"initial_value", v0}, {"final_value", vT}});
  if (!failed.empty()) {
    list_failures(failed, failed_seeds);
    return kAssertionFailed;
  }
  return kOk;
}

SlboConfig resolve_slbo(const Common& c, const Overrides& values, const std::map<std::string, CLI::Option*>& opts) {
  SlboConfig cfg = c.config.empty() ? SlboConfig{} : load_slbo_config(c.config);
  apply_overrides(cfg, values, opts);
  if (c.seed) cfg.seed = *c.seed;
  validate(cfg);
  return cfg;
}

int do_slbo(const Common& c, SlboConfig cfg, const std::string& env_name, int seeds, const std::string& algo) {
  const std::string started = utc_timestamp();
  if (seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  if (algo != "slbo" && algo != "mbtrpo") throw std::invalid_argument("--algo must be slbo or mbtrpo");
  const ContinuousEnv env = make_env(env_name);
  const fs::path dir = prepare_out(c);

  std::vector<BoundCheck> failed;
  std::vector<std::uint64_t> failed_seeds;
  std::vector<double> finals;
  Json runs = Json::array();
  const long budget = static_cast<long>(cfg.n_outer) * cfg.n_collect;
  for (int k = 0; k < seeds; ++k) {
    SlboConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(k);
    const TrainingResult r = algo == "slbo" ? slbo_train(env, run_cfg) : mbtrpo_train(env, run_cfg);
    Csv csv(kTraceHeader);
    for (const auto& t : r.trace)
      csv.row(t.outer_iter, t.real_samples, num(t.eval_return_mean), num(t.eval_return_std), num(t.model_loss),
              num(t.policy_kl), num(t.entropy));
    write_file(dir / ("trace_seed" + std::to_string(run_cfg.seed) + ".csv"), csv.text.str());

    const auto kl = make_check("max_accepted_kl", r.max_accepted_kl, cfg.max_kl + 1e-6);
    const auto real = make_check("real_samples", static_cast<double>(r.real_samples), static_cast<double>(budget));
    for (const auto& chk : {kl, real})
      if (!chk.holds(0.0)) {
        failed.push_back(chk);
        failed_seeds.push_back(run_cfg.seed);
      }
    const double final_return = r.trace.empty() ? 0.0 : r.trace.back().eval_return_mean;
    finals.push_back(final_return);
    runs.push_back({{"seed", run_cfg.seed},
                    {"final_return", final_return},
                    {"real_samples", r.real_samples},
                    {"virtual_samples", r.virtual_samples},
                    {"eval_samples", r.eval_samples},
                    {"accepted_updates", r.accepted_updates},
                    {"skipped_updates", r.skipped_updates},
                    {"max_accepted_kl", r.max_accepted_kl}});
    std::cout << "seed " << run_cfg.seed << ": final return " << num(final_return) << ", real samples "
              << r.real_samples << "\n";
  }
  std::vector<double> sorted = finals;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  Json summary{{"pass", failed.empty()}, {"env", env_name}, {"algo", algo}, {"runs", runs},
               {"median_final_return", median}};
  if (env.known_optimum) {
    summary["known_optimum"] = *env.known_optimum;
    std::cout << "median final return " << num(median) << ", known optimum " << num(*env.known_optimum) << "\n";
  }
  Json config = to_json(cfg);
  config["env"] = env_name;
  config["seeds"] = seeds;
  config["algo"] = algo;
  write_manifest(dir, "slbo", config, cfg.seed, started, summary);
  if (!failed.empty()) {
    list_failures(failed, failed_seeds);
    return kAssertionFailed;
  }
  return kOk;
}

int do_ablate(const Common& c, const SlboConfig& cfg, const std::string& env_name, int seeds,
              const std::string& axis_name) {
  const std::string started = utc_timestamp();
  if (seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  std::vector<AblationAxis> axes;
  if (axis_name == "all") {
    axes = {AblationAxis::horizon, AblationAxis::entropy, AblationAxis::loss};
  } else {
    axes.push_back(parse_ablation_axis(axis_name));
  }
  const ContinuousEnv env = make_env(env_name);
  const fs::path dir = prepare_out(c);

  Csv rows(kAblationRowsHeader), cells(kAblationCellsHeader);
  std::vector<BoundCheck> failed;
  std::vector<std::uint64_t> failed_seeds;
  Json summary = Json::object();
  for (const auto axis : axes) {
    const AblationResult r = ablate(env, cfg, axis, seeds);
    for (const auto& row : r.rows) {
      rows.row(row.axis, row.value, row.seed, num(row.final_return), row.real_samples, num(row.max_accepted_kl));
      const auto kl = make_check("max_accepted_kl", row.max_accepted_kl, cfg.max_kl + 1e-6);
      if (!kl.holds(0.0)) {
        failed.push_back(kl);
        failed_seeds.push_back(row.seed);
      }
    }
    Json axis_cells = Json::object();
    for (const auto& cell : r.cells) {
      cells.row(cell.axis, cell.value, num(cell.mean), num(cell.std), cell.n);
      axis_cells[cell.value] = {{"mean", cell.mean}, {"std", cell.std}, {"n", cell.n}};
      std::cout << cell.axis << "=" << cell.value << ": " << num(cell.mean) << " +- " << num(cell.std) << "\n";
    }
    summary[to_string(axis)] = axis_cells;
  }
  write_file(dir / "ablation_rows.csv", rows.text.str());
  write_file(dir / "ablation_cells.csv", cells.text.str());
  Json config = to_json(cfg);
  config["env"] = env_name;
  config["seeds"] = seeds;
  config["axis"] = axis_name;
  summary["pass"] = failed.empty();
  write_manifest(dir, "ablate", config, cfg.seed, started, summary);
  if (!failed.empty()) {
    list_failures(failed, failed_seeds);
    return kAssertionFailed;
  }
  return kOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Lower-bound model-based RL experiments", "slbo_lab"};
  app.require_subcommand(1);

  Common verify_c, meta_c, slbo_c, ablate_c;
  std::string suite = "all";
  int instances = 1000;
  double tol = 1e-9;
  auto* verify = app.add_subcommand("verify", "Randomized sweeps of the bound inequalities");
  add_common(verify, verify_c, false);
  verify->add_option("--suite", suite, "Suite name or 'all'")->capture_default_str();
  verify->add_option("--instances", instances, "Random instances per suite")->capture_default_str();
  verify->add_option("--tol", tol, "Allowed negative margin")->capture_default_str();

  Overrides meta_values;
  std::map<std::string, CLI::Option*> meta_opts;
  auto* meta = app.add_subcommand("meta", "Tabular lower-bound iteration trace");
  add_common(meta, meta_c, true);
  add_field_flags(meta, meta_config_fields(), meta_values, meta_opts);

  Overrides slbo_values, ablate_values;
  std::map<std::string, CLI::Option*> slbo_opts, ablate_opts;
  std::string slbo_env = "lqr2", ablate_env = "lqr2", algo = "slbo", axis = "all";
  int slbo_seeds = 1, ablate_seeds = 3;
  auto* slbo = app.add_subcommand("slbo", "Train on a continuous environment");
  add_common(slbo, slbo_c, true);
  slbo->add_option("--env", slbo_env, "lqr2, lqr<d> or pendulum")->capture_default_str();
  slbo->add_option("--seeds", slbo_seeds, "Runs with seeds seed, seed+1, ...")->capture_default_str();
  slbo->add_option("--algo", algo, "slbo or mbtrpo")->capture_default_str();
  add_field_flags(slbo, slbo_config_fields(), slbo_values, slbo_opts);

  auto* abl = app.add_subcommand("ablate", "One-axis sweeps over H, entropy bonus and model loss");
  add_common(abl, ablate_c, true);
  abl->add_option("--env", ablate_env, "Environment name")->capture_default_str();
  abl->add_option("--seeds", ablate_seeds, "Seeds per cell")->capture_default_str();
  abl->add_option("--axis", axis, "H, lambda_entropy, loss_kind or all")->capture_default_str();
  add_field_flags(abl, slbo_config_fields(), ablate_values, ablate_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (verify->parsed()) return do_verify(verify_c, suite, instances, tol);
    if (meta->parsed()) {
      MetaConfig cfg = meta_c.config.empty() ? MetaConfig{} : load_meta_config(meta_c.config);
      apply_overrides(cfg, meta_values, meta_opts);
      return do_meta(meta_c, cfg);
    }
    if (slbo->parsed()) return do_slbo(slbo_c, resolve_slbo(slbo_c, slbo_values, slbo_opts), slbo_env, slbo_seeds, algo);
    if (abl->parsed())
      return do_ablate(ablate_c, resolve_slbo(ablate_c, ablate_values, ablate_opts), ablate_env, ablate_seeds, axis);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"slbo_lab"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mbrl::cli

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mbrl/verify.hpp"

using namespace mbrl;

TEST_CASE("every suite runs clean on a small sweep") {
  SuiteOptions opts;
  opts.instances = 20;
  opts.seed = 3;
  for (const auto& name : suite_names()) {
    const auto rows = run_suite(name, opts);
    CAPTURE(name);
    CHECK(rows.size() >= 20);
    CHECK(violations(rows).empty());
  }
}

TEST_CASE("sweeps are reproducible and tagged with instance seeds") {
  SuiteOptions opts;
  opts.instances = 5;
  opts.seed = 7;
  const auto a = run_suite("discrepancy", opts);
  const auto b = run_suite("discrepancy", opts);
  REQUIRE(a.size() == b.size());
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].check.label == b[i].check.label);
    CHECK(a[i].check.lhs == b[i].check.lhs);
    CHECK(a[i].seed == b[i].seed);
    seeds.insert(a[i].seed);
  }
  CHECK(seeds == std::set<std::uint64_t>{7000000, 7000001, 7000002, 7000003, 7000004});

  opts.seed = 8;
  CHECK(run_suite("discrepancy", opts)[0].check.lhs != a[0].check.lhs);
}

TEST_CASE("discrepancy suite covers both bounds and the zero case") {
  SuiteOptions opts;
  opts.instances = 3;
  std::set<std::string> labels;
  for (const auto& r : run_suite("discrepancy", opts)) labels.insert(r.check.label);
  CHECK(labels == std::set<std::string>{"G_sound", "chi_sound", "G_zero_at_truth", "chi_zero_at_truth"});
}

TEST_CASE("invariance suite includes the stretched-embedding witness") {
  SuiteOptions opts;
  opts.instances = 2;
  const auto rows = run_suite("invariance", opts);
  CHECK(rows.back().check.label == "norm_bound_changes_under_stretch");
  CHECK(rows.back().check.holds());
}

TEST_CASE("violations filter by margin") {
  std::vector<VerifyRow> rows{{make_check("ok", 1.0, 1.0), 0},
                              {make_check("tight", 1.0, 1.0 - 5e-10), 1},
                              {make_check("bad", 1.0, 0.5), 2}};
  const auto bad = violations(rows);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].check.label == "bad");
  CHECK(violations(rows, 0.0).size() == 2);
}

TEST_CASE("unknown suites and empty sweeps are rejected") {
  CHECK_THROWS_AS(run_suite("bogus", {}), std::invalid_argument);
  SuiteOptions opts;
  opts.instances = 0;
  CHECK_THROWS_AS(run_suite("norm", opts), std::invalid_argument);
}

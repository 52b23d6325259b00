#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbrl/divergence.hpp"

namespace mbrl {

/// One checked inequality from a randomized sweep, tagged with the seed of the
/// instance it came from so it can be regenerated alone.
struct VerifyRow {
  BoundCheck check;
  std::uint64_t seed = 0;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  int instances = 1000;
  double tol = 1e-9;
};

/// divergence, discrepancy, telescoping, invariance, norm, meta.
const std::vector<std::string>& suite_names();

/// Runs a named sweep. Throws std::invalid_argument for an unknown name.
///   divergence   KL <= chi2, data processing, mixture and action contraction,
///                inner-product and single-step bounds, chain bounds up to
///                three levels, resolvent identity residual, visitation TV bound
///   discrepancy  true gap <= D^G inside the KL ball and <= D^chi inside the
///                chi ball; both bounds vanish at the true model
///   telescoping  value difference equals the discounted G expectation
///   invariance   V and G commute with state relabelling; a stretched
///                embedding changes the norm bound
///   norm         true gap <= prediction-error bounds on deterministic models
///   meta         true value never decreases along the lower-bound iteration
///                (G and chi, family of 8 containing the truth, 25 steps)
std::vector<VerifyRow> run_suite(const std::string& name, const SuiteOptions& opts);

/// Rows whose margin is below -tol.
std::vector<VerifyRow> violations(const std::vector<VerifyRow>& rows, double tol = 1e-9);

}  // namespace mbrl

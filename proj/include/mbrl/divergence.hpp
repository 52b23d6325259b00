#pragma once

#include <string>
#include <vector>

#include "mbrl/mdp.hpp"

namespace mbrl {

enum class DivergenceKind { chi2, kl, tv };

struct DivergenceValue {
  double value;
  DivergenceKind kind;
};

/// One side-by-side evaluation of an inequality lhs <= rhs.
struct BoundCheck {
  std::string label;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs

  bool holds(double tol = 1e-9) const { return margin >= -tol; }
};

inline BoundCheck make_check(std::string label, double lhs, double rhs) {
  return {std::move(label), lhs, rhs, rhs - lhs};
}

/// Neyman chi-square sum (p_i - q_i)^2 / q_i. Requires q_i > 0 everywhere;
/// a zero entry throws std::domain_error naming the index.
DivergenceValue chi_square(const Vec& p, const Vec& q);

/// Chi-square restricted to the support of q: terms with p_i = q_i = 0 are
/// skipped, p_i > 0 = q_i throws std::domain_error.
double chi_square_on_support(const Vec& p, const Vec& q);

/// KL(p || q) with 0 log 0 = 0; p_i > 0 = q_i throws std::domain_error.
DivergenceValue kl(const Vec& p, const Vec& q);

/// Conventional total variation, half the l1 distance.
DivergenceValue tv(const Vec& p, const Vec& q);

/// Unhalved l1 distance sum |p_i - q_i|.
double l1_distance(const Vec& p, const Vec& q);

/// mu-weighted average of the rowwise chi-square between two row-stochastic
/// kernels, evaluated on the support of each row of `kernel_b`.
DivergenceValue kernel_chi_square(const Mat& kernel_a, const Mat& kernel_b, const Vec& mu);

// Inequality checks. Kernels are row-stochastic; "P mu" is push_forward(P, mu).

/// KL(p, q) <= chi2(p, q).
BoundCheck check_kl_below_chi(const Vec& p, const Vec& q);
/// |p - q|_1 <= sqrt(2 KL(p, q)).
BoundCheck check_pinsker(const Vec& p, const Vec& q);
/// chi2(P mu, P mu') <= chi2(mu, mu').
BoundCheck check_data_processing(const Vec& mu, const Vec& mu_prime, const Mat& kernel);
/// chi2(P_a mu, P_b mu) <= chi2_mu(P_a, P_b).
BoundCheck check_mixture_bound(const Vec& mu, const Mat& kernel_a, const Mat& kernel_b);
/// chi2 of next-state laws at s under two policies <= chi2 of their action laws at s.
BoundCheck check_action_contraction(const FiniteMdp& mdp, const TabularPolicy& pi_a, const TabularPolicy& pi_b,
                                    int s);
/// <q - p, f>^2 <= chi2(q, p) <p, f^2>.
BoundCheck check_inner_product(const Vec& p, const Vec& q, const Vec& f);
/// <W (P' - P) mu, f>^2 <= chi2_mu(P', P) <W P mu, f^2>.
BoundCheck check_single_step(const Mat& w, const Mat& kernel, const Mat& kernel_prime, const Vec& mu,
                             const Vec& f);

struct ResolventResidual {
  /// max |(G'bar - Gbar) - (1-gamma)^{-1} G'bar Delta Gbar|
  double identity_residual = 0.0;
  /// max |(G' - G) - sum_{k=1..K} (G Delta)^k G| for unnormalized G
  double neumann_residual = 0.0;
  /// ||G Delta||_1^{K+1} ||G'||_1, an upper bound on neumann_residual
  double neumann_tail_bound = 0.0;
  int terms = 0;
};

/// Both resolvent perturbation identities with Delta = gamma (P' - P), P the
/// kernel of pi_a and P' the kernel of pi_b.
ResolventResidual resolvent_identity_residual(const FiniteMdp& mdp, const TabularPolicy& pi_a,
                                              const TabularPolicy& pi_b, int terms = 6);

/// |rho^pi - rho^pi'|_1 <= kappa E_{S~rho^pi}[KL(pi(S), pi'(S))^{1/2}].
BoundCheck tv_visitation_bound(const FiniteMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pi_prime);

/// Bounds on |<Gbar' mu, f> - <Gbar mu, f>| where Gbar comes from pi and
/// Gbar' from pi_prime:
///   [0] delta_1 ||f||_inf
///   [1] delta_1 <Gbar P Gbar mu, f^2>^{1/2} + delta_1 delta_2^{1/2} ||f||_inf
///   [2..] the level-k bound for k = 1..levels
/// f is rescaled to ||f||_inf = 1 internally (every bound is 1-homogeneous in
/// f) and the reported values are scaled back. Requires 1 <= levels <= 4.
std::vector<BoundCheck> chain_perturbation_bounds(const FiniteMdp& mdp, const TabularPolicy& pi,
                                                  const TabularPolicy& pi_prime, const Vec& f, int levels);

}  // namespace mbrl

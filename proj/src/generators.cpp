#include "mbrl/generators.hpp"

#include <stdexcept>

namespace mbrl {

FiniteMdp random_mdp(const RandomMdpOptions& opts, Rng& rng) {
  const int S = opts.n_states, A = opts.n_actions;
  if (S <= 0 || A <= 0) throw std::invalid_argument("random_mdp: empty spaces");
  Mat transition = Mat::Zero(S * A, S);
  for (int r = 0; r < S * A; ++r) {
    if (opts.deterministic)
      transition(r, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(S)))) = 1.0;
    else
      transition.row(r) = rng.dirichlet(S).transpose();
  }
  Mat reward(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) reward(s, a) = rng.uniform(-opts.reward_scale, opts.reward_scale);
  Vec init = Vec::Zero(S);
  if (opts.random_init)
    init = rng.dirichlet(S);
  else
    init[0] = 1.0;
  Mat embedding;
  if (opts.embedding_dim <= 0) {
    embedding = Mat::Identity(S, S);
  } else {
    embedding.resize(S, opts.embedding_dim);
    for (int s = 0; s < S; ++s) embedding.row(s) = rng.normal_vector(opts.embedding_dim).transpose();
  }
  return FiniteMdp(S, A, std::move(transition), std::move(reward), opts.gamma, std::move(init),
                   std::move(embedding));
}

FiniteMdp perturbed_copy(const FiniteMdp& base, double weight, Rng& rng) {
  Mat transition = base.transition();
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    Vec row = (1.0 - weight) * transition.row(r).transpose() + weight * rng.dirichlet(base.n_states());
    transition.row(r) = (row / row.sum()).transpose();
  }
  return base.with_transition(std::move(transition));
}

FiniteMdp perturbed_deterministic_copy(const FiniteMdp& base, double flip, Rng& rng) {
  if (!base.deterministic()) throw std::invalid_argument("perturbed_deterministic_copy: base is stochastic");
  Mat transition = base.transition();
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    if (rng.uniform() < flip) {
      transition.row(r).setZero();
      transition(r, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(base.n_states())))) = 1.0;
    }
  }
  return base.with_transition(std::move(transition));
}

}  // namespace mbrl

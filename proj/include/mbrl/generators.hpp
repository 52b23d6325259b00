#pragma once

#include "mbrl/mdp.hpp"

namespace mbrl {

struct RandomMdpOptions {
  int n_states = 4;
  int n_actions = 2;
  double gamma = 0.9;
  bool deterministic = false;
  /// 0 gives one-hot embeddings; d > 0 gives i.i.d. standard normal features.
  int embedding_dim = 0;
  double reward_scale = 1.0;
  /// false puts all initial mass on state 0.
  bool random_init = true;
};

/// Random MDP: Dirichlet rows (floor 1e-6), uniform rewards in
/// [-reward_scale, reward_scale], always carries an embedding.
FiniteMdp random_mdp(const RandomMdpOptions& opts, Rng& rng);

/// Rows replaced by (1 - weight) * row + weight * Dirichlet noise.
FiniteMdp perturbed_copy(const FiniteMdp& base, double weight, Rng& rng);

/// Deterministic copy where each (s, a) successor is redrawn with probability `flip`.
FiniteMdp perturbed_deterministic_copy(const FiniteMdp& base, double flip, Rng& rng);

}  // namespace mbrl

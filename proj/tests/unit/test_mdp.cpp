#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "mbrl/generators.hpp"
#include "mbrl/mdp.hpp"
#include "oracles.hpp"

using namespace mbrl;

namespace {

FiniteMdp two_state_chain(double gamma = 0.9) {
  // s0 -a0-> s0 (r=0), s0 -a1-> s1 (r=1); s1 absorbing with r=2.
  Mat t = Mat::Zero(4, 2);
  t(0, 0) = 1.0;
  t(1, 1) = 1.0;
  t(2, 1) = 1.0;
  t(3, 1) = 1.0;
  Mat r(2, 2);
  r << 0.0, 1.0, 2.0, 2.0;
  Vec mu(2);
  mu << 1.0, 0.0;
  return FiniteMdp(2, 2, t, r, gamma, mu);
}

}  // namespace

TEST_CASE("construction validates shapes and probabilities") {
  const FiniteMdp m = two_state_chain();
  CHECK(m.deterministic());
  CHECK(m.successor(0, 1) == 1);
  CHECK(m.kappa() == doctest::Approx(9.0));

  Mat bad = m.transition();
  bad(0, 0) = 0.9;
  CHECK_THROWS_AS(m.with_transition(bad), std::invalid_argument);
  bad(0, 0) = 1.0 + 1e-11;
  CHECK_THROWS_AS(m.with_transition(bad), std::invalid_argument);
  CHECK_THROWS_AS(FiniteMdp(2, 2, m.transition(), m.reward(), 1.0, m.init_dist()), std::invalid_argument);
  CHECK_THROWS_AS(FiniteMdp(2, 2, Mat::Zero(3, 2), m.reward(), 0.9, m.init_dist()), std::invalid_argument);
  CHECK_THROWS_AS(FiniteMdp(2, 2, m.transition(), Mat::Zero(2, 3), 0.9, m.init_dist()), std::invalid_argument);
  CHECK_THROWS_AS(m.embedding(), std::logic_error);
  CHECK_THROWS_AS(m.with_embedding(Mat::Zero(3, 1)), std::invalid_argument);

  Rng rng(1);
  const FiniteMdp stochastic = random_mdp({}, rng);
  CHECK_FALSE(stochastic.deterministic());
  CHECK_THROWS_AS(stochastic.successor(0, 0), std::logic_error);
}

TEST_CASE("policies validate rows and mix convexly") {
  CHECK_THROWS_AS(TabularPolicy(Mat::Constant(2, 2, 0.6)), std::invalid_argument);
  CHECK_THROWS_AS(TabularPolicy::deterministic({0, 2}, 2), std::invalid_argument);
  const auto a = TabularPolicy::deterministic({0, 1}, 2);
  const auto b = TabularPolicy::uniform(2, 2);
  const auto mix = TabularPolicy::mixture(a, b, 0.25);
  CHECK(mix(0, 0) == doctest::Approx(0.875));
  CHECK(mix(1, 0) == doctest::Approx(0.125));
  CHECK(TabularPolicy::mixture(a, b, 0.0).probs() == a.probs());
  CHECK(TabularPolicy::mixture(a, b, 1.0).probs() == b.probs());
}

TEST_CASE("value of a known chain has a closed form") {
  const FiniteMdp m = two_state_chain(0.9);
  const auto go = TabularPolicy::deterministic({1, 0}, 2);
  const ValueVector v = value_fn(m, go);
  // V(s1) = 2 / (1 - 0.9) = 20, V(s0) = 1 + 0.9 * 20 = 19.
  CHECK(v.v[1] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(v.v[0] == doctest::Approx(19.0).epsilon(1e-12));
  CHECK(v.scalar == doctest::Approx(19.0).epsilon(1e-12));
  const Mat q = q_values(m, v.v);
  CHECK(q(0, 0) == doctest::Approx(0.9 * 19.0));
}

TEST_CASE("value, visitation and step-weighted visitation match series oracles") {
  Rng rng(7);
  for (double gamma : {0.5, 0.9, 0.99}) {
    for (int trial = 0; trial < 10; ++trial) {
      RandomMdpOptions opts;
      opts.n_states = 2 + trial % 5;
      opts.n_actions = 1 + trial % 3;
      opts.gamma = gamma;
      const FiniteMdp m = random_mdp(opts, rng);
      const auto pi = TabularPolicy::random(opts.n_states, opts.n_actions, rng);
      const Vec v = value_fn(m, pi).v;
      const Vec v_ref = oracle::value(m, pi);
      CHECK((v - v_ref).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + v_ref.cwiseAbs().maxCoeff()));
      const Vec r = rho(m, pi).weights;
      CHECK((r - oracle::visitation(m, pi)).cwiseAbs().maxCoeff() <= 1e-10);
      const Vec b = beta(m, pi).weights;
      CHECK((b - oracle::step_weighted_visitation(m, pi)).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(r.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-12));
      // V = <rho, r_pi> / (1 - gamma)
      CHECK(value_fn(m, pi).scalar ==
            doctest::Approx(oracle::dot(r, policy_reward(m, pi)) / (1.0 - gamma)).epsilon(1e-9));
    }
  }
}

TEST_CASE("resolvent is row-stochastic and maps mu to the visitation") {
  Rng rng(3);
  const FiniteMdp m = random_mdp({5, 3, 0.8}, rng);
  const auto pi = TabularPolicy::random(5, 3, rng);
  const Mat res = resolvent(m, pi);
  CHECK((res.rowwise().sum() - Vec::Ones(5)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((res.transpose() * m.init_dist() - rho(m, pi).weights).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("trajectory sampling is deterministic in the seed") {
  Rng rng(11);
  const FiniteMdp m = random_mdp({4, 2, 0.9}, rng);
  const auto pi = TabularPolicy::random(4, 2, rng);
  const auto a = sample_trajectories(m, pi, 20, 15, 99);
  const auto b = sample_trajectories(m, pi, 20, 15, 99);
  const auto c = sample_trajectories(m, pi, 20, 15, 100);
  REQUIRE(a.episodes.size() == 20);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < 20; ++i) {
    REQUIRE(a.episodes[i].steps.size() == 15);
    for (std::size_t t = 0; t < 15; ++t) {
      same = same && a.episodes[i].steps[t].next_state == b.episodes[i].steps[t].next_state &&
             a.episodes[i].steps[t].action == b.episodes[i].steps[t].action;
      differs = differs || a.episodes[i].steps[t].next_state != c.episodes[i].steps[t].next_state;
      if (t > 0) CHECK(a.episodes[i].steps[t].state == a.episodes[i].steps[t - 1].next_state);
    }
  }
  CHECK(same);
  CHECK(differs);
  CHECK_THROWS_AS(sample_trajectories(m, pi, 0, 5, 1), std::invalid_argument);
}

TEST_CASE("geometric stopping samples the discounted visitation") {
  Rng rng(5);
  const FiniteMdp m = random_mdp({4, 2, 0.7}, rng);
  const auto pi = TabularPolicy::random(4, 2, rng);
  const int n = 40000;
  const auto batch = sample_trajectories(m, pi, n, 60, 17);
  const auto states = geometric_stop_states(batch, m.gamma(), 18);
  Vec freq = Vec::Zero(4);
  for (int s : states) freq[s] += 1.0 / n;
  const Vec r = oracle::visitation(m, pi);
  for (int s = 0; s < 4; ++s) {
    const double se = std::sqrt(r[s] * (1.0 - r[s]) / n);
    CHECK(std::abs(freq[s] - r[s]) <= 5.0 * se);
  }
}

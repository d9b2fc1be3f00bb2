#include <cmath>
#include <numeric>

#include "doctest.h"

#include "banditlab/agents.hpp"
#include "banditlab/errors.hpp"

using namespace banditlab;

namespace {

ArmStats stats_from(const std::vector<double>& means, const std::vector<std::uint64_t>& n) {
  ArmStats s(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    s.displays[i] = n[i];
    s.rewards[i] = means[i] * static_cast<double>(n[i]);
    s.t += n[i];
  }
  return s;
}

std::vector<double> pull_frequencies(std::size_t arms, std::size_t pulls, auto&& choose) {
  std::vector<double> f(arms, 0.0);
  for (std::size_t k = 0; k < pulls; ++k) f[choose()] += 1.0;
  for (auto& x : f) x /= static_cast<double>(pulls);
  return f;
}

}  // namespace

TEST_CASE("argmax tie-breaking") {
  const std::vector<double> v{0.2, 0.7, 0.1, 0.7, 0.7};
  CHECK(argmax(v, TieBreak::LowestIndex, nullptr) == 1);
  Rng rng(3);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 30000; ++i) ++hits[argmax(v, TieBreak::UniformRandom, &rng)];
  CHECK(hits[0] == 0);
  CHECK(hits[2] == 0);
  for (int i : {1, 3, 4}) CHECK(std::abs(hits[i] / 30000.0 - 1.0 / 3.0) < 0.015);
  CHECK_THROWS(argmax(std::vector<double>{}, TieBreak::LowestIndex, nullptr));
}

TEST_CASE("epsilon-greedy selection") {
  Rng rng(1);
  SUBCASE("epsilon 0 exploits") {
    const auto s = stats_from({0.1, 0.9}, {5, 5});
    for (int i = 0; i < 100; ++i) CHECK(act_epsilon_greedy(s, 0.0, rng) == 1);
  }
  SUBCASE("epsilon 1 explores uniformly") {
    const auto s = stats_from({0.1, 0.9, 0.3, 0.2}, {5, 5, 5, 5});
    const auto f = pull_frequencies(4, 100000, [&] { return act_epsilon_greedy(s, 1.0, rng); });
    for (double x : f) CHECK(std::abs(x - 0.25) < 0.02);
  }
  SUBCASE("epsilon 0.1 on two arms plays the best 95% of the time") {
    const auto s = stats_from({0.9, 0.1}, {5, 5});
    const auto f = pull_frequencies(2, 100000, [&] { return act_epsilon_greedy(s, 0.1, rng); });
    CHECK(std::abs(f[0] - (0.9 + 0.1 / 2)) < 0.005);
  }
  SUBCASE("decay schedule") {
    CHECK(decayed_epsilon(0.5, 1) == 0.5);
    CHECK(decayed_epsilon(0.5, 4) == doctest::Approx(0.25));
    CHECK(decayed_epsilon(0.5, 100) == doctest::Approx(0.05));
  }
}

TEST_CASE("epsilon-greedy agent") {
  AgentConfig c;
  c.kind = AgentKind::EpsilonGreedy;
  c.epsilon = 0.0;
  SUBCASE("forced initialization plays every arm once in order") {
    EpsilonGreedyAgent agent(5, c);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(agent.act() == i);
      agent.observe_reward(i, false);
    }
  }
  SUBCASE("with epsilon 0 a strictly dominant arm is never abandoned") {
    EpsilonGreedyAgent agent(4, c);
    for (std::size_t i = 0; i < 4; ++i) agent.observe_reward(agent.act(), i == 2);
    for (int k = 0; k < 200; ++k) {
      const auto arm = agent.act();
      CHECK(arm == 2);
      agent.observe_reward(arm, k % 3 == 0);
    }
  }
  SUBCASE("without forced initialization the greedy rule starts at once") {
    c.forced_init = false;
    EpsilonGreedyAgent agent(5, c);
    agent.observe_reward(3, true);
    CHECK(agent.act() == 3);
  }
}

TEST_CASE("UCB1 selection") {
  SUBCASE("first K calls play arms in order") {
    ArmStats s(6);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto arm = act_ucb1(s, 2.0);
      CHECK(arm == i);
      s.record(arm, 0.0);
    }
  }
  SUBCASE("equal statistics fall to the lowest index") {
    CHECK(act_ucb1(stats_from({0.5, 0.5, 0.5}, {4, 4, 4}), 2.0) == 0);
  }
  SUBCASE("worked example with equal confidence terms") {
    ArmStats s = stats_from({0.9, 0.1}, {10, 10});
    s.t = 20;
    const auto u = ucb1_indices(s, 1.0);
    const double bonus = std::sqrt(std::log(20.0) / 10.0);
    CHECK(std::abs(u[0] - (0.9 + bonus)) < 1e-12);
    CHECK(std::abs(u[1] - (0.1 + bonus)) < 1e-12);
    CHECK(act_ucb1(s, 1.0) == 0);
  }
  SUBCASE("adding a constant to every mean keeps the choice") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t k = 2 + rng() % 6;
      std::vector<double> means(k);
      std::vector<std::uint64_t> n(k);
      for (std::size_t i = 0; i < k; ++i) {
        means[i] = u(rng);
        n[i] = 1 + rng() % 30;
      }
      auto shifted = means;
      for (auto& m : shifted) m += 0.37;
      CHECK(act_ucb1(stats_from(means, n), 2.0) == act_ucb1(stats_from(shifted, n), 2.0));
    }
  }
}

TEST_CASE("EXP3 probabilities") {
  SUBCASE("uniform weights give uniform probabilities") {
    Exp3State s(4, 0.3);
    for (double p : exp3_probabilities(s)) CHECK(p == doctest::Approx(0.25));
  }
  SUBCASE("gamma 1 ignores the weights") {
    Exp3State s(3, 1.0);
    s.weights = {10.0, 1.0, 0.5};
    for (double p : exp3_probabilities(s)) CHECK(p == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("weights (3, 1) with gamma 0.5") {
    Exp3State s(2, 0.5);
    s.weights = {3.0, 1.0};
    const auto p = exp3_probabilities(s);
    CHECK(std::abs(p[0] - 0.625) < 1e-12);
    CHECK(std::abs(p[1] - 0.375) < 1e-12);
  }
  SUBCASE("sum to one with a floor of gamma / K") {
    Rng rng(2);
    std::uniform_real_distribution<double> u(1e-6, 50.0);
    for (int trial = 0; trial < 300; ++trial) {
      Exp3State s(2 + rng() % 10, 0.1);
      for (auto& w : s.weights) w = u(rng);
      const auto p = exp3_probabilities(s);
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-9);
      for (double x : p) CHECK(x >= 0.1 / static_cast<double>(s.arms()) - 1e-15);
    }
  }
  SUBCASE("a common rescale of the weights changes nothing") {
    Rng rng(6);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int trial = 0; trial < 300; ++trial) {
      Exp3State s(5, 0.2);
      for (auto& w : s.weights) w = u(rng);
      auto scaled = s;
      const double c = std::pow(10.0, static_cast<double>(rng() % 180) - 90.0);
      for (auto& w : scaled.weights) w *= c;
      const auto p = exp3_probabilities(s);
      const auto q = exp3_probabilities(scaled);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-9);
    }
  }
}

TEST_CASE("EXP3 weight update") {
  SUBCASE("zero reward leaves weights unchanged") {
    Exp3State s(2, 0.2);
    s.weights = {1.5, 2.5};
    exp3_update(s, 0, 0.0, 0.5);
    CHECK(s.weights == std::vector<double>{1.5, 2.5});
  }
  SUBCASE("w=1, gamma 0.2, K=2, p=0.5, reward 1 gives e^0.2") {
    Exp3State s(2, 0.2);
    exp3_update(s, 0, 1.0, 0.5);
    CHECK(std::abs(s.weights[0] - std::exp(0.2)) < 1e-12);
    CHECK(s.weights[0] == doctest::Approx(1.22140).epsilon(1e-5));
    CHECK(s.weights[1] == 1.0);
  }
  SUBCASE("consecutive updates compose multiplicatively") {
    Exp3State s(2, 0.2);
    exp3_update(s, 1, 1.0, 0.5);
    exp3_update(s, 1, 1.0, 0.5);
    CHECK(std::abs(s.weights[1] - std::exp(0.4)) < 1e-12);
  }
}

TEST_CASE("EXP3S weight update") {
  SUBCASE("reward 0, unit weights, K=2, delta 2/e gives 3 on every arm") {
    Exp3State s(2, 0.1, 2.0 / std::exp(1.0));
    exp3s_update(s, 0, 0.0, 0.5);
    CHECK(std::abs(s.weights[0] - 3.0) < 1e-12);
    CHECK(std::abs(s.weights[1] - 3.0) < 1e-12);
  }
  SUBCASE("played-arm-only share") {
    Exp3State s(2, 0.1, 2.0 / std::exp(1.0));
    s.share = Exp3sShare::PlayedArmOnly;
    exp3s_update(s, 0, 0.0, 0.5);
    CHECK(std::abs(s.weights[0] - 3.0) < 1e-12);
    CHECK(s.weights[1] == 1.0);
  }
  SUBCASE("vanishing delta reduces to EXP3") {
    Exp3State a(3, 0.3, 1e-300);
    Exp3State b(3, 0.3);
    exp3s_update(a, 2, 1.0, 0.4);
    exp3_update(b, 2, 1.0, 0.4);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.weights[i] == doctest::Approx(b.weights[i]).epsilon(1e-14));
  }
  SUBCASE("weights stay positive and finite over long runs") {
    Rng rng(5);
    Exp3State s(4, 0.5, 1e-4);
    for (int k = 0; k < 20000; ++k) {
      const auto p = exp3_probabilities(s);
      const auto arm = sample_index(p, rng);
      exp3s_update(s, arm, arm == 0 ? 1.0 : 0.0, p[arm]);
      for (double w : s.weights) {
        REQUIRE(w > 0.0);
        REQUIRE(std::isfinite(w));
      }
    }
  }
}

TEST_CASE("weight rescaling") {
  Exp3State s(3, 0.1);
  s.weights = {2e100, 1e100, 5e99};
  const auto before = exp3_probabilities(s);
  rescale_weights(s);
  CHECK(s.weights[0] == doctest::Approx(1.0));
  CHECK(s.weights[2] == doctest::Approx(0.25));
  const auto after = exp3_probabilities(s);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(before[i] - after[i]) < 1e-9);

  Exp3State small(2, 0.1);
  small.weights = {5.0, 1.0};
  rescale_weights(small);
  CHECK(small.weights == std::vector<double>{5.0, 1.0});
}

TEST_CASE("sample_index follows the probabilities") {
  Rng rng(12);
  const std::vector<double> p{0.1, 0.6, 0.3};
  const auto f = pull_frequencies(3, 100000, [&] { return sample_index(p, rng); });
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(f[i] - p[i]) < 0.01);
}

TEST_CASE("agent kinds and configs") {
  for (auto kind : {AgentKind::EpsilonGreedy, AgentKind::Ucb1, AgentKind::Exp3, AgentKind::Exp3s, AgentKind::UcbRs,
                    AgentKind::Random}) {
    CHECK(parse_agent_kind(to_string(kind)) == kind);
  }
  CHECK_FALSE(parse_agent_kind("thompson").has_value());

  AgentConfig c;
  CHECK_NOTHROW(c.validate());
  c.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AgentConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AgentConfig{};
  c.gamma = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AgentConfig{};
  c.delta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = AgentConfig{};
  c.kind = AgentKind::UcbRs;
  CHECK_THROWS_AS(make_baseline_agent(5, c), ConfigError);
  for (auto kind : {AgentKind::EpsilonGreedy, AgentKind::Ucb1, AgentKind::Exp3, AgentKind::Exp3s, AgentKind::Random}) {
    c.kind = kind;
    auto agent = make_baseline_agent(5, c);
    for (int k = 0; k < 50; ++k) {
      const auto arm = agent->act();
      REQUIRE(arm < 5);
      agent->observe_reward(arm, k % 4 == 0);
    }
  }
}

TEST_CASE("agents are deterministic given a seed") {
  for (auto kind : {AgentKind::EpsilonGreedy, AgentKind::Exp3, AgentKind::Exp3s, AgentKind::Random}) {
    AgentConfig c;
    c.kind = kind;
    c.seed = 42;
    c.tie_break = TieBreak::UniformRandom;
    auto a = make_baseline_agent(7, c);
    auto b = make_baseline_agent(7, c);
    for (int k = 0; k < 300; ++k) {
      const auto x = a->act();
      REQUIRE(x == b->act());
      a->observe_reward(x, k % 5 == 0);
      b->observe_reward(x, k % 5 == 0);
    }
  }
}

#include "banditlab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "banditlab/errors.hpp"

namespace banditlab {

void ArmStats::record(std::size_t arm, double reward) {
  if (arm >= displays.size()) throw std::out_of_range(fmt::format("arm {} out of range", arm));
  ++displays[arm];
  rewards[arm] += reward;
  ++t;
}

std::size_t argmax(std::span<const double> values, TieBreak rule, Rng* rng, double tolerance) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty range");
  const double best = *std::max_element(values.begin(), values.end());
  if (rule == TieBreak::LowestIndex || rng == nullptr) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] >= best - tolerance) return i;
    }
  }
  std::size_t ties = 0;
  for (double v : values) ties += v >= best - tolerance ? 1 : 0;
  std::uniform_int_distribution<std::size_t> pick(0, ties - 1);
  std::size_t k = pick(*rng);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= best - tolerance && k-- == 0) return i;
  }
  return values.size() - 1;
}

double decayed_epsilon(double epsilon0, std::uint64_t t) {
  return t == 0 ? epsilon0 : epsilon0 / std::sqrt(static_cast<double>(t));
}

std::size_t act_epsilon_greedy(const ArmStats& stats, double epsilon, Rng& rng, TieBreak rule) {
  if (stats.arms() == 0) throw std::invalid_argument("epsilon-greedy needs at least one arm");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> any(0, stats.arms() - 1);
    return any(rng);
  }
  std::vector<double> means(stats.arms());
  for (std::size_t i = 0; i < means.size(); ++i) means[i] = stats.mean(i);
  return argmax(means, rule, &rng);
}

std::vector<double> ucb1_indices(const ArmStats& stats, double alpha) {
  const double log_t = std::log(static_cast<double>(std::max<std::uint64_t>(stats.t, 1)));
  std::vector<double> u(stats.arms());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = stats.mean(i) + std::sqrt(alpha * log_t / static_cast<double>(stats.displays[i]));
  }
  return u;
}

std::size_t act_ucb1(const ArmStats& stats, double alpha, TieBreak rule, Rng* rng) {
  if (stats.arms() == 0) throw std::invalid_argument("UCB1 needs at least one arm");
  for (std::size_t i = 0; i < stats.arms(); ++i) {
    if (stats.displays[i] == 0) return i;
  }
  return argmax(ucb1_indices(stats, alpha), rule, rng);
}

void rescale_weights(Exp3State& state) {
  const double top = *std::max_element(state.weights.begin(), state.weights.end());
  if (top > kWeightCeiling) {
    for (auto& w : state.weights) w = std::max(w / top, std::numeric_limits<double>::min());
  }
}

std::vector<double> exp3_probabilities(const Exp3State& state) {
  const auto k = static_cast<double>(state.arms());
  const double top = *std::max_element(state.weights.begin(), state.weights.end());
  // Normalizing by the max first makes the result invariant to a common weight scale.
  double total = 0.0;
  for (double w : state.weights) total += w / top;
  std::vector<double> p(state.arms());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = (1.0 - state.gamma) * (state.weights[i] / top) / total + state.gamma / k;
  }
  return p;
}

void exp3_update(Exp3State& state, std::size_t arm, double reward, double p_arm) {
  if (arm >= state.arms()) throw std::out_of_range("EXP3 arm out of range");
  if (!(p_arm > 0.0)) throw std::invalid_argument("EXP3 update needs p_arm > 0");
  const auto k = static_cast<double>(state.arms());
  state.weights[arm] *= std::exp(state.gamma * reward / (p_arm * k));
  rescale_weights(state);
}

void exp3s_update(Exp3State& state, std::size_t arm, double reward, double p_arm) {
  if (arm >= state.arms()) throw std::out_of_range("EXP3S arm out of range");
  if (!(p_arm > 0.0)) throw std::invalid_argument("EXP3S update needs p_arm > 0");
  const auto k = static_cast<double>(state.arms());
  const double total = std::accumulate(state.weights.begin(), state.weights.end(), 0.0);
  const double share = std::exp(1.0) * state.delta / k * total;
  state.weights[arm] *= std::exp(state.gamma * reward / (p_arm * k));
  if (state.share == Exp3sShare::AllArms) {
    for (auto& w : state.weights) w += share;
  } else {
    state.weights[arm] += share;
  }
  rescale_weights(state);
}

std::size_t sample_index(std::span<const double> probabilities, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  const double u = uniform(rng) * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  return probabilities.size() - 1;
}

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::EpsilonGreedy: return "epsilon-greedy";
    case AgentKind::Ucb1: return "ucb1";
    case AgentKind::Exp3: return "exp3";
    case AgentKind::Exp3s: return "exp3s";
    case AgentKind::UcbRs: return "ucb-rs";
    case AgentKind::Random: return "random";
  }
  return "unknown";
}

std::optional<AgentKind> parse_agent_kind(std::string_view text) {
  for (auto kind : {AgentKind::EpsilonGreedy, AgentKind::Ucb1, AgentKind::Exp3, AgentKind::Exp3s,
                    AgentKind::UcbRs, AgentKind::Random}) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

void AgentConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError(fmt::format("epsilon must be in [0,1], got {}", epsilon));
  if (!(alpha > 0.0)) throw ConfigError(fmt::format("alpha must be > 0, got {}", alpha));
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError(fmt::format("gamma must be in [0,1], got {}", gamma));
  if (!(delta > 0.0)) throw ConfigError(fmt::format("delta must be > 0, got {}", delta));
}

std::size_t RandomAgent::act() {
  std::uniform_int_distribution<std::size_t> any(0, arms_ - 1);
  return any(rng_);
}

EpsilonGreedyAgent::EpsilonGreedyAgent(std::size_t arms, const AgentConfig& config)
    : stats_(arms), config_(config), rng_(config.seed) {}

std::size_t EpsilonGreedyAgent::act() {
  if (config_.forced_init) {
    for (std::size_t i = 0; i < stats_.arms(); ++i) {
      if (stats_.displays[i] == 0) return i;
    }
  }
  const double eps = config_.epsilon_decay ? decayed_epsilon(config_.epsilon, stats_.t + 1) : config_.epsilon;
  return act_epsilon_greedy(stats_, eps, rng_, config_.tie_break);
}

Ucb1Agent::Ucb1Agent(std::size_t arms, const AgentConfig& config)
    : stats_(arms), config_(config), rng_(config.seed) {}

std::size_t Ucb1Agent::act() { return act_ucb1(stats_, config_.alpha, config_.tie_break, &rng_); }

Exp3Agent::Exp3Agent(std::size_t arms, const AgentConfig& config, bool shifting)
    : state_(arms, config.gamma, config.delta), shifting_(shifting), rng_(config.seed) {
  state_.share = config.exp3s_share;
}

std::size_t Exp3Agent::act() {
  last_probabilities_ = exp3_probabilities(state_);
  return sample_index(last_probabilities_, rng_);
}

void Exp3Agent::observe_reward(std::size_t arm, bool click) {
  if (last_probabilities_.empty()) last_probabilities_ = exp3_probabilities(state_);
  const double p = last_probabilities_.at(arm);
  if (shifting_) {
    exp3s_update(state_, arm, click ? 1.0 : 0.0, p);
  } else {
    exp3_update(state_, arm, click ? 1.0 : 0.0, p);
  }
  last_probabilities_.clear();
}

std::unique_ptr<Agent> make_baseline_agent(std::size_t arms, const AgentConfig& config) {
  config.validate();
  switch (config.kind) {
    case AgentKind::EpsilonGreedy: return std::make_unique<EpsilonGreedyAgent>(arms, config);
    case AgentKind::Ucb1: return std::make_unique<Ucb1Agent>(arms, config);
    case AgentKind::Exp3: return std::make_unique<Exp3Agent>(arms, config, false);
    case AgentKind::Exp3s: return std::make_unique<Exp3Agent>(arms, config, true);
    case AgentKind::Random: return std::make_unique<RandomAgent>(arms, config.seed);
    case AgentKind::UcbRs: break;
  }
  throw ConfigError("ucb-rs agents need a reference set; use make_ucb_rs_agent");
}

}  // namespace banditlab

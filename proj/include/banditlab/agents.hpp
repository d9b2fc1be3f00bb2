#pragma once

// Baseline bandit agents: epsilon-greedy, UCB1, EXP3 and EXP3S.
//
// The selection and update rules are free functions over plain state structs
// so they can be tested directly; the Agent classes wrap them behind the
// act/observe interface the harness drives.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "banditlab/rng.hpp"

namespace banditlab {

enum class TieBreak { LowestIndex, UniformRandom };

struct ArmStats {
  std::vector<std::uint64_t> displays;  // N_i
  std::vector<double> rewards;          // S_i
  std::uint64_t t = 0;                  // bandit steps observed

  ArmStats() = default;
  explicit ArmStats(std::size_t arms) : displays(arms, 0), rewards(arms, 0.0) {}

  std::size_t arms() const { return displays.size(); }
  double mean(std::size_t i) const {
    return displays[i] == 0 ? 0.0 : rewards[i] / static_cast<double>(displays[i]);
  }
  void record(std::size_t arm, double reward);
};

// Index of the maximum of `values`; ties within `tolerance` resolved per `rule`.
std::size_t argmax(std::span<const double> values, TieBreak rule, Rng* rng, double tolerance = 0.0);

// Decaying schedule is epsilon0 / sqrt(t) for t >= 1.
double decayed_epsilon(double epsilon0, std::uint64_t t);

std::size_t act_epsilon_greedy(const ArmStats& stats, double epsilon, Rng& rng,
                               TieBreak rule = TieBreak::LowestIndex);

// Plays the lowest-indexed unplayed arm first, then argmax of mean + sqrt(alpha ln t / N).
std::size_t act_ucb1(const ArmStats& stats, double alpha, TieBreak rule = TieBreak::LowestIndex,
                     Rng* rng = nullptr);

std::vector<double> ucb1_indices(const ArmStats& stats, double alpha);

enum class Exp3sShare { AllArms, PlayedArmOnly };

struct Exp3State {
  std::vector<double> weights;
  double gamma = 0.1;
  double delta = 1e-4;  // EXP3S only
  Exp3sShare share = Exp3sShare::AllArms;

  Exp3State() = default;
  Exp3State(std::size_t arms, double gamma_, double delta_ = 1e-4)
      : weights(arms, 1.0), gamma(gamma_), delta(delta_) {}
  std::size_t arms() const { return weights.size(); }
};

inline constexpr double kWeightCeiling = 1e100;

// Divides all weights by their maximum once any weight exceeds kWeightCeiling.
void rescale_weights(Exp3State& state);

std::vector<double> exp3_probabilities(const Exp3State& state);

void exp3_update(Exp3State& state, std::size_t arm, double reward, double p_arm);

void exp3s_update(Exp3State& state, std::size_t arm, double reward, double p_arm);

std::size_t sample_index(std::span<const double> probabilities, Rng& rng);

enum class AgentKind { EpsilonGreedy, Ucb1, Exp3, Exp3s, UcbRs, Random };

std::string_view to_string(AgentKind kind);
std::optional<AgentKind> parse_agent_kind(std::string_view text);

// Everything needed to instantiate a baseline agent. UCB-RS parameters live in UcbRsConfig.
struct AgentConfig {
  AgentKind kind = AgentKind::Ucb1;
  double epsilon = 0.1;
  bool epsilon_decay = false;
  // Epsilon-greedy plays each unplayed arm once, lowest index first, before
  // its greedy/random choice.
  bool forced_init = true;
  double alpha = 2.0;
  double gamma = 0.1;
  double delta = 1e-4;
  Exp3sShare exp3s_share = Exp3sShare::AllArms;
  TieBreak tie_break = TieBreak::LowestIndex;
  std::uint64_t seed = 0;

  void validate() const;
};

// One instance per simulated user.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::size_t act() = 0;
  virtual void observe_reward(std::size_t arm, bool click) = 0;
  // Organic views; baselines ignore them.
  virtual void observe_view(std::size_t /*product*/) {}
};

class RandomAgent final : public Agent {
 public:
  RandomAgent(std::size_t arms, std::uint64_t seed) : arms_(arms), rng_(seed) {}
  std::size_t act() override;
  void observe_reward(std::size_t, bool) override {}

 private:
  std::size_t arms_;
  Rng rng_;
};

class EpsilonGreedyAgent final : public Agent {
 public:
  EpsilonGreedyAgent(std::size_t arms, const AgentConfig& config);
  std::size_t act() override;
  void observe_reward(std::size_t arm, bool click) override { stats_.record(arm, click ? 1.0 : 0.0); }
  const ArmStats& stats() const { return stats_; }

 private:
  ArmStats stats_;
  AgentConfig config_;
  Rng rng_;
};

class Ucb1Agent final : public Agent {
 public:
  Ucb1Agent(std::size_t arms, const AgentConfig& config);
  std::size_t act() override;
  void observe_reward(std::size_t arm, bool click) override { stats_.record(arm, click ? 1.0 : 0.0); }
  const ArmStats& stats() const { return stats_; }

 private:
  ArmStats stats_;
  AgentConfig config_;
  Rng rng_;
};

class Exp3Agent final : public Agent {
 public:
  Exp3Agent(std::size_t arms, const AgentConfig& config, bool shifting);
  std::size_t act() override;
  void observe_reward(std::size_t arm, bool click) override;
  const Exp3State& state() const { return state_; }

 private:
  Exp3State state_;
  bool shifting_;
  std::vector<double> last_probabilities_;
  Rng rng_;
};

std::unique_ptr<Agent> make_baseline_agent(std::size_t arms, const AgentConfig& config);

}  // namespace banditlab

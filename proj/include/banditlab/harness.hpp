#pragma once

// Experiment orchestration: agents x sweep values x environment seeds x test
// users, CTR aggregation, and report export.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "banditlab/agents.hpp"
#include "banditlab/env.hpp"
#include "banditlab/episode.hpp"
#include "banditlab/refset.hpp"
#include "banditlab/stats.hpp"
#include "banditlab/ucb_rs.hpp"

namespace banditlab {

inline constexpr std::string_view kVersion = "0.3.0";

struct AgentSpec {
  std::string name;
  AgentKind kind = AgentKind::Ucb1;
  AgentConfig baseline;
  UcbRsConfig ucb_rs;

  void validate() const;
};

// The seven agents of the standard comparison, in table column order.
std::vector<AgentSpec> default_agents();

enum class SweepAxis { None, SigmaMu, Lambda, TopN, Products };

std::string_view to_string(SweepAxis axis);
std::optional<SweepAxis> parse_sweep_axis(std::string_view text);

enum class RefsetMode { Generate, Files, None };

struct RefsetSource {
  RefsetMode mode = RefsetMode::Generate;
  std::vector<std::filesystem::path> files;
  RefsetOptions options;
};

struct ExperimentConfig {
  EnvConfig env;
  std::vector<AgentSpec> agents = default_agents();
  std::size_t num_test_users = 100;
  std::uint64_t master_seed = 1;
  // Environment (catalog) seeds; each is one repetition.
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SweepAxis axis = SweepAxis::None;
  std::vector<double> sweep_values;
  RefsetSource refset;
  std::size_t bootstrap_resamples = 2000;
  double confidence = 0.95;
  bool export_events = false;
  std::filesystem::path output_dir = "banditlab-out";

  void validate() const;

  // One entry per cell column; {0.0} when there is no sweep axis.
  std::vector<double> cell_values() const;
};

// Applies a sweep value to the environment.
EnvConfig env_for_cell(const ExperimentConfig& config, double value, std::uint64_t seed);
// Applies a sweep value to an agent.
AgentSpec agent_for_cell(const ExperimentConfig& config, const AgentSpec& agent, double value);

// Seeds shared by every agent within a cell, so comparisons are paired.
std::uint64_t test_user_seed(std::uint64_t master_seed, std::uint64_t env_seed, double value, std::size_t user);
std::uint64_t agent_seed(std::uint64_t master_seed, std::uint64_t env_seed, double value, std::string_view agent,
                         std::size_t user);

// Instantiates an agent; UCB-RS agents need the matching reference index.
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, std::size_t arms, std::uint64_t seed,
                                  std::shared_ptr<const ReferenceIndex> index);

struct UserResult {
  std::uint64_t clicks = 0;
  std::uint64_t displays = 0;
  std::uint64_t events = 0;
  std::optional<double> ctr;
};

struct CellResult {
  std::string agent;
  double value = 0.0;
  std::uint64_t seed = 0;
  std::vector<UserResult> users;
  std::vector<double> ctrs;  // users with at least one display, in user order
  double mean_ctr = 0.0;
  std::size_t excluded_users = 0;
};

// Pooled over seeds for one (agent, sweep value).
struct AgentSummary {
  std::string agent;
  double value = 0.0;
  std::vector<double> ctrs;
  double mean_ctr = 0.0;
  Interval ci;
  double seed_stddev = 0.0;  // dispersion of the per-seed means
  std::size_t excluded_users = 0;
  std::vector<CdfPoint> cdf;
};

struct MetricsReport {
  ExperimentConfig config;
  std::vector<CellResult> cells;       // agent-major, then value, then seed
  std::vector<AgentSummary> summaries;  // agent-major, then value
  std::map<std::string, std::string> refset_fingerprints;  // env fingerprint -> retained/pool
  std::string version{kVersion};

  const AgentSummary& summary(std::string_view agent, double value) const;
};

MetricsReport run_experiment(const ExperimentConfig& config, std::size_t threads = 1);

// The cells and summaries of one sweep value, written to `output_dir`.
MetricsReport slice_report(const MetricsReport& report, double value, const std::filesystem::path& output_dir);

// Directory-safe label of a sweep value, e.g. "0.25"; "none" without an axis.
std::string value_label(SweepAxis axis, double value);

// Files written under config.output_dir; returns their paths in write order.
std::vector<std::filesystem::path> export_report(const MetricsReport& report);

// Parses comparison.csv back into value -> agent -> mean CTR (percent).
std::map<double, std::map<std::string, double>> read_comparison_table(const std::filesystem::path& path);

}  // namespace banditlab

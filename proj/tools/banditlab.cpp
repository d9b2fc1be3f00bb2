// banditlab: generate reference sets, run agent comparisons and sweeps.
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include "banditlab/config.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/harness.hpp"
#include "banditlab/parallel.hpp"
#include "banditlab/refset.hpp"

namespace {

using banditlab::ConfigError;
using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return fmt::format("{:016x}", banditlab::fnv1a(buffer.str()));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& path, const std::string& command, Json config, Json inputs,
                    Json outputs, Clock::time_point started) {
  Json m;
  m["tool_version"] = banditlab::kVersion;
  m["command"] = command;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  m["started_at"] = utc_now();
  m["duration_seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << m.dump(2) << '\n';
}

// Flags shared by `run` and `sweep`; unset flags keep the config file value.
struct RunFlags {
  std::string config_path;
  std::vector<std::string> agents;
  std::optional<std::size_t> users;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> master_seed;
  std::vector<std::string> refsets;
  std::optional<std::size_t> products;
  std::optional<double> sigma_mu;
  std::optional<std::size_t> pool_size;
  std::string out;
  bool export_events = false;
  std::string axis;
  std::vector<double> values;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--config", f.config_path, "YAML experiment config (or a manifest.json to replay)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--agents", f.agents, "Agents to run, by config name or kind (default: all configured)")
      ->delimiter(',');
  cmd.add_option("--users", f.users, "Test users per cell [100]");
  cmd.add_option("--seeds", f.seeds, "Environment seeds, one repetition each [1..10]")->delimiter(',');
  cmd.add_option("--master-seed", f.master_seed, "Master seed for user and agent streams [1]");
  cmd.add_option("--refset", f.refsets, "Reference set file(s) from gen-refset (default: generate in memory)")
      ->delimiter(',')
      ->check(CLI::ExistingFile);
  cmd.add_option("--products", f.products, "Number of products P [50]");
  cmd.add_option("--sigma-mu", f.sigma_mu, "Popularity spread sigma_mu [10]");
  cmd.add_option("--pool-size", f.pool_size, "Random users simulated when generating a reference set [2000]");
  cmd.add_option("--out", f.out, "Output directory [banditlab-out]");
  cmd.add_flag("--export-events", f.export_events, "Also write per-event JSONL logs");
}

banditlab::ExperimentConfig resolve_config(const RunFlags& f, Json& inputs) {
  banditlab::ExperimentConfig c;
  if (!f.config_path.empty()) {
    c = banditlab::load_experiment_config(f.config_path);
    inputs[f.config_path] = file_fingerprint(f.config_path);
  }
  if (!f.agents.empty()) {
    std::vector<banditlab::AgentSpec> selected;
    for (const auto& name : f.agents) {
      auto it = std::find_if(c.agents.begin(), c.agents.end(), [&](const auto& a) { return a.name == name; });
      if (it != c.agents.end()) {
        selected.push_back(*it);
        continue;
      }
      const auto kind = banditlab::parse_agent_kind(name);
      if (!kind) throw ConfigError(fmt::format("--agents: unknown agent '{}'", name));
      banditlab::AgentSpec a;
      a.name = name;
      a.kind = *kind;
      a.baseline.kind = *kind;
      a.baseline.tie_break = banditlab::TieBreak::UniformRandom;
      selected.push_back(a);
    }
    c.agents = std::move(selected);
  }
  if (f.users) c.num_test_users = *f.users;
  if (!f.seeds.empty()) c.seeds = f.seeds;
  if (f.master_seed) c.master_seed = *f.master_seed;
  if (f.products) c.env.num_products = *f.products;
  if (f.sigma_mu) c.env.sigma_mu = *f.sigma_mu;
  if (f.pool_size) c.refset.options.pool_size = *f.pool_size;
  if (!f.refsets.empty()) {
    c.refset.mode = banditlab::RefsetMode::Files;
    c.refset.files.assign(f.refsets.begin(), f.refsets.end());
  }
  for (const auto& path : c.refset.files) inputs[path.string()] = file_fingerprint(path);
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.export_events) c.export_events = true;
  if (!f.axis.empty()) {
    const auto axis = banditlab::parse_sweep_axis(f.axis);
    if (!axis || *axis == banditlab::SweepAxis::None) {
      throw ConfigError(fmt::format("--axis: invalid sweep axis '{}' (expected sigma-mu, lambda, top-n or products)",
                                    f.axis));
    }
    c.axis = *axis;
  }
  if (!f.values.empty()) c.sweep_values = f.values;
  c.validate();
  return c;
}

Json output_list(const std::vector<std::filesystem::path>& files) {
  Json out = Json::object();
  for (const auto& p : files) out[p.filename().string()] = file_fingerprint(p);
  return out;
}

void print_table(const banditlab::MetricsReport& report) {
  const auto& c = report.config;
  for (double v : c.cell_values()) {
    if (c.axis != banditlab::SweepAxis::None) fmt::print("{} = {}\n", banditlab::to_string(c.axis), v);
    for (const auto& a : c.agents) {
      const auto& s = report.summary(a.name, v);
      fmt::print("  {:<16} mean CTR {:7.4f}%  95% CI [{:.4f}, {:.4f}]  users {}\n", a.name, 100.0 * s.mean_ctr,
                 100.0 * s.ci.low, 100.0 * s.ci.high, s.ctrs.size());
    }
  }
}

int cmd_run(const RunFlags& f, bool sweep) {
  const auto started = Clock::now();
  Json inputs = Json::object();
  auto config = resolve_config(f, inputs);
  if (sweep && config.axis == banditlab::SweepAxis::None) {
    throw ConfigError("sweep: --axis is required (sigma-mu, lambda, top-n or products)");
  }
  if (sweep && config.sweep_values.empty()) throw ConfigError("sweep: --values must be nonempty");
  const auto report = banditlab::run_experiment(config, banditlab::default_threads());
  auto written = banditlab::export_report(report);
  Json outputs = output_list(written);
  if (sweep) {
    for (double v : config.cell_values()) {
      const auto sub = config.output_dir / fmt::format("{}_{}", banditlab::to_string(config.axis),
                                                       banditlab::value_label(config.axis, v));
      const auto files = banditlab::export_report(banditlab::slice_report(report, v, sub));
      for (const auto& p : files) {
        outputs[std::filesystem::relative(p, config.output_dir).generic_string()] = file_fingerprint(p);
      }
    }
  }
  Json refsets = Json::object();
  for (const auto& [fp, counts] : report.refset_fingerprints) refsets[fp] = counts;
  inputs["reference_sets"] = refsets;
  write_manifest(config.output_dir / "manifest.json", sweep ? "sweep" : "run", banditlab::to_json(config), inputs,
                 outputs, started);
  print_table(report);
  fmt::print("wrote {} files to {}\n", written.size(), config.output_dir.string());
  return 0;
}

struct GenFlags {
  std::string config_path;
  std::optional<std::size_t> products;
  std::optional<double> sigma_mu;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> pool_size;
  std::optional<std::uint64_t> min_events;
  std::optional<bool> require_click;
  std::optional<std::uint64_t> generation_seed;
  std::string out;
};

int cmd_gen_refset(const GenFlags& f) {
  const auto started = Clock::now();
  Json inputs = Json::object();
  banditlab::ExperimentConfig c;
  if (!f.config_path.empty()) {
    c = banditlab::load_experiment_config(f.config_path);
    inputs[f.config_path] = file_fingerprint(f.config_path);
  }
  if (f.products) c.env.num_products = *f.products;
  if (f.sigma_mu) c.env.sigma_mu = *f.sigma_mu;
  if (f.seed) c.env.seed = *f.seed;
  auto& opts = c.refset.options;
  if (f.pool_size) opts.pool_size = *f.pool_size;
  if (f.min_events) opts.filter.min_events = *f.min_events;
  if (f.require_click) opts.filter.require_click = *f.require_click;
  if (f.generation_seed) opts.generation_seed = *f.generation_seed;
  if (opts.pool_size < 1) throw ConfigError("--pool-size must be >= 1");
  c.env.validate();

  const banditlab::Environment env(c.env);
  const auto file = banditlab::make_reference_set(env, opts, banditlab::default_threads());
  const std::filesystem::path out(f.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  banditlab::save_reference_set(out, file);

  Json config;
  config["env"] = banditlab::to_json(c.env);
  config["refset"] = {{"pool_size", opts.pool_size},
                      {"min_events", opts.filter.min_events},
                      {"require_click", opts.filter.require_click},
                      {"generation_seed", file.generation_seed}};
  Json outputs = Json::object();
  outputs[out.filename().string()] = file_fingerprint(out);
  auto manifest = out;
  manifest += ".manifest.json";
  write_manifest(manifest, "gen-refset", config, inputs, outputs, started);
  fmt::print("retained {} of {} users (P={}, env {})\nwrote {}\n", file.records.size(), file.pool_size,
             file.num_products, file.env_fingerprint, out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"banditlab: bandit recommenders on a simulated shopper population"};
  app.set_version_flag("--version", std::string(banditlab::kVersion));
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-refset", "Simulate random users and save a filtered reference set");
  gen_cmd->add_option("--config", gen.config_path, "YAML config; its env and refset sections are used")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--products", gen.products, "Number of products P [50]");
  gen_cmd->add_option("--sigma-mu", gen.sigma_mu, "Popularity spread sigma_mu [10]");
  gen_cmd->add_option("--seed", gen.seed, "Environment (catalog) seed [0]");
  gen_cmd->add_option("--pool-size", gen.pool_size, "Random users to simulate [2000]");
  gen_cmd->add_option("--min-events", gen.min_events, "Keep users with at least this many events [100]");
  gen_cmd->add_option("--require-click", gen.require_click,
                      "Also keep shorter users with at least one click [true]");
  gen_cmd->add_option("--generation-seed", gen.generation_seed, "Pool seed [derived from the environment]");
  gen_cmd->add_option("--out", gen.out, "Output file")->required();

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Compare agents over paired test users and seeds");
  add_run_flags(*run_cmd, run);

  RunFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one comparison per value of a parameter");
  add_run_flags(*sweep_cmd, sweep);
  sweep_cmd->add_option("--axis", sweep.axis, "Swept parameter: sigma-mu, lambda, top-n or products");
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated sweep values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_refset(gen);
    if (*run_cmd) return cmd_run(run, false);
    if (*sweep_cmd) return cmd_run(sweep, true);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

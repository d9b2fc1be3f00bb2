#include "banditlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "banditlab/errors.hpp"
#include "banditlab/parallel.hpp"
#include "banditlab/svg.hpp"

namespace banditlab {
namespace {

constexpr std::uint64_t kUserTag = 0x05E4;
constexpr std::uint64_t kAgentTag = 0xA6E7;
constexpr std::uint64_t kBootstrapTag = 0xB007;

bool is_ucb_rs(const AgentSpec& a) { return a.kind == AgentKind::UcbRs; }

std::string fmt9(double v) { return fmt::format("{:.9g}", v); }

void write_text(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
  written.push_back(path);
}

}  // namespace

std::string value_label(SweepAxis axis, double value) {
  return axis == SweepAxis::None ? std::string("none") : fmt9(value);
}

void AgentSpec::validate() const {
  if (name.empty()) throw ConfigError("agent name must not be empty");
  if (kind == AgentKind::UcbRs) {
    ucb_rs.validate();
  } else {
    baseline.validate();
  }
}

std::vector<AgentSpec> default_agents() {
  std::vector<AgentSpec> agents;
  auto baseline = [&](std::string name, AgentKind kind) {
    AgentSpec a;
    a.name = std::move(name);
    a.kind = kind;
    a.baseline.kind = kind;
    a.baseline.tie_break = TieBreak::UniformRandom;
    agents.push_back(a);
  };
  auto ucb_rs = [&](std::string name, UcbRsVariant variant) {
    AgentSpec a;
    a.name = std::move(name);
    a.kind = AgentKind::UcbRs;
    a.baseline.kind = AgentKind::UcbRs;
    a.ucb_rs.variant = variant;
    agents.push_back(a);
  };
  baseline("epsilon-greedy", AgentKind::EpsilonGreedy);
  baseline("exp3", AgentKind::Exp3);
  baseline("exp3s", AgentKind::Exp3s);
  baseline("ucb1", AgentKind::Ucb1);
  ucb_rs("ucb-rs-1", UcbRsVariant::CtrFeatures);
  ucb_rs("ucb-rs-2", UcbRsVariant::ViewFeatures);
  ucb_rs("ucb-rs-3", UcbRsVariant::Combined);
  return agents;
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::None: return "none";
    case SweepAxis::SigmaMu: return "sigma-mu";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::TopN: return "top-n";
    case SweepAxis::Products: return "products";
  }
  return "unknown";
}

std::optional<SweepAxis> parse_sweep_axis(std::string_view text) {
  for (auto axis : {SweepAxis::None, SweepAxis::SigmaMu, SweepAxis::Lambda, SweepAxis::TopN, SweepAxis::Products}) {
    if (text == to_string(axis)) return axis;
  }
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  EnvConfig probe = env;
  probe.validate();
  if (agents.empty()) throw ConfigError("at least one agent is required");
  std::set<std::string> names;
  for (const auto& a : agents) {
    a.validate();
    if (!names.insert(a.name).second) throw ConfigError(fmt::format("duplicate agent name '{}'", a.name));
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (num_test_users < 1) throw ConfigError("num_test_users must be >= 1");
  if (axis != SweepAxis::None && sweep_values.empty()) throw ConfigError("sweep values must be nonempty");
  for (double v : sweep_values) {
    if (!std::isfinite(v)) throw ConfigError("sweep values must be finite");
    switch (axis) {
      case SweepAxis::SigmaMu:
        if (v < 0.0) throw ConfigError(fmt::format("sigma-mu sweep value {} is negative", v));
        break;
      case SweepAxis::Lambda:
        if (v < 0.0 || v > 1.0) throw ConfigError(fmt::format("lambda sweep value {} outside [0,1]", v));
        break;
      case SweepAxis::TopN:
      case SweepAxis::Products:
        if (v < 1.0 || v != std::floor(v)) {
          throw ConfigError(fmt::format("{} sweep value {} must be a positive integer", to_string(axis), v));
        }
        if (axis == SweepAxis::Products && v < 2.0) throw ConfigError("products sweep values must be >= 2");
        break;
      case SweepAxis::None:
        break;
    }
  }
  if (bootstrap_resamples < 1) throw ConfigError("bootstrap_resamples must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must be in (0,1)");
  if (refset.mode == RefsetMode::Files && refset.files.empty()) {
    throw ConfigError("refset source 'files' needs at least one path");
  }
}

std::vector<double> ExperimentConfig::cell_values() const {
  if (axis == SweepAxis::None) return {0.0};
  return sweep_values;
}

EnvConfig env_for_cell(const ExperimentConfig& config, double value, std::uint64_t seed) {
  EnvConfig env = config.env;
  env.seed = seed;
  if (config.axis == SweepAxis::SigmaMu) env.sigma_mu = value;
  if (config.axis == SweepAxis::Products) env.num_products = static_cast<std::size_t>(value);
  return env;
}

AgentSpec agent_for_cell(const ExperimentConfig& config, const AgentSpec& agent, double value) {
  AgentSpec a = agent;
  if (a.kind == AgentKind::UcbRs) {
    if (config.axis == SweepAxis::Lambda) a.ucb_rs.lambda = value;
    if (config.axis == SweepAxis::TopN) a.ucb_rs.top_n = static_cast<std::size_t>(value);
  }
  return a;
}

std::uint64_t test_user_seed(std::uint64_t master_seed, std::uint64_t env_seed, double value, std::size_t user) {
  return derive_seed({master_seed, kUserTag, env_seed, double_bits(value), user});
}

std::uint64_t agent_seed(std::uint64_t master_seed, std::uint64_t env_seed, double value, std::string_view agent,
                         std::size_t user) {
  return derive_seed({master_seed, kAgentTag, env_seed, double_bits(value), fnv1a(agent), user});
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, std::size_t arms, std::uint64_t seed,
                                  std::shared_ptr<const ReferenceIndex> index) {
  if (spec.kind == AgentKind::UcbRs) {
    UcbRsConfig c = spec.ucb_rs;
    c.seed = seed;
    if (!index) {
      throw ReferenceSetError(fmt::format("agent '{}' needs a reference set; generate one with gen-refset", spec.name));
    }
    return std::make_unique<UcbRsAgent>(std::move(index), c);
  }
  AgentConfig c = spec.baseline;
  c.kind = spec.kind;
  c.seed = seed;
  return make_baseline_agent(arms, c);
}

const AgentSummary& MetricsReport::summary(std::string_view agent, double value) const {
  for (const auto& s : summaries) {
    if (s.agent == agent && s.value == value) return s;
  }
  throw std::out_of_range(fmt::format("no summary for agent '{}' at value {}", agent, value));
}

MetricsReport slice_report(const MetricsReport& report, double value, const std::filesystem::path& output_dir) {
  MetricsReport slice;
  slice.config = report.config;
  slice.config.sweep_values = {value};
  slice.config.output_dir = output_dir;
  slice.version = report.version;
  slice.refset_fingerprints = report.refset_fingerprints;
  for (const auto& c : report.cells) {
    if (c.value == value) slice.cells.push_back(c);
  }
  for (const auto& s : report.summaries) {
    if (s.value == value) slice.summaries.push_back(s);
  }
  if (slice.summaries.empty()) throw std::out_of_range(fmt::format("no cells at sweep value {}", value));
  return slice;
}

MetricsReport run_experiment(const ExperimentConfig& config, std::size_t threads) {
  config.validate();
  const auto values = config.cell_values();
  const bool need_refs = std::any_of(config.agents.begin(), config.agents.end(), is_ucb_rs);

  // Environments, deduplicated by fingerprint.
  std::map<std::string, std::shared_ptr<const Environment>> envs;
  std::map<std::pair<std::size_t, std::size_t>, std::string> env_of_cell;  // (value idx, seed idx)
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const EnvConfig ec = env_for_cell(config, values[v], config.seeds[s]);
      const auto fp = ec.fingerprint();
      if (!envs.count(fp)) envs[fp] = std::make_shared<const Environment>(ec);
      env_of_cell[{v, s}] = fp;
    }
  }

  MetricsReport report;
  report.config = config;

  std::map<std::string, std::shared_ptr<const std::vector<ReferenceRecord>>> refs;
  if (need_refs) {
    if (config.refset.mode == RefsetMode::None) {
      throw ReferenceSetError("UCB-RS agents need a reference set; generate one with gen-refset or enable refset generation");
    }
    std::map<std::string, ReferenceSetFile> loaded;
    if (config.refset.mode == RefsetMode::Files) {
      for (const auto& path : config.refset.files) {
        auto file = load_reference_set(path);
        loaded[file.env_fingerprint] = std::move(file);
      }
    }
    for (const auto& [fp, env] : envs) {
      ReferenceSetFile file;
      if (config.refset.mode == RefsetMode::Generate) {
        file = make_reference_set(*env, config.refset.options, threads);
      } else {
        auto it = loaded.find(fp);
        if (it == loaded.end()) {
          throw ReferenceSetError(fmt::format("no reference set file matches environment {} ({})", fp,
                                              env->config().canonical()));
        }
        file = it->second;
      }
      report.refset_fingerprints[fp] = fmt::format("{}/{}", file.records.size(), file.pool_size);
      refs[fp] = file.shared_records();
    }
  }

  // Reference indices keyed by (env fingerprint, feature kind, theta).
  std::map<std::string, std::shared_ptr<const ReferenceIndex>> indices;
  auto index_key = [](const std::string& fp, const UcbRsConfig& c) {
    return fmt::format("{}/{}/{:.17g}", fp, static_cast<int>(c.variant), c.theta);
  };

  struct Task {
    std::size_t cell;
    std::size_t user;
  };
  struct CellPlan {
    AgentSpec agent;
    std::size_t value_index;
    std::size_t seed_index;
    std::shared_ptr<const Environment> env;
    std::shared_ptr<const ReferenceIndex> index;
  };
  std::vector<CellPlan> plans;
  for (const auto& agent : config.agents) {
    for (std::size_t v = 0; v < values.size(); ++v) {
      for (std::size_t s = 0; s < config.seeds.size(); ++s) {
        CellPlan plan{agent_for_cell(config, agent, values[v]), v, s, nullptr, nullptr};
        const auto& fp = env_of_cell.at({v, s});
        plan.env = envs.at(fp);
        if (is_ucb_rs(plan.agent)) {
          const auto key = index_key(fp, plan.agent.ucb_rs);
          auto& idx = indices[key];
          if (!idx) {
            idx = std::make_shared<const ReferenceIndex>(refs.at(fp), feature_kind(plan.agent.ucb_rs.variant),
                                                         plan.agent.ucb_rs.theta);
          }
          plan.index = idx;
        }
        plans.push_back(std::move(plan));
      }
    }
  }

  const std::size_t U = config.num_test_users;
  std::vector<UserResult> results(plans.size() * U);
  std::vector<std::vector<EventRecord>> events(config.export_events ? results.size() : 0);
  parallel_for(results.size(), threads, [&](std::size_t task) {
    const std::size_t c = task / U;
    const std::size_t u = task % U;
    const auto& plan = plans[c];
    const double value = values[plan.value_index];
    const std::uint64_t env_seed = config.seeds[plan.seed_index];
    auto agent = make_agent(plan.agent, plan.env->num_products(),
                            agent_seed(config.master_seed, env_seed, value, plan.agent.name, u), plan.index);
    EventSink sink;
    if (config.export_events) sink = [&events, task](const EventRecord& e) { events[task].push_back(e); };
    const auto tally = run_episode(*plan.env, *agent, test_user_seed(config.master_seed, env_seed, value, u), sink, u);
    results[task] = {tally.clicks, tally.displays, tally.events, tally.ctr()};
  });

  for (std::size_t c = 0; c < plans.size(); ++c) {
    CellResult cell;
    cell.agent = plans[c].agent.name;
    cell.value = values[plans[c].value_index];
    cell.seed = config.seeds[plans[c].seed_index];
    cell.users.assign(results.begin() + static_cast<std::ptrdiff_t>(c * U),
                      results.begin() + static_cast<std::ptrdiff_t>((c + 1) * U));
    for (const auto& u : cell.users) {
      if (u.ctr) {
        cell.ctrs.push_back(*u.ctr);
      } else {
        ++cell.excluded_users;
      }
    }
    cell.mean_ctr = cell.ctrs.empty() ? 0.0 : mean(cell.ctrs);
    report.cells.push_back(std::move(cell));
  }

  for (const auto& agent : config.agents) {
    for (double value : values) {
      AgentSummary s;
      s.agent = agent.name;
      s.value = value;
      std::vector<double> seed_means;
      for (const auto& cell : report.cells) {
        if (cell.agent != agent.name || cell.value != value) continue;
        s.ctrs.insert(s.ctrs.end(), cell.ctrs.begin(), cell.ctrs.end());
        s.excluded_users += cell.excluded_users;
        if (!cell.ctrs.empty()) seed_means.push_back(cell.mean_ctr);
      }
      if (!s.ctrs.empty()) {
        s.mean_ctr = mean(s.ctrs);
        s.ci = bootstrap_mean_ci(s.ctrs, config.confidence, config.bootstrap_resamples,
                                 derive_seed({config.master_seed, kBootstrapTag, fnv1a(agent.name), double_bits(value)}));
        s.cdf = compute_cdf(s.ctrs);
      }
      s.seed_stddev = stddev(seed_means);
      report.summaries.push_back(std::move(s));
    }
  }

  if (config.export_events) {
    std::filesystem::create_directories(config.output_dir / "events");
    for (std::size_t c = 0; c < plans.size(); ++c) {
      const auto& cell = report.cells[c];
      const auto path = config.output_dir / "events" /
                        fmt::format("{}_{}_{}.jsonl", cell.agent, value_label(config.axis, cell.value), cell.seed);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      for (std::size_t u = 0; u < U; ++u) {
        for (const auto& e : events[c * U + u]) write_event(out, e);
      }
    }
  }
  return report;
}

std::vector<std::filesystem::path> export_report(const MetricsReport& report) {
  const auto& config = report.config;
  const auto dir = config.output_dir;
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto values = config.cell_values();
  const auto axis = to_string(config.axis);

  // Mean CTR in percent; one row per sweep value, one column per agent.
  {
    std::ostringstream out;
    out << axis;
    for (const auto& a : config.agents) out << ',' << a.name;
    out << '\n';
    for (double v : values) {
      out << value_label(config.axis, v);
      for (const auto& a : config.agents) out << ',' << fmt9(100.0 * report.summary(a.name, v).mean_ctr);
      out << '\n';
    }
    write_text(dir / "comparison.csv", out.str(), written);
  }
  {
    std::ostringstream out;
    out << "agent," << axis << ",users,excluded_users,mean_ctr,ci_low,ci_high,seed_stddev\n";
    for (const auto& s : report.summaries) {
      out << fmt::format("{},{},{},{},{},{},{},{}\n", s.agent, value_label(config.axis, s.value), s.ctrs.size(),
                         s.excluded_users, fmt9(s.mean_ctr), fmt9(s.ci.low), fmt9(s.ci.high), fmt9(s.seed_stddev));
    }
    write_text(dir / "summary.csv", out.str(), written);
  }
  {
    std::ostringstream out;
    out << "agent," << axis << ",seed,users,excluded_users,mean_ctr\n";
    for (const auto& c : report.cells) {
      out << fmt::format("{},{},{},{},{},{}\n", c.agent, value_label(config.axis, c.value), c.seed, c.ctrs.size(),
                         c.excluded_users, fmt9(c.mean_ctr));
    }
    write_text(dir / "cells.csv", out.str(), written);
  }
  {
    std::ostringstream out;
    out << "agent," << axis << ",seed,user,clicks,displays,events,ctr\n";
    for (const auto& c : report.cells) {
      for (std::size_t u = 0; u < c.users.size(); ++u) {
        const auto& r = c.users[u];
        out << fmt::format("{},{},{},{},{},{},{},{}\n", c.agent, value_label(config.axis, c.value), c.seed, u,
                           r.clicks, r.displays, r.events, r.ctr ? fmt::format("{:.17g}", *r.ctr) : std::string());
      }
    }
    write_text(dir / "per_user_ctr.csv", out.str(), written);
  }
  {
    std::ostringstream out;
    out << "agent," << axis << ",ctr,fraction\n";
    for (const auto& s : report.summaries) {
      for (const auto& p : s.cdf) {
        out << fmt::format("{},{},{},{}\n", s.agent, value_label(config.axis, s.value), fmt9(p.threshold),
                           fmt9(p.fraction));
      }
    }
    write_text(dir / "cdf.csv", out.str(), written);
  }

  for (double v : values) {
    std::vector<PlotSeries> curves;
    for (const auto& a : config.agents) {
      PlotSeries series{a.name, {}};
      for (const auto& p : report.summary(a.name, v).cdf) series.points.push_back({100.0 * p.threshold, p.fraction});
      curves.push_back(std::move(series));
    }
    const auto label = value_label(config.axis, v);
    const auto title = config.axis == SweepAxis::None ? std::string("CDF of per-user CTR")
                                                      : fmt::format("CDF of per-user CTR, {} = {}", axis, label);
    write_text(dir / fmt::format("cdf_{}.svg", label),
               render_line_chart(title, "CTR [%]", "fraction of users", curves, /*step=*/true), written);
  }
  if (config.axis != SweepAxis::None) {
    std::vector<PlotSeries> curves;
    for (const auto& a : config.agents) {
      PlotSeries series{a.name, {}};
      for (double v : values) series.points.push_back({v, 100.0 * report.summary(a.name, v).mean_ctr});
      curves.push_back(std::move(series));
    }
    write_text(dir / "sweep.svg",
               render_line_chart(fmt::format("Mean CTR vs {}", axis), std::string(axis), "mean CTR [%]", curves,
                                 /*step=*/false),
               written);
  }
  return written;
}

std::map<double, std::map<std::string, double>> read_comparison_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  std::map<double, std::map<std::string, double>> table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw std::runtime_error("ragged comparison table row");
    const double key = cells[0] == "none" ? 0.0 : std::stod(cells[0]);
    for (std::size_t i = 1; i < cells.size(); ++i) table[key][header[i]] = std::stod(cells[i]);
  }
  return table;
}

}  // namespace banditlab

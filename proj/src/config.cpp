#include "banditlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "banditlab/errors.hpp"

namespace banditlab {
namespace {

using Json = nlohmann::ordered_json;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& message) const {
    const auto mark = node.Mark();
    if (mark.is_null()) throw ConfigError(fmt::format("{}: {}: {}", source_, field, message));
    throw ConfigError(fmt::format("{}:{}:{}: {}: {}", source_, mark.line + 1, mark.column + 1, field, message));
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a scalar value");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, field, fmt::format("cannot interpret '{}' as {}", node.Scalar(), type_name<T>()));
    }
  }

  template <typename T>
  void read(const YAML::Node& map, const char* key, const std::string& prefix, T& out) const {
    if (const auto node = map[key]) out = scalar<T>(node, prefix + "." + key);
  }

  void require_map(const YAML::Node& node, const std::string& field) const {
    if (!node.IsMap()) fail(node, field, "expected a mapping");
  }

  void reject_unknown(const YAML::Node& map, const std::string& prefix, std::initializer_list<const char*> known) const {
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) fail(kv.first, prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
  }

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    if constexpr (std::is_integral_v<T>) return "a nonnegative integer";
    return "a string";
  }

  std::string source_;
};

void read_env(const Reader& r, const YAML::Node& node, EnvConfig& env) {
  const std::string p = "env";
  r.require_map(node, p);
  r.reject_unknown(node, p,
                   {"num_products", "latent_dim", "sigma_omega", "sigma_mu", "p_bandit_to_organic",
                    "p_organic_to_bandit", "p_leave_bandit", "p_leave_organic", "sigma_drift", "click_scale",
                    "click_offset", "click_cap", "target_ctr", "seed"});
  r.read(node, "num_products", p, env.num_products);
  r.read(node, "latent_dim", p, env.latent_dim);
  r.read(node, "sigma_omega", p, env.sigma_omega);
  r.read(node, "sigma_mu", p, env.sigma_mu);
  r.read(node, "p_bandit_to_organic", p, env.p_bandit_to_organic);
  r.read(node, "p_organic_to_bandit", p, env.p_organic_to_bandit);
  r.read(node, "p_leave_bandit", p, env.p_leave_bandit);
  r.read(node, "p_leave_organic", p, env.p_leave_organic);
  r.read(node, "sigma_drift", p, env.sigma_drift);
  r.read(node, "click_scale", p, env.click_scale);
  if (const auto offset = node["click_offset"]) {
    if (offset.IsNull() || (offset.IsScalar() && offset.Scalar() == "auto")) {
      env.click_offset.reset();
    } else {
      env.click_offset = r.scalar<double>(offset, "env.click_offset");
    }
  }
  r.read(node, "click_cap", p, env.click_cap);
  r.read(node, "target_ctr", p, env.target_ctr);
  r.read(node, "seed", p, env.seed);
}

TieBreak parse_tie_break(const Reader& r, const YAML::Node& node, const std::string& field) {
  const auto text = r.scalar<std::string>(node, field);
  if (text == "lowest") return TieBreak::LowestIndex;
  if (text == "random") return TieBreak::UniformRandom;
  r.fail(node, field, fmt::format("unknown tie-break rule '{}' (expected lowest or random)", text));
}

AgentSpec read_agent(const Reader& r, const std::string& name, const YAML::Node& node) {
  const std::string p = "agents." + name;
  r.require_map(node, p);
  AgentSpec a;
  a.name = name;
  const auto kind_node = node["kind"];
  if (!kind_node) r.fail(node, p + ".kind", "missing agent kind");
  const auto kind_text = r.scalar<std::string>(kind_node, p + ".kind");
  const auto kind = parse_agent_kind(kind_text);
  if (!kind) {
    r.fail(kind_node, p + ".kind",
           fmt::format("unknown agent kind '{}' (expected epsilon-greedy, ucb1, exp3, exp3s, ucb-rs or random)",
                       kind_text));
  }
  a.kind = *kind;
  a.baseline.kind = *kind;
  a.baseline.tie_break = TieBreak::UniformRandom;

  if (a.kind == AgentKind::UcbRs) {
    r.reject_unknown(node, p, {"kind", "variant", "lambda", "theta", "alpha", "top_n", "horizon", "blend", "tie_break"});
    auto& c = a.ucb_rs;
    if (const auto v = node["variant"]) {
      const auto variant = r.scalar<int>(v, p + ".variant");
      if (variant < 1 || variant > 3) r.fail(v, p + ".variant", "variant must be 1, 2 or 3");
      c.variant = static_cast<UcbRsVariant>(variant);
    }
    r.read(node, "lambda", p, c.lambda);
    r.read(node, "theta", p, c.theta);
    r.read(node, "alpha", p, c.alpha);
    r.read(node, "top_n", p, c.top_n);
    r.read(node, "horizon", p, c.horizon);
    if (const auto b = node["blend"]) {
      const auto text = r.scalar<std::string>(b, p + ".blend");
      if (text == "direct") {
        c.blend = CombinedBlend::Direct;
      } else if (text == "nested") {
        c.blend = CombinedBlend::Nested;
      } else {
        r.fail(b, p + ".blend", fmt::format("unknown blend '{}' (expected direct or nested)", text));
      }
    }
    if (const auto t = node["tie_break"]) c.tie_break = parse_tie_break(r, t, p + ".tie_break");
  } else {
    r.reject_unknown(node, p, {"kind", "epsilon", "epsilon_decay", "forced_init", "alpha", "gamma", "delta", "exp3s_share", "tie_break"});
    auto& c = a.baseline;
    r.read(node, "epsilon", p, c.epsilon);
    r.read(node, "epsilon_decay", p, c.epsilon_decay);
    r.read(node, "forced_init", p, c.forced_init);
    r.read(node, "alpha", p, c.alpha);
    r.read(node, "gamma", p, c.gamma);
    r.read(node, "delta", p, c.delta);
    if (const auto s = node["exp3s_share"]) {
      const auto text = r.scalar<std::string>(s, p + ".exp3s_share");
      if (text == "all") {
        c.exp3s_share = Exp3sShare::AllArms;
      } else if (text == "played") {
        c.exp3s_share = Exp3sShare::PlayedArmOnly;
      } else {
        r.fail(s, p + ".exp3s_share", fmt::format("unknown share mode '{}' (expected all or played)", text));
      }
    }
    if (const auto t = node["tie_break"]) c.tie_break = parse_tie_break(r, t, p + ".tie_break");
  }
  try {
    a.validate();
  } catch (const ConfigError& e) {
    r.fail(node, p, e.what());
  }
  return a;
}

template <typename T>
std::vector<T> read_list(const Reader& r, const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) r.fail(node, field, "expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(r.scalar<T>(node[i], fmt::format("{}[{}]", field, i)));
  return out;
}

ExperimentConfig parse_root(const Reader& r, const YAML::Node& root) {
  ExperimentConfig c;
  if (root.IsNull()) return c;
  r.require_map(root, "<root>");
  r.reject_unknown(root, "", {"env", "experiment", "sweep", "refset", "agents"});

  if (const auto env = root["env"]) read_env(r, env, c.env);

  if (const auto ex = root["experiment"]) {
    const std::string p = "experiment";
    r.require_map(ex, p);
    r.reject_unknown(ex, p, {"master_seed", "num_test_users", "seeds", "bootstrap_resamples", "confidence",
                             "export_events", "output_dir"});
    r.read(ex, "master_seed", p, c.master_seed);
    r.read(ex, "num_test_users", p, c.num_test_users);
    if (const auto seeds = ex["seeds"]) c.seeds = read_list<std::uint64_t>(r, seeds, p + ".seeds");
    r.read(ex, "bootstrap_resamples", p, c.bootstrap_resamples);
    r.read(ex, "confidence", p, c.confidence);
    r.read(ex, "export_events", p, c.export_events);
    if (const auto out = ex["output_dir"]) c.output_dir = r.scalar<std::string>(out, p + ".output_dir");
  }

  if (const auto sweep = root["sweep"]) {
    const std::string p = "sweep";
    r.require_map(sweep, p);
    r.reject_unknown(sweep, p, {"axis", "values"});
    if (const auto axis = sweep["axis"]) {
      const auto text = r.scalar<std::string>(axis, p + ".axis");
      const auto parsed = parse_sweep_axis(text);
      if (!parsed) {
        r.fail(axis, p + ".axis",
               fmt::format("unknown sweep axis '{}' (expected none, sigma-mu, lambda, top-n or products)", text));
      }
      c.axis = *parsed;
    }
    if (const auto values = sweep["values"]) c.sweep_values = read_list<double>(r, values, p + ".values");
  }

  if (const auto ref = root["refset"]) {
    const std::string p = "refset";
    r.require_map(ref, p);
    r.reject_unknown(ref, p, {"source", "files", "pool_size", "min_events", "require_click", "generation_seed"});
    if (const auto source = ref["source"]) {
      const auto text = r.scalar<std::string>(source, p + ".source");
      if (text == "generate") {
        c.refset.mode = RefsetMode::Generate;
      } else if (text == "files") {
        c.refset.mode = RefsetMode::Files;
      } else if (text == "none") {
        c.refset.mode = RefsetMode::None;
      } else {
        r.fail(source, p + ".source", fmt::format("unknown source '{}' (expected generate, files or none)", text));
      }
    }
    if (const auto files = ref["files"]) {
      for (const auto& f : read_list<std::string>(r, files, p + ".files")) c.refset.files.emplace_back(f);
    }
    r.read(ref, "pool_size", p, c.refset.options.pool_size);
    r.read(ref, "min_events", p, c.refset.options.filter.min_events);
    r.read(ref, "require_click", p, c.refset.options.filter.require_click);
    if (const auto gs = ref["generation_seed"]; gs && !gs.IsNull()) {
      c.refset.options.generation_seed = r.scalar<std::uint64_t>(gs, p + ".generation_seed");
    }
  }

  if (const auto agents = root["agents"]) {
    r.require_map(agents, "agents");
    c.agents.clear();
    for (const auto& kv : agents) c.agents.push_back(read_agent(r, kv.first.as<std::string>(), kv.second));
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(root, "<root>", e.what());
  }
  return c;
}

std::string tie_break_name(TieBreak t) { return t == TieBreak::LowestIndex ? "lowest" : "random"; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  Reader reader(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: syntax error: {}", source, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  // A run manifest carries its resolved config under `config`.
  if (root.IsMap() && root["config"] && root["tool_version"]) root = root["config"];
  return parse_root(reader, root);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str(), path.string());
}

AgentSpec parse_agent_section(const std::string& name, const std::string& yaml_text) {
  Reader reader("<agent>");
  YAML::Node node;
  try {
    node = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("<agent>:{}:{}: syntax error: {}", e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  return read_agent(reader, name, node);
}

Json to_json(const EnvConfig& env) {
  Json j;
  j["num_products"] = env.num_products;
  j["latent_dim"] = env.latent_dim;
  j["sigma_omega"] = env.sigma_omega;
  j["sigma_mu"] = env.sigma_mu;
  j["p_bandit_to_organic"] = env.p_bandit_to_organic;
  j["p_organic_to_bandit"] = env.p_organic_to_bandit;
  j["p_leave_bandit"] = env.p_leave_bandit;
  j["p_leave_organic"] = env.p_leave_organic;
  j["sigma_drift"] = env.sigma_drift;
  j["click_scale"] = env.click_scale;
  j["click_offset"] = env.click_offset ? Json(*env.click_offset) : Json("auto");
  j["click_cap"] = env.click_cap;
  j["target_ctr"] = env.target_ctr;
  j["seed"] = env.seed;
  return j;
}

Json to_json(const AgentSpec& agent) {
  Json j;
  j["kind"] = to_string(agent.kind);
  if (agent.kind == AgentKind::UcbRs) {
    const auto& c = agent.ucb_rs;
    j["variant"] = static_cast<int>(c.variant);
    j["lambda"] = c.lambda;
    j["theta"] = c.theta;
    j["alpha"] = c.alpha;
    j["top_n"] = c.top_n;
    j["horizon"] = c.horizon;
    j["blend"] = c.blend == CombinedBlend::Direct ? "direct" : "nested";
    j["tie_break"] = tie_break_name(c.tie_break);
  } else {
    const auto& c = agent.baseline;
    j["epsilon"] = c.epsilon;
    j["epsilon_decay"] = c.epsilon_decay;
    j["forced_init"] = c.forced_init;
    j["alpha"] = c.alpha;
    j["gamma"] = c.gamma;
    j["delta"] = c.delta;
    j["exp3s_share"] = c.exp3s_share == Exp3sShare::AllArms ? "all" : "played";
    j["tie_break"] = tie_break_name(c.tie_break);
  }
  return j;
}

Json to_json(const ExperimentConfig& config) {
  Json j;
  j["env"] = to_json(config.env);
  Json ex;
  ex["master_seed"] = config.master_seed;
  ex["num_test_users"] = config.num_test_users;
  ex["seeds"] = config.seeds;
  ex["bootstrap_resamples"] = config.bootstrap_resamples;
  ex["confidence"] = config.confidence;
  ex["export_events"] = config.export_events;
  ex["output_dir"] = config.output_dir.string();
  j["experiment"] = ex;
  j["sweep"] = {{"axis", to_string(config.axis)}, {"values", config.sweep_values}};
  Json ref;
  ref["source"] = config.refset.mode == RefsetMode::Generate ? "generate"
                  : config.refset.mode == RefsetMode::Files  ? "files"
                                                              : "none";
  Json files = Json::array();
  for (const auto& f : config.refset.files) files.push_back(f.string());
  ref["files"] = files;
  ref["pool_size"] = config.refset.options.pool_size;
  ref["min_events"] = config.refset.options.filter.min_events;
  ref["require_click"] = config.refset.options.filter.require_click;
  ref["generation_seed"] =
      config.refset.options.generation_seed ? Json(*config.refset.options.generation_seed) : Json(nullptr);
  j["refset"] = ref;
  Json agents = Json::object();
  for (const auto& a : config.agents) agents[a.name] = to_json(a);
  j["agents"] = agents;
  return j;
}

}  // namespace banditlab

#pragma once

// Experiment config files: YAML with `env`, `experiment`, `sweep`, `refset`
// and one section per agent under `agents`. Every key is optional and falls
// back to the defaults of the corresponding struct. A run manifest (JSON,
// which is also YAML) is accepted too; its `config` member is used.

#include <filesystem>
#include <string>

#include "json.hpp"

#include "banditlab/harness.hpp"

namespace banditlab {

// Throws ConfigError with "source:line:column: field: message" context.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Parses one agent section, e.g. the value under `agents.ucb1`.
AgentSpec parse_agent_section(const std::string& name, const std::string& yaml_text);

// Fully materialized; to_json(parse_experiment_config(to_json(c).dump())) == to_json(c).
nlohmann::ordered_json to_json(const EnvConfig& env);
nlohmann::ordered_json to_json(const AgentSpec& agent);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

}  // namespace banditlab

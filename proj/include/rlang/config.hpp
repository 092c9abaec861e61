#pragma once

#include "rlang/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rlang {

struct OutputSpec {
  std::string dir = "rlab_out";
  std::string format = "csv";  // csv or jsonl
};

struct ExperimentConfig {
  std::string subcommand;
  ModelSpec model;
  bool auto_shift = false;  // energy_shift was "auto"
  nlohmann::json experiment;  // defaults merged with the file
  OutputSpec output;
  std::uint64_t seed = 1;
  nlohmann::json resolved;  // the full configuration after defaults and overrides
};

// Default experiment parameters for a subcommand; throws ConfigError for unknown subcommands.
nlohmann::json experiment_defaults(const std::string& subcommand);
std::vector<std::string> subcommands();

nlohmann::json load_config_file(const std::string& path);
// "a.b.c=value": value parsed as a JSON literal, falling back to a plain string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Schema validation; errors carry a JSON pointer to the offending key.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& subcommand);
ModelSpec parse_model(const nlohmann::json& j, const std::string& pointer = "/model");

std::string config_hash(const nlohmann::json& resolved);

}  // namespace rlang

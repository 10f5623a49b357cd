#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sybilwall/engine.hpp"

namespace sybilwall {

struct OutputPaths {
  std::filesystem::path dir = "out";
  std::string csv = "metrics.csv";
  std::string manifest = "manifest.json";
};

struct RunConfig {
  SimulationConfig sim;
  OutputPaths output;
};

// Parses the JSON config document. Relative dataset paths resolve against
// `base_dir`. Unknown keys and type errors throw ConfigError with the field
// path; the result is validated.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

// Reads a JSON file; // and /* */ comments are allowed.
RunConfig load_config(const std::filesystem::path& file);

// Fully resolved config, defaults included. parse_config(config_to_json(c))
// reproduces c.
nlohmann::json config_to_json(const RunConfig& cfg);

// SYBILWALL_OUT_DIR and SYBILWALL_WORKERS.
void apply_env_overrides(RunConfig& cfg);

}  // namespace sybilwall

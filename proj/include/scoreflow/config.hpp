#pragma once

#include <map>
#include <string>
#include <vector>

#include "scoreflow/experiment.hpp"

namespace scoreflow {

// Flat "section.key = value" text config with '#' comments. Values override
// preset defaults; unknown keys are errors naming the key.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& sets);

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv);

ExperimentConfig make_config(const std::string& preset, const std::string& config_path,
                             const std::vector<std::string>& overrides);

}  // namespace scoreflow

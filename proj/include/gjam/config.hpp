#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gjam/eval.hpp"
#include "json.hpp"

namespace gjam {

/// Everything a CLI run needs. Parsed from a JSON document; unknown keys and
/// wrong types raise ConfigInvalid. See docs/config.md for the schema.
struct RunConfig {
  std::optional<std::uint64_t> seed;  // mandatory by the time a command runs
  std::filesystem::path data;         // dataset dir or record file
  nlohmann::json plan;                // generation plan object (null when absent)
  std::filesystem::path out{"out"};
  std::filesystem::path checkpoints;  // uncert: directory of member_<k>.gjnn
  int protocol = 1;
  ExperimentConfig experiment{};
};

/// Throws ConfigInvalid.
RunConfig parse_run_config(const nlohmann::json& j);
/// Reads and parses a config file. Throws DataMissing if the file is absent,
/// ConfigInvalid if it does not parse.
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved document: every field written out, so it re-parses to the
/// same configuration.
nlohmann::json to_json(const RunConfig& cfg);
/// Cross-field checks done after flag overrides. Throws ConfigInvalid.
void validate(const RunConfig& cfg);

/// Reads a plan given either inline or as a path to a JSON file.
GenerationPlan load_plan(const nlohmann::json& plan_or_path);

}  // namespace gjam

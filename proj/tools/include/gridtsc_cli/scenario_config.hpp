#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gridtsc/controllers.hpp"
#include "gridtsc/rl_env.hpp"

namespace gridtsc::cli {

/// A scenario file parsed into validated module configs. Every section and
/// key is optional; omitted values keep the library defaults, so a file with
/// just `network: {rows: 5, cols: 5}` describes the base case.
struct ScenarioConfig {
  EpisodeConfig episode;
  LinearQParams learner;
  std::string source;
};

/// Errors are ConfigError with "file:line: field: problem".
ScenarioConfig parse_scenario(std::string_view text, std::string source = "<memory>");
ScenarioConfig load_scenario(const std::filesystem::path& file);

}  // namespace gridtsc::cli

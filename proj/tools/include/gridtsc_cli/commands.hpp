#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtsc/controllers.hpp"
#include "gridtsc_cli/scenario_config.hpp"

namespace gridtsc::cli {

/// Builds a policy from its command-line name: fixed, greedy, random or
/// qlearn:<weights-file>. Throws UsageError for anything else.
std::unique_ptr<Policy> make_policy(const std::string& name, const EpisodeConfig& cfg,
                                    std::uint64_t seed);

struct RunOptions {
  std::filesystem::path scenario;
  std::string policy = "fixed";
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out = "out";
  std::optional<RewardVariant> reward;
};

struct RunRecord {
  std::uint64_t seed = 0;
  EpisodeOutcome outcome;
  std::filesystem::path directory;
};

/// One episode per seed; metrics land in <out>/<policy>/seed_<n>/.
std::vector<RunRecord> cmd_run(const RunOptions& options, std::ostream& log);

/// {s_lb, s_lb + step, ...} plus s_ub when the grid does not hit it.
std::vector<Seconds> default_sweep_splits(const SignalConstants& constants);

struct SweepRow {
  Seconds split = 0;
  double queue_sum = 0.0;  // mean over seeds of Env::mean_queue_sum
  std::optional<double> avg_travel_time;
  bool argmin = false;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  Seconds argmin = 0;  // lowest queue sum, ties to the smaller split
};

/// Fixed-time episodes at every split on a single-intersection scenario.
SweepTable sweep_split(const EpisodeConfig& cfg, const std::vector<Seconds>& splits,
                       const std::vector<std::uint64_t>& seeds);

struct SweepOptions {
  std::filesystem::path scenario;
  std::vector<Seconds> splits;  // empty means default_sweep_splits
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::filesystem::path> out;  // writes sweep.csv when set
  std::optional<RewardVariant> reward;
};

SweepTable cmd_sweep_split(const SweepOptions& options, std::ostream& log);
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file);

struct TrainOptions {
  std::filesystem::path scenario;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  std::optional<RewardVariant> reward;
};

struct TrainRecord {
  TrainResult result;
  std::filesystem::path curve;
  std::filesystem::path weights;
};

/// Trains the linear Q agent; writes learning_curve.csv and weights.json.
TrainRecord cmd_train(const TrainOptions& options, std::ostream& log);

struct ServeOptions {
  std::filesystem::path scenario;
  std::string endpoint = "127.0.0.1:5555";
  std::optional<RewardVariant> reward;
};

/// Blocks until the client closes (stdio) or the server is signalled (TCP).
void cmd_serve(const ServeOptions& options, std::istream& in, std::ostream& out, std::ostream& log);

/// Loads a scenario and applies the --reward override.
ScenarioConfig load_with_overrides(const std::filesystem::path& scenario,
                                   const std::optional<RewardVariant>& reward);

}  // namespace gridtsc::cli

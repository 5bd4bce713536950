#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridtsc/meso_sim.hpp"

namespace gridtsc {

/// When the per-cycle queue sample is taken.
enum class QueueSampling : std::uint8_t {
  CycleBoundary,  // instantaneous queue at the end of each global cycle
  CycleMax,       // largest queue seen during the cycle
};

std::string_view to_string(QueueSampling s) noexcept;

/// Link x cycle matrix of queue samples for one episode.
class QueueRecorder {
 public:
  QueueRecorder() = default;
  /// With expected_cycles set, recording one more column than that throws ContractError.
  QueueRecorder(std::size_t link_count, std::optional<std::size_t> expected_cycles);

  /// Appends one column. Throws ContractError on length mismatch or overflow.
  void record_cycle(std::span<const int> queues);

  std::size_t link_count() const noexcept { return links_; }
  std::size_t cycle_count() const noexcept { return cycles_; }
  std::optional<std::size_t> expected_cycles() const noexcept { return expected_; }
  int at(std::size_t link, std::size_t cycle) const;
  /// Samples stored cycle-major: index = cycle * link_count + link.
  const std::vector<int>& samples() const noexcept { return samples_; }

 private:
  std::size_t links_ = 0;
  std::size_t cycles_ = 0;
  std::optional<std::size_t> expected_;
  std::vector<int> samples_;
};

struct TripSummary {
  VehicleId vehicle = 0;
  Seconds entry_time = 0;
  Seconds exit_time = 0;
  bool operator==(const TripSummary&) const = default;
};

struct SummaryOptions {
  /// Trips that exit before this time (the warm-up) are not counted.
  Seconds measure_from = 0;
  int q_ub = 50;
  int heavy_threshold = 25;
  int bucket_width = 10;
  std::int64_t dropped_arrivals = 0;
  std::int64_t vehicles_on_network = 0;
  std::int64_t control_steps = 0;
};

struct EpisodeMetrics {
  std::size_t link_count = 0;
  std::size_t cycle_count = 0;
  std::vector<int> queue_samples;  // cycle-major, see QueueRecorder
  std::vector<TripSummary> trips;  // counted trips, completion order
  std::optional<double> avg_travel_time;
  std::int64_t total_travel_time = 0;
  std::int64_t completed_trips = 0;
  std::int64_t dropped_arrivals = 0;
  std::int64_t vehicles_on_network = 0;
  std::int64_t control_steps = 0;
  double episode_return = 0.0;
  int q_ub = 50;
  int bucket_width = 10;
  /// Bucket k holds samples in (k*w, (k+1)*w]; bucket 0 is [0, w].
  std::vector<std::int64_t> queue_histogram;
  int max_queue = 0;
  int heavy_threshold = 25;
  std::int64_t heavy_samples = 0;  // samples >= heavy_threshold

  bool operator==(const EpisodeMetrics&) const = default;
};

std::size_t histogram_bucket(int queue, int bucket_width) noexcept;

EpisodeMetrics summarize(std::vector<TripSummary> trips, const QueueRecorder& samples,
                         double episode_return, const SummaryOptions& options);
EpisodeMetrics summarize(std::span<const TripRecord> trips, const QueueRecorder& samples,
                         double episode_return, const SummaryOptions& options);

/// Controlled-over-base ratios; the travel-time ratio is the headline comparison statistic.
struct Comparison {
  std::optional<double> travel_time_ratio;
  std::optional<double> heavy_sample_ratio;
  std::optional<double> return_ratio;
};

Comparison compare(const EpisodeMetrics& base, const EpisodeMetrics& controlled);

enum class ExportFormat : std::uint8_t {
  Csv,   // queue_samples.csv and trips.csv
  Json,  // summary.json
};

/// Accepts "csv" and "json"/"structured-record"; anything else throws UsageError.
ExportFormat parse_export_format(std::string_view text);

inline constexpr std::string_view kSummarySchema = "gridtsc.episode_summary/1";
inline constexpr std::string_view kQueueCsvHeader = "link_id,cycle_index,queue";
inline constexpr std::string_view kTripsCsvHeader = "vehicle,entry_time,exit_time";
inline constexpr std::string_view kCurveCsvHeader = "episode,return";

/// Writes the files of `format` into `directory` (created if missing).
/// Output is byte-stable for equal metrics. Throws IoError with the path on failure.
void export_metrics(const EpisodeMetrics& metrics, const std::filesystem::path& directory,
                    ExportFormat format);
void export_all(const EpisodeMetrics& metrics, const std::filesystem::path& directory);
void export_learning_curve(std::span<const double> returns, const std::filesystem::path& file);
std::vector<double> load_learning_curve(const std::filesystem::path& file);

/// Reads a directory written by export_all and re-summarizes it.
EpisodeMetrics load_metrics(const std::filesystem::path& directory);

}  // namespace gridtsc

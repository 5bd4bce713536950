#include "gridtsc/metrics_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "gridtsc/errors.hpp"

namespace gridtsc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) {
    throw IoError("cannot format number");
  }
  return std::string(buf, end);
}

std::ofstream open_for_write(const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + file.string() + " for writing");
  }
  return out;
}

void finish(std::ofstream& out, const fs::path& file) {
  out.flush();
  if (!out) {
    throw IoError("write failed for " + file.string());
  }
}

std::ifstream open_for_read(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + file.string() + " for reading");
  }
  return in;
}

// Splits one CSV row of integers; throws IoError naming file and line.
template <std::size_t N>
std::array<std::int64_t, N> parse_row(const std::string& line, const fs::path& file,
                                      std::size_t line_no) {
  std::array<std::int64_t, N> out{};
  const char* p = line.data();
  const char* end = line.data() + line.size();
  for (std::size_t i = 0; i < N; ++i) {
    auto [next, ec] = std::from_chars(p, end, out[i]);
    if (ec != std::errc{} || (i + 1 < N && (next == end || *next != ','))) {
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    p = next + (i + 1 < N ? 1 : 0);
  }
  if (p != end) {
    throw IoError(file.string() + ":" + std::to_string(line_no) + ": trailing data");
  }
  return out;
}

void expect_header(std::istream& in, std::string_view header, const fs::path& file) {
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw IoError(file.string() + ":1: expected header '" + std::string(header) + "'");
  }
}

}  // namespace

std::string_view to_string(QueueSampling s) noexcept {
  return s == QueueSampling::CycleBoundary ? "cycle_boundary" : "cycle_max";
}

QueueRecorder::QueueRecorder(std::size_t link_count, std::optional<std::size_t> expected_cycles)
    : links_(link_count), expected_(expected_cycles) {
  if (expected_) {
    samples_.reserve(links_ * *expected_);
  }
}

void QueueRecorder::record_cycle(std::span<const int> queues) {
  if (queues.size() != links_) {
    throw ContractError("cycle sample has " + std::to_string(queues.size()) + " links, expected " +
                        std::to_string(links_));
  }
  if (expected_ && cycles_ >= *expected_) {
    throw ContractError("cycle sample " + std::to_string(cycles_ + 1) + " exceeds the " +
                        std::to_string(*expected_) + " cycles of the episode");
  }
  samples_.insert(samples_.end(), queues.begin(), queues.end());
  ++cycles_;
}

int QueueRecorder::at(std::size_t link, std::size_t cycle) const {
  if (link >= links_ || cycle >= cycles_) {
    throw LookupError("queue sample index out of range");
  }
  return samples_[cycle * links_ + link];
}

std::size_t histogram_bucket(int queue, int bucket_width) noexcept {
  if (queue <= bucket_width) {
    return 0;
  }
  return static_cast<std::size_t>((queue - 1) / bucket_width);
}

EpisodeMetrics summarize(std::vector<TripSummary> trips, const QueueRecorder& samples,
                         double episode_return, const SummaryOptions& options) {
  if (options.bucket_width < 1 || options.q_ub < 0) {
    throw ContractError("histogram needs a positive bucket width");
  }
  EpisodeMetrics m;
  m.link_count = samples.link_count();
  m.cycle_count = samples.cycle_count();
  m.queue_samples = samples.samples();
  m.trips = std::move(trips);
  m.dropped_arrivals = options.dropped_arrivals;
  m.vehicles_on_network = options.vehicles_on_network;
  m.control_steps = options.control_steps;
  m.episode_return = episode_return;
  m.q_ub = options.q_ub;
  m.bucket_width = options.bucket_width;
  m.heavy_threshold = options.heavy_threshold;

  for (const auto& t : m.trips) {
    m.total_travel_time += t.exit_time - t.entry_time;
  }
  m.completed_trips = static_cast<std::int64_t>(m.trips.size());
  if (m.completed_trips > 0) {
    m.avg_travel_time =
        static_cast<double>(m.total_travel_time) / static_cast<double>(m.completed_trips);
  }

  const std::size_t buckets =
      std::max<std::size_t>(1, histogram_bucket(std::max(options.q_ub, 1), options.bucket_width) + 1);
  m.queue_histogram.assign(buckets, 0);
  for (int q : m.queue_samples) {
    const std::size_t b = histogram_bucket(q, options.bucket_width);
    if (b >= m.queue_histogram.size()) {
      m.queue_histogram.resize(b + 1, 0);
    }
    ++m.queue_histogram[b];
    m.max_queue = std::max(m.max_queue, q);
    m.heavy_samples += q >= options.heavy_threshold ? 1 : 0;
  }
  return m;
}

EpisodeMetrics summarize(std::span<const TripRecord> trips, const QueueRecorder& samples,
                         double episode_return, const SummaryOptions& options) {
  std::vector<TripSummary> counted;
  counted.reserve(trips.size());
  for (const auto& t : trips) {
    if (t.exit_time && *t.exit_time >= options.measure_from) {
      counted.push_back({t.vehicle, t.entry_time, *t.exit_time});
    }
  }
  return summarize(std::move(counted), samples, episode_return, options);
}

Comparison compare(const EpisodeMetrics& base, const EpisodeMetrics& controlled) {
  Comparison c;
  if (base.avg_travel_time && controlled.avg_travel_time && *base.avg_travel_time > 0.0) {
    c.travel_time_ratio = *controlled.avg_travel_time / *base.avg_travel_time;
  }
  if (base.heavy_samples > 0) {
    c.heavy_sample_ratio =
        static_cast<double>(controlled.heavy_samples) / static_cast<double>(base.heavy_samples);
  }
  if (base.episode_return != 0.0) {
    c.return_ratio = controlled.episode_return / base.episode_return;
  }
  return c;
}

ExportFormat parse_export_format(std::string_view text) {
  if (text == "csv") {
    return ExportFormat::Csv;
  }
  if (text == "json" || text == "structured-record") {
    return ExportFormat::Json;
  }
  throw UsageError("unknown export format '" + std::string(text) +
                   "' (expected csv or structured-record)");
}

void export_metrics(const EpisodeMetrics& m, const fs::path& directory, ExportFormat format) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    throw IoError("cannot create " + directory.string() + ": " + ec.message());
  }

  if (format == ExportFormat::Csv) {
    const fs::path queue_file = directory / "queue_samples.csv";
    auto out = open_for_write(queue_file);
    out << kQueueCsvHeader << '\n';
    for (std::size_t link = 0; link < m.link_count; ++link) {
      for (std::size_t cycle = 0; cycle < m.cycle_count; ++cycle) {
        out << link << ',' << cycle << ',' << m.queue_samples[cycle * m.link_count + link] << '\n';
      }
    }
    finish(out, queue_file);

    const fs::path trips_file = directory / "trips.csv";
    auto trips = open_for_write(trips_file);
    trips << kTripsCsvHeader << '\n';
    for (const auto& t : m.trips) {
      trips << t.vehicle << ',' << t.entry_time << ',' << t.exit_time << '\n';
    }
    finish(trips, trips_file);
    return;
  }

  json j;
  j["schema"] = kSummarySchema;
  j["link_count"] = m.link_count;
  j["cycle_count"] = m.cycle_count;
  j["sample_count"] = m.queue_samples.size();
  j["avg_travel_time"] = m.avg_travel_time ? json(*m.avg_travel_time) : json(nullptr);
  j["total_travel_time"] = m.total_travel_time;
  j["completed_trips"] = m.completed_trips;
  j["dropped_arrivals"] = m.dropped_arrivals;
  j["vehicles_on_network"] = m.vehicles_on_network;
  j["control_steps"] = m.control_steps;
  j["episode_return"] = m.episode_return;
  j["q_ub"] = m.q_ub;
  j["bucket_width"] = m.bucket_width;
  j["queue_histogram"] = m.queue_histogram;
  j["max_queue"] = m.max_queue;
  j["heavy_threshold"] = m.heavy_threshold;
  j["heavy_samples"] = m.heavy_samples;

  const fs::path file = directory / "summary.json";
  auto out = open_for_write(file);
  out << j.dump(2) << '\n';
  finish(out, file);
}

void export_all(const EpisodeMetrics& metrics, const fs::path& directory) {
  export_metrics(metrics, directory, ExportFormat::Csv);
  export_metrics(metrics, directory, ExportFormat::Json);
}

void export_learning_curve(std::span<const double> returns, const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create " + file.parent_path().string() + ": " + ec.message());
    }
  }
  auto out = open_for_write(file);
  out << kCurveCsvHeader << '\n';
  for (std::size_t i = 0; i < returns.size(); ++i) {
    out << i << ',' << format_double(returns[i]) << '\n';
  }
  finish(out, file);
}

std::vector<double> load_learning_curve(const fs::path& file) {
  auto in = open_for_read(file);
  expect_header(in, kCurveCsvHeader, file);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comma = line.find(',');
    double v = 0.0;
    if (comma == std::string::npos) {
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    auto [p, ec] = std::from_chars(line.data() + comma + 1, line.data() + line.size(), v);
    if (ec != std::errc{} || p != line.data() + line.size()) {
      throw IoError(file.string() + ":" + std::to_string(line_no) + ": malformed return");
    }
    out.push_back(v);
  }
  return out;
}

EpisodeMetrics load_metrics(const fs::path& directory) {
  const fs::path summary_file = directory / "summary.json";
  auto summary_in = open_for_read(summary_file);
  json j;
  try {
    summary_in >> j;
  } catch (const json::exception& e) {
    throw IoError(summary_file.string() + ": " + e.what());
  }
  if (j.value("schema", "") != kSummarySchema) {
    throw IoError(summary_file.string() + ": unsupported schema");
  }
  const auto links = j.at("link_count").get<std::size_t>();
  const auto cycles = j.at("cycle_count").get<std::size_t>();

  std::vector<int> columns(links * cycles, 0);
  {
    const fs::path file = directory / "queue_samples.csv";
    auto in = open_for_read(file);
    expect_header(in, kQueueCsvHeader, file);
    std::string line;
    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto row = parse_row<3>(line, file, line_no);
      if (row[0] < 0 || row[1] < 0 || static_cast<std::size_t>(row[0]) >= links ||
          static_cast<std::size_t>(row[1]) >= cycles) {
        throw IoError(file.string() + ":" + std::to_string(line_no) + ": index out of range");
      }
      columns[static_cast<std::size_t>(row[1]) * links + static_cast<std::size_t>(row[0])] =
          static_cast<int>(row[2]);
      ++rows;
    }
    if (rows != links * cycles) {
      throw IoError(file.string() + ": expected " + std::to_string(links * cycles) + " rows");
    }
  }
  QueueRecorder recorder(links, cycles);
  for (std::size_t c = 0; c < cycles; ++c) {
    recorder.record_cycle(std::span<const int>(columns.data() + c * links, links));
  }

  std::vector<TripSummary> trips;
  {
    const fs::path file = directory / "trips.csv";
    auto in = open_for_read(file);
    expect_header(in, kTripsCsvHeader, file);
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      const auto row = parse_row<3>(line, file, line_no);
      trips.push_back({static_cast<VehicleId>(row[0]), row[1], row[2]});
    }
  }

  SummaryOptions opts;
  opts.q_ub = j.at("q_ub").get<int>();
  opts.bucket_width = j.at("bucket_width").get<int>();
  opts.heavy_threshold = j.at("heavy_threshold").get<int>();
  opts.dropped_arrivals = j.at("dropped_arrivals").get<std::int64_t>();
  opts.vehicles_on_network = j.at("vehicles_on_network").get<std::int64_t>();
  opts.control_steps = j.at("control_steps").get<std::int64_t>();
  return summarize(std::move(trips), recorder, j.at("episode_return").get<double>(), opts);
}

}  // namespace gridtsc

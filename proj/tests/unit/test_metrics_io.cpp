#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gridtsc/errors.hpp"
#include "gridtsc/metrics_io.hpp"
#include "gridtsc/rng.hpp"

using namespace gridtsc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(testing::TempDir()) / ("gridtsc_metrics_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Bucket index written out case by case: [0,10] -> 0, (10,20] -> 1, ...
std::size_t bucket_oracle(int q) {
  if (q <= 10) return 0;
  if (q <= 20) return 1;
  if (q <= 30) return 2;
  if (q <= 40) return 3;
  return 4;
}

EpisodeMetrics random_metrics(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t links = 1 + rng.below(8);
  const std::size_t cycles = 1 + rng.below(12);
  QueueRecorder rec(links, cycles);
  for (std::size_t c = 0; c < cycles; ++c) {
    std::vector<int> col(links);
    for (auto& q : col) q = static_cast<int>(rng.below(51));
    rec.record_cycle(col);
  }
  std::vector<TripSummary> trips;
  const auto n = rng.below(20);
  for (std::uint32_t v = 0; v < n; ++v) {
    const auto entry = static_cast<Seconds>(rng.below(1000));
    trips.push_back({v, entry, entry + 20 + static_cast<Seconds>(rng.below(500))});
  }
  SummaryOptions opts;
  opts.dropped_arrivals = static_cast<std::int64_t>(rng.below(5));
  opts.vehicles_on_network = static_cast<std::int64_t>(rng.below(50));
  opts.control_steps = static_cast<std::int64_t>(cycles * 4);
  return summarize(std::move(trips), rec, -1234.5678901234567 * rng.uniform(), opts);
}

}  // namespace

TEST(QueueRecorder, DefaultEpisodeTakes144Cycles) {
  QueueRecorder rec(80, 144);
  const std::vector<int> zeros(80, 0);
  for (int i = 0; i < 144; ++i) {
    rec.record_cycle(zeros);
  }
  EXPECT_EQ(rec.cycle_count(), 144u);
  EXPECT_EQ(rec.samples().size(), 11520u);
  EXPECT_EQ(rec.at(79, 143), 0);
  EXPECT_THROW(rec.record_cycle(zeros), ContractError);
  EXPECT_EQ(rec.cycle_count(), 144u);
}

TEST(QueueRecorder, LayoutAndErrors) {
  QueueRecorder rec(3, std::nullopt);
  rec.record_cycle(std::vector<int>{1, 2, 3});
  rec.record_cycle(std::vector<int>{4, 5, 6});
  EXPECT_EQ(rec.at(0, 1), 4);
  EXPECT_EQ(rec.at(2, 0), 3);
  EXPECT_EQ(rec.samples(), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(rec.record_cycle(std::vector<int>{1, 2}), ContractError);
  EXPECT_THROW(rec.at(3, 0), LookupError);
  EXPECT_THROW(rec.at(0, 2), LookupError);
}

TEST(Histogram, BoundariesGoToLowerBucket) {
  for (int q = 0; q <= 50; ++q) {
    EXPECT_EQ(histogram_bucket(q, 10), bucket_oracle(q)) << q;
  }
}

TEST(Summarize, PartitionAndExtremes) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EpisodeMetrics m = random_metrics(seed);
    ASSERT_EQ(m.queue_samples.size(), m.link_count * m.cycle_count);
    ASSERT_EQ(m.queue_histogram.size(), 5u);
    std::vector<std::int64_t> hist(5, 0);
    std::int64_t heavy = 0;
    int max_q = 0;
    for (int q : m.queue_samples) {
      ++hist[bucket_oracle(q)];
      heavy += q >= 25 ? 1 : 0;
      max_q = std::max(max_q, q);
    }
    EXPECT_EQ(m.queue_histogram, hist);
    EXPECT_EQ(std::accumulate(hist.begin(), hist.end(), std::int64_t{0}),
              static_cast<std::int64_t>(m.queue_samples.size()));
    EXPECT_EQ(m.heavy_samples, heavy);
    EXPECT_EQ(m.max_queue, max_q);
  }
}

TEST(Summarize, AverageTravelTime) {
  QueueRecorder rec(1, std::nullopt);
  rec.record_cycle(std::vector<int>{0});
  const EpisodeMetrics m =
      summarize(std::vector<TripSummary>{{0, 0, 100}, {1, 50, 350}}, rec, 0.0, {});
  ASSERT_TRUE(m.avg_travel_time);
  EXPECT_EQ(*m.avg_travel_time, 200.0);
  EXPECT_EQ(m.completed_trips, 2);
  EXPECT_EQ(m.total_travel_time, 400);

  const EpisodeMetrics none = summarize(std::vector<TripSummary>{}, rec, 0.0, {});
  EXPECT_FALSE(none.avg_travel_time);
  EXPECT_EQ(none.completed_trips, 0);
}

TEST(Summarize, WarmupTripsExcluded) {
  QueueRecorder rec(1, std::nullopt);
  SummaryOptions opts;
  opts.measure_from = 1800;
  auto trip = [](VehicleId v, Seconds entry, std::optional<Seconds> exit) {
    TripRecord t;
    t.vehicle = v;
    t.entry_time = entry;
    t.exit_time = exit;
    return t;
  };
  const std::vector<TripRecord> trips{trip(0, 1000, 1799), trip(1, 1700, 1800),
                                      trip(2, 1900, 2000), trip(3, 1950, std::nullopt)};
  const EpisodeMetrics m = summarize(std::span<const TripRecord>(trips), rec, 0.0, opts);
  EXPECT_EQ(m.completed_trips, 2);
  EXPECT_EQ(*m.avg_travel_time, 100.0);
}

TEST(Compare, RatiosOfControlledOverBase) {
  EpisodeMetrics base;
  base.avg_travel_time = 200.0;
  base.heavy_samples = 40;
  base.episode_return = -1000.0;
  EpisodeMetrics controlled;
  controlled.avg_travel_time = 126.0;
  controlled.heavy_samples = 10;
  controlled.episode_return = -250.0;
  const Comparison c = compare(base, controlled);
  EXPECT_DOUBLE_EQ(*c.travel_time_ratio, 0.63);
  EXPECT_DOUBLE_EQ(*c.heavy_sample_ratio, 0.25);
  EXPECT_DOUBLE_EQ(*c.return_ratio, 0.25);

  EpisodeMetrics empty;
  const Comparison missing = compare(empty, controlled);
  EXPECT_FALSE(missing.travel_time_ratio);
  EXPECT_FALSE(missing.heavy_sample_ratio);
}

TEST(Export, FormatsAndUnknownFormat) {
  EXPECT_EQ(parse_export_format("csv"), ExportFormat::Csv);
  EXPECT_EQ(parse_export_format("json"), ExportFormat::Json);
  EXPECT_EQ(parse_export_format("structured-record"), ExportFormat::Json);
  EXPECT_THROW(parse_export_format("parquet"), UsageError);
}

TEST(Export, CsvRowCountAndHeader) {
  QueueRecorder rec(80, 144);
  std::vector<int> col(80);
  for (int c = 0; c < 144; ++c) {
    std::iota(col.begin(), col.end(), c % 7);
    rec.record_cycle(col);
  }
  const EpisodeMetrics m = summarize(std::vector<TripSummary>{}, rec, 0.0, {});
  const fs::path dir = scratch("rows");
  export_metrics(m, dir, ExportFormat::Csv);
  std::ifstream in(dir / "queue_samples.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kQueueCsvHeader);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 11520u);
  EXPECT_TRUE(fs::exists(dir / "trips.csv"));
  EXPECT_FALSE(fs::exists(dir / "summary.json"));
}

TEST(Export, ByteIdenticalAndRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EpisodeMetrics m = random_metrics(seed);
    const fs::path a = scratch("a" + std::to_string(seed));
    const fs::path b = scratch("b" + std::to_string(seed));
    export_all(m, a);
    export_all(m, b);
    for (const char* f : {"queue_samples.csv", "trips.csv", "summary.json"}) {
      EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    EXPECT_EQ(load_metrics(a), m) << "seed " << seed;
  }
}

TEST(Export, LoadRejectsDamage) {
  const EpisodeMetrics m = random_metrics(3);
  const fs::path dir = scratch("damage");
  export_all(m, dir);
  {
    std::ofstream out(dir / "queue_samples.csv", std::ios::app);
    out << "x,y\n";
  }
  EXPECT_THROW(load_metrics(dir), IoError);
  EXPECT_THROW(load_metrics(scratch("missing")), IoError);
}

TEST(Export, UnwritableDirectoryNamesPath) {
  const fs::path blocker = scratch("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "file";
  try {
    export_all(random_metrics(1), blocker / "sub");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
  fs::remove(blocker);
}

TEST(LearningCurve, RoundTripIsExact) {
  const std::vector<double> returns{-1.0, -0.1, -1234.56789012345678, 0.0, -1e-300, -3.0e10};
  const fs::path file = scratch("curve") / "curve.csv";
  export_learning_curve(returns, file);
  EXPECT_EQ(load_learning_curve(file), returns);
  const std::string text = slurp(file);
  EXPECT_EQ(text.substr(0, kCurveCsvHeader.size()), kCurveCsvHeader);
  export_learning_curve(returns, file);
  EXPECT_EQ(slurp(file), text);
}

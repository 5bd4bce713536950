#include "gridtsc_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "gridtsc/env_bridge.hpp"
#include "gridtsc/errors.hpp"
#include "gridtsc/metrics_io.hpp"

namespace gridtsc::cli {

namespace {

std::string format_double(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string policy_dir_name(const std::string& policy) {
  return policy.starts_with("qlearn:") ? "qlearn" : policy;
}

}  // namespace

ScenarioConfig load_with_overrides(const std::filesystem::path& scenario,
                                   const std::optional<RewardVariant>& reward) {
  ScenarioConfig sc = load_scenario(scenario);
  if (reward) {
    sc.episode.reward.variant = *reward;
  }
  return sc;
}

std::unique_ptr<Policy> make_policy(const std::string& name, const EpisodeConfig& cfg,
                                    std::uint64_t seed) {
  if (name == "fixed") {
    return std::make_unique<FixedTimePolicy>();
  }
  if (name == "greedy") {
    return std::make_unique<GreedyPolicy>(Env(cfg));
  }
  if (name == "random") {
    return std::make_unique<RandomPolicy>(cfg.scenario.network->intersection_count(),
                                          derive_seed(seed, 0x7261'6e64));
  }
  if (name.starts_with("qlearn:")) {
    if (name.size() == 7) {
      throw UsageError("policy qlearn: needs a weights file, as in qlearn:<file>");
    }
    auto agent = std::make_unique<LinearQAgent>(LinearQAgent::load(name.substr(7)));
    const EnvSpec spec = Env(cfg).spec();
    const std::size_t expected = spec.links + spec.intersections + 1;
    if (agent->action_count() != spec.action_count || agent->feature_count() != expected) {
      throw ConfigError("weights in " + name.substr(7) + " do not fit this scenario (L=" +
                        std::to_string(spec.links) + ", M=" + std::to_string(spec.intersections) +
                        ")");
    }
    return agent;
  }
  throw UsageError("unknown policy '" + name + "' (fixed, greedy, random, qlearn:<file>)");
}

std::vector<RunRecord> cmd_run(const RunOptions& options, std::ostream& log) {
  const ScenarioConfig sc = load_with_overrides(options.scenario, options.reward);
  // Validate the policy name before any episode runs.
  make_policy(options.policy, sc.episode, 0);

  std::vector<RunRecord> records;
  log << "scenario " << sc.source << "  policy " << options.policy << "  reward "
      << to_string(sc.episode.reward.variant) << '\n';
  log << std::left << std::setw(8) << "seed" << std::setw(8) << "steps" << std::setw(8)
      << "cycles" << std::setw(10) << "samples" << std::setw(10) << "trips" << std::setw(12)
      << "avg_tt[s]" << std::setw(8) << "heavy" << std::setw(8) << "max_q" << std::setw(9)
      << "dropped" << "return\n";
  for (std::uint64_t seed : options.seeds) {
    auto policy = make_policy(options.policy, sc.episode, seed);
    policy->begin_episode(0);
    RunRecord rec;
    rec.seed = seed;
    rec.outcome = run_episode(sc.episode, *policy, seed);
    rec.directory =
        options.out / policy_dir_name(options.policy) / ("seed_" + std::to_string(seed));
    export_all(rec.outcome.metrics, rec.directory);
    const EpisodeMetrics& m = rec.outcome.metrics;
    log << std::left << std::setw(8) << seed << std::setw(8) << m.control_steps << std::setw(8)
        << m.cycle_count << std::setw(10) << m.queue_samples.size() << std::setw(10)
        << m.completed_trips << std::setw(12)
        << (m.avg_travel_time ? format_double(*m.avg_travel_time) : std::string("-"))
        << std::setw(8) << m.heavy_samples << std::setw(8) << m.max_queue << std::setw(9)
        << m.dropped_arrivals << format_double(m.episode_return, 1) << '\n';
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Seconds> default_sweep_splits(const SignalConstants& constants) {
  std::vector<Seconds> out;
  for (Seconds s = constants.split_lower; s <= constants.split_upper; s += constants.split_step) {
    out.push_back(s);
  }
  if (out.back() != constants.split_upper) {
    out.push_back(constants.split_upper);
  }
  return out;
}

SweepTable sweep_split(const EpisodeConfig& cfg, const std::vector<Seconds>& splits,
                       const std::vector<std::uint64_t>& seeds) {
  if (cfg.scenario.network->intersection_count() != 1) {
    throw ConfigError("sweep-split needs a single-intersection scenario, got " +
                      std::to_string(cfg.scenario.network->intersection_count()));
  }
  if (splits.empty() || seeds.empty()) {
    throw UsageError("sweep-split needs at least one split and one seed");
  }
  SweepTable table;
  FixedTimePolicy fixed;
  std::optional<std::size_t> best;
  for (Seconds split : splits) {
    EpisodeConfig run = cfg;
    run.initial_splits = std::vector<Seconds>{split};
    SweepRow row;
    row.split = split;
    double tt_sum = 0.0;
    std::size_t tt_n = 0;
    for (std::uint64_t seed : seeds) {
      const EpisodeOutcome o = run_episode(run, fixed, seed);
      row.queue_sum += o.mean_queue_sum;
      if (o.metrics.avg_travel_time) {
        tt_sum += *o.metrics.avg_travel_time;
        ++tt_n;
      }
    }
    row.queue_sum /= static_cast<double>(seeds.size());
    if (tt_n > 0) {
      row.avg_travel_time = tt_sum / static_cast<double>(tt_n);
    }
    table.rows.push_back(row);
    const std::size_t i = table.rows.size() - 1;
    if (!best || row.queue_sum < table.rows[*best].queue_sum ||
        (row.queue_sum == table.rows[*best].queue_sum && split < table.rows[*best].split)) {
      best = i;
    }
  }
  table.rows[*best].argmin = true;
  table.argmin = table.rows[*best].split;
  return table;
}

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& file) {
  if (file.has_parent_path()) {
    std::filesystem::create_directories(file.parent_path());
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + file.string() + " for writing");
  }
  out << "split,queue_sum,avg_travel_time,argmin\n";
  for (const auto& r : table.rows) {
    out << r.split << ',' << format_double(r.queue_sum, 6) << ','
        << (r.avg_travel_time ? format_double(*r.avg_travel_time, 6) : std::string()) << ','
        << (r.argmin ? 1 : 0) << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + file.string());
  }
}

SweepTable cmd_sweep_split(const SweepOptions& options, std::ostream& log) {
  const ScenarioConfig sc = load_with_overrides(options.scenario, options.reward);
  const auto splits =
      options.splits.empty() ? default_sweep_splits(sc.episode.scenario.signal) : options.splits;
  const SweepTable table = sweep_split(sc.episode, splits, options.seeds);
  log << std::left << std::setw(8) << "split" << std::setw(14) << "queue_sum" << "avg_tt[s]\n";
  for (const auto& r : table.rows) {
    log << std::left << std::setw(8) << r.split << std::setw(14) << format_double(r.queue_sum, 3)
        << (r.avg_travel_time ? format_double(*r.avg_travel_time) : std::string("-"))
        << (r.argmin ? "  <- argmin" : "") << '\n';
  }
  if (options.out) {
    write_sweep_csv(table, *options.out / "sweep.csv");
  }
  return table;
}

TrainRecord cmd_train(const TrainOptions& options, std::ostream& log) {
  const ScenarioConfig sc = load_with_overrides(options.scenario, options.reward);
  const EnvSpec spec = Env(sc.episode).spec();
  LinearQAgent agent(spec.links, spec.intersections, spec.q_ub, spec.split_lower,
                     spec.split_upper, sc.learner, derive_seed(options.seed, 0x6167'656e));
  TrainRecord rec;
  rec.result = train(sc.episode, agent, options.episodes, options.seed);
  rec.curve = options.out / "learning_curve.csv";
  rec.weights = options.out / "weights.json";
  std::filesystem::create_directories(options.out);
  export_learning_curve(rec.result.returns, rec.curve);
  agent.save(rec.weights);
  const auto& r = rec.result.returns;
  const std::size_t tail = std::max<std::size_t>(1, r.size() / 10);
  double last = 0.0;
  for (std::size_t i = r.size() - tail; i < r.size(); ++i) {
    last += r[i];
  }
  log << "trained " << r.size() << " episodes; first return " << format_double(r.front(), 1)
      << ", mean of last " << tail << ' ' << format_double(last / static_cast<double>(tail), 1)
      << '\n'
      << "wrote " << rec.curve.string() << " and " << rec.weights.string() << '\n';
  return rec;
}

void cmd_serve(const ServeOptions& options, std::istream& in, std::ostream& out,
               std::ostream& log) {
  const ScenarioConfig sc = load_with_overrides(options.scenario, options.reward);
  const bridge::Endpoint endpoint = bridge::parse_endpoint(options.endpoint);
  if (endpoint.stdio) {
    log << "serving one session on stdio\n";
    bridge::serve_stream(sc.episode, in, out);
    return;
  }
  bridge::Server server(sc.episode, endpoint, [&log](std::string_view msg) {
    log << msg << std::endl;
  });
  log << "listening on tcp://" << endpoint.host << ':' << server.port() << std::endl;
  server.run();
  log << "served " << server.sessions_served() << " session(s)" << std::endl;
}

}  // namespace gridtsc::cli

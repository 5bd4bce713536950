#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridtsc/meso_sim.hpp"
#include "gridtsc/metrics_io.hpp"
#include "gridtsc/net_model.hpp"
#include "gridtsc/signal_control.hpp"

namespace gridtsc {

enum class RewardVariant : std::uint8_t { Congestion, TravelTime };

std::string_view to_string(RewardVariant v) noexcept;
/// Accepts "congestion" and "travel-time" (or "travel_time").
std::optional<RewardVariant> parse_reward_variant(std::string_view text) noexcept;

struct RewardConfig {
  RewardVariant variant = RewardVariant::Congestion;
  int q_ub = 50;
  int q_lc = 10;
  int q_hc = 25;
  double w_cp = 10.0;
  double f_sat = 50.0;

  /// Throws ConfigError unless 0 < q_lc < q_hc <= q_ub, w_cp >= 1 and f_sat > 0.
  void validate() const;
};

/// Which congestion branch a queue falls into. Boundaries: q <= q_lc is free,
/// q_lc < q < q_hc is light, q >= q_hc is heavy.
enum class CongestionLevel : std::uint8_t { Free, Light, Heavy };
CongestionLevel classify_queue(double queue, const RewardConfig& cfg) noexcept;

double congestion_link_reward(double queue, const RewardConfig& cfg) noexcept;
/// Sum of per-link congestion rewards; always <= 0.
double reward_congestion(std::span<const double> queues, const RewardConfig& cfg);

struct TravelTimeTerm {
  double queue = 0.0;
  double t_avg = 0.0;   // average link travel time, s
  double t_eg_u = 0.0;  // through green at the upstream intersection under its active split
  double t_eg_d = 0.0;  // the same at the default split
};

/// Throws ConfigError when a light-branch term has non-positive greens.
double travel_time_link_reward(const TravelTimeTerm& term, const RewardConfig& cfg);
double reward_travel_time(std::span<const TravelTimeTerm> terms, const RewardConfig& cfg);

/// Everything needed to instantiate the simulator for an episode.
struct Scenario {
  std::shared_ptr<const NetworkSpec> network;
  SignalConstants signal{};
  FlowParams flow{};
  DemandProfile demand{};
  /// Extends the observed links with the boundary entry links (after the internal ones).
  bool observe_entry_links = false;

  /// Observation order: internal links, then entry links when enabled.
  std::vector<LinkId> observed_links() const;
};

struct EpisodeConfig {
  Seconds duration = 16200;
  Seconds warmup = 1800;
  Seconds control_interval = 25;
  QueueSampling sampling = QueueSampling::CycleBoundary;
  RewardConfig reward{};
  Scenario scenario{};
  std::uint64_t seed = 0;
  /// Per-intersection starting splits; defaults to signal.default_split everywhere.
  std::optional<std::vector<Seconds>> initial_splits;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  std::size_t control_steps() const noexcept;
  std::size_t recorded_cycles() const noexcept;
};

struct Observation {
  std::vector<double> queues;  // length L, each in [0, q_ub]
  std::vector<double> splits;  // length M, active splits
  Seconds sim_time = 0;

  /// Queues followed by splits; the flat vector sent over the wire.
  std::vector<double> flat() const;
  std::size_t size() const noexcept { return queues.size() + splits.size(); }
  bool operator==(const Observation&) const = default;
};

struct ActionId {
  int value = 0;
  bool operator==(const ActionId&) const = default;
};

struct DecodedAction {
  std::size_t intersection = 0;
  Seconds delta = 0;
  bool operator==(const DecodedAction&) const = default;
};

/// id = 3m + j, with delta = (j - 1) * step. Throws InvalidActionError outside [0, 3M).
DecodedAction decode_action(int id, std::size_t intersections, Seconds step);
/// delta_index in {0, 1, 2} meaning -step, 0, +step.
ActionId encode_action(std::size_t intersection, int delta_index);
inline constexpr ActionId kNoOpAction{1};

/// Per-step diagnostics; its JSON form is part of the wire contract.
struct StepInfo {
  Seconds sim_time = 0;
  RewardVariant variant = RewardVariant::Congestion;
  std::vector<double> queues;
  std::vector<double> splits;
  std::vector<double> pending_splits;  // active split where nothing is pending
  std::vector<double> t_avg;
  std::vector<double> t_eg_u;
  std::vector<double> t_eg_d;
  std::vector<double> link_rewards;
  TickSummary interval{};
};

inline constexpr std::string_view kInfoSchema = "gridtsc.step_info/1";
nlohmann::json to_json(const StepInfo& info);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EnvSpec {
  std::size_t links = 0;          // L
  std::size_t intersections = 0;  // M
  std::size_t action_count = 0;   // 3M
  Seconds control_interval = 0;
  int q_ub = 0;
  Seconds split_lower = 0;
  Seconds split_upper = 0;
  RewardVariant variant = RewardVariant::Congestion;
};

/// Single-agent environment over one simulator instance. reset() runs the
/// warm-up with fixed default splits; every step() applies one decoded action
/// (taking effect at that intersection's next cycle start) and then advances
/// exactly one control interval.
class Env {
 public:
  explicit Env(EpisodeConfig cfg);

  Observation reset();
  /// Reset with a seed that replaces the configured one for this episode.
  Observation reset(std::uint64_t seed);

  /// Throws EpisodeFinishedError after done, ContractError before reset and
  /// InvalidActionError for ids outside [0, 3M); errors never mutate state.
  StepResult step(ActionId action);

  EnvSpec spec() const;
  bool started() const noexcept { return sim_ != nullptr; }
  bool done() const noexcept { return done_; }
  const EpisodeConfig& config() const noexcept { return cfg_; }
  const std::vector<LinkId>& observed_links() const noexcept { return observed_; }

  /// Throws ContractError before reset.
  const SimState& sim() const;
  Observation observation() const;
  StepInfo info() const;

  double episode_return() const noexcept { return return_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  const QueueRecorder& queue_samples() const noexcept { return recorder_; }
  EpisodeMetrics metrics() const;
  /// Straight queues summed over the observed links, averaged over post-warm-up ticks.
  double mean_queue_sum() const noexcept;

 private:
  TickSummary tick();

  EpisodeConfig cfg_;
  std::vector<LinkId> observed_;
  std::unique_ptr<SimState> sim_;
  QueueRecorder recorder_;
  std::vector<int> cycle_max_;
  double return_ = 0.0;
  std::size_t steps_ = 0;
  bool done_ = false;
  std::int64_t queue_integral_ = 0;
  std::int64_t queue_ticks_ = 0;
};

}  // namespace gridtsc

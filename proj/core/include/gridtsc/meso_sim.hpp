#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gridtsc/net_model.hpp"
#include "gridtsc/rng.hpp"
#include "gridtsc/signal_control.hpp"

namespace gridtsc {

enum class Movement : std::uint8_t { Straight = 0, Left = 1, Right = 2 };

inline constexpr std::array<Movement, 3> kMovements = {Movement::Straight, Movement::Left,
                                                       Movement::Right};

constexpr std::size_t index_of(Movement m) noexcept { return static_cast<std::size_t>(m); }

/// Heading of a vehicle that arrived travelling `heading` and makes `movement`.
constexpr Direction departure_heading(Direction heading, Movement movement) noexcept {
  switch (movement) {
    case Movement::Left:
      return left_of(heading);
    case Movement::Right:
      return right_of(heading);
    case Movement::Straight:
      break;
  }
  return heading;
}

/// Signal group serving `movement` for traffic arriving on `heading`.
constexpr MovementGroup controlling_group(Direction heading, Movement movement) noexcept {
  return movement == Movement::Left ? left_group(heading) : through_group(heading);
}

struct TurnProbabilities {
  double left = 0.1;
  double straight = 0.8;
  double right = 0.1;
};

struct DemandEntry {
  LinkId entry_link;
  double rate_vph = 0.0;
  Seconds start = 0;
  Seconds end = std::numeric_limits<Seconds>::max();
};

struct TurnOverride {
  NodeId node;
  Direction side = Direction::North;  // approach side at `node`
  TurnProbabilities turns;
};

/// Poisson arrivals at entry links plus memoryless turning at every stop line.
struct DemandProfile {
  std::vector<DemandEntry> entries;
  TurnProbabilities default_turns{};
  std::vector<TurnOverride> turn_overrides;
  /// Arrival rates ramp linearly from zero over [0, ramp_up).
  Seconds ramp_up = 0;

  /// Throws ConfigError on negative rates, non-entry links or bad probabilities.
  void validate(const NetworkSpec& net) const;
  TurnProbabilities turns_for(NodeId node, Direction side) const;
};

struct FlowParams {
  double saturation_headway = 1.68;  // s per vehicle per lane
  Seconds startup_lost_time = 0;

  void validate() const;
  /// Headway in milliseconds; service credit is kept in integer lane-milliseconds
  /// so 2 lanes x 42 s / 1.68 s is exactly 50 vehicles.
  std::int64_t headway_millis() const;
};

using VehicleId = std::uint32_t;

struct LinkVisit {
  LinkId link;
  Seconds enter = 0;
  std::optional<Seconds> leave;
  bool operator==(const LinkVisit&) const = default;
};

struct TripRecord {
  VehicleId vehicle = 0;
  Seconds entry_time = 0;
  std::optional<Seconds> exit_time;
  std::vector<LinkVisit> visits;  // route in travel order

  Seconds duration() const { return exit_time.value_or(entry_time) - entry_time; }
  bool operator==(const TripRecord&) const = default;
};

struct TickSummary {
  std::int64_t injected = 0;
  std::int64_t dropped = 0;
  std::int64_t discharged = 0;
  std::int64_t exited = 0;

  TickSummary& operator+=(const TickSummary& o) noexcept {
    injected += o.injected;
    dropped += o.dropped;
    discharged += o.discharged;
    exited += o.exited;
    return *this;
  }
  bool operator==(const TickSummary&) const = default;
};

struct SimCounters {
  std::int64_t injected = 0;
  std::int64_t exited = 0;
  std::int64_t dropped = 0;
  std::int64_t on_network = 0;
  bool operator==(const SimCounters&) const = default;
};

struct LinkStats {
  double t_avg = 0.0;
  int exits_last_cycle = 0;
};

struct DischargeEvent {
  Seconds time = 0;
  LinkId link;
  Movement movement = Movement::Straight;
  VehicleId vehicle = 0;
};

/// Mutable world of one episode: vehicles on links, stop-line queues, signal
/// plans, trip records and the random stream. Advances in 1 s ticks; each tick
///   1. rolls link-time windows at downstream cycle starts,
///   2. samples boundary arrivals (dropped when the entry link is full),
///   3. moves vehicles that reached the stop line into their movement queue,
///   4. discharges green movements by service credit, halting on spillback,
///   5. completes trips whose exit link has been traversed,
///   6. advances the clock; a plan reaching a cycle start activates its pending split.
/// A split requested at a cycle-start instant therefore applies from the next cycle.
/// Not thread-safe; distinct instances share nothing mutable.
class SimState {
 public:
  /// Throws ConfigError for invalid demand, flow, constants or initial splits.
  SimState(std::shared_ptr<const NetworkSpec> net, DemandProfile demand, FlowParams flow,
           SignalConstants constants, std::vector<Seconds> initial_splits, std::uint64_t seed);

  /// Runs dt whole-second ticks; throws ContractError for dt < 1.
  TickSummary advance(Seconds dt);

  Seconds clock() const noexcept { return clock_; }
  const NetworkSpec& network() const noexcept { return *net_; }
  const std::shared_ptr<const NetworkSpec>& network_ptr() const noexcept { return net_; }
  const SignalConstants& constants() const noexcept { return constants_; }
  const FlowParams& flow() const noexcept { return flow_; }

  /// Straight-movement stop-line queue clamped to q_ub.
  int measure_queue(LinkId link, int q_ub) const;
  int queue_length(LinkId link, Movement movement) const;
  /// Vehicles on the link: travelling plus queued.
  int occupancy(LinkId link) const;
  LinkStats link_stats(LinkId link) const;

  /// Completed trips in completion order.
  std::span<const TripRecord> completed_trips() const noexcept { return completed_; }
  /// Trip records of vehicles still on the network, by vehicle id.
  std::vector<TripRecord> active_trips() const;
  const SimCounters& counters() const noexcept { return counters_; }

  const std::vector<SignalPlan>& plans() const noexcept { return plans_; }
  const SignalPlan& plan(NodeId node) const;
  /// Applies apply_split_delta to the node's plan.
  void request_split_delta(NodeId node, Seconds delta);

  /// Places up to `count` vehicles directly in a stop-line queue (they count as
  /// injected at the current clock). Returns how many fitted under jam capacity.
  int preload_queue(LinkId link, Movement movement, int count);

  void set_discharge_observer(std::function<void(const DischargeEvent&)> observer) {
    observer_ = std::move(observer);
  }

  /// Throws std::logic_error if conservation, capacity or queue bookkeeping is broken.
  void check_invariants() const;

  /// Equality of all mutable state (clock, vehicles, queues, credit, RNG, plans).
  bool same_state(const SimState& other) const;

 private:
  struct VehicleState {
    TripRecord trip;
    Movement movement = Movement::Straight;
    Seconds stop_line_arrival = 0;
    bool operator==(const VehicleState&) const = default;
  };

  struct LinkState {
    std::deque<VehicleId> in_transit;
    std::array<std::deque<VehicleId>, 3> queues;
    std::array<std::int64_t, 3> credit{};
    int occupancy = 0;
    double window_sum = 0.0;
    int window_count = 0;
    double t_avg = 0.0;
    int exits_last_cycle = 0;
    bool operator==(const LinkState&) const = default;
  };

  const Link& stop_line_link(LinkId link) const;
  void enter_link(VehicleId v, LinkId link, Seconds now);
  VehicleId spawn(Seconds now);
  void roll_windows(Seconds now);
  void inject(Seconds now, TickSummary& summary);
  void arrive_at_stop_lines(Seconds now);
  void discharge(Seconds now, TickSummary& summary);
  void complete_exits(Seconds now, TickSummary& summary);

  std::shared_ptr<const NetworkSpec> net_;
  DemandProfile demand_;
  FlowParams flow_;
  SignalConstants constants_;
  std::int64_t headway_millis_ = 0;
  // Turn probabilities per link with a stop line, by link id.
  std::vector<TurnProbabilities> link_turns_;

  Seconds clock_ = 0;
  Rng rng_;
  std::vector<SignalPlan> plans_;
  std::vector<std::array<Seconds, 4>> green_run_;  // consecutive green ticks per node/group
  std::vector<LinkState> links_;
  std::vector<VehicleState> vehicles_;  // by id; completed entries are moved out
  std::vector<TripRecord> completed_;
  SimCounters counters_;
  std::function<void(const DischargeEvent&)> observer_;
};

}  // namespace gridtsc

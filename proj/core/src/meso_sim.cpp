#include "gridtsc/meso_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gridtsc/errors.hpp"

namespace gridtsc {

namespace {

void check_turns(const TurnProbabilities& t, const std::string& where) {
  if (t.left < 0.0 || t.straight < 0.0 || t.right < 0.0) {
    throw ConfigError("negative turn probability at " + where);
  }
  if (std::abs(t.left + t.straight + t.right - 1.0) > 1e-9) {
    throw ConfigError("turn probabilities at " + where + " do not sum to 1");
  }
}

Movement sample_movement(const TurnProbabilities& t, double u) {
  if (u < t.left) {
    return Movement::Left;
  }
  if (u < t.left + t.straight) {
    return Movement::Straight;
  }
  return Movement::Right;
}

int lanes_for(const MovementLanes& layout, Movement m) {
  switch (m) {
    case Movement::Straight:
      return layout.straight;
    case Movement::Left:
      return layout.left;
    case Movement::Right:
      return layout.right;
  }
  return 0;
}

}  // namespace

void DemandProfile::validate(const NetworkSpec& net) const {
  for (const auto& e : entries) {
    if (e.entry_link.value >= net.links.size() ||
        net.links[e.entry_link.value].kind != LinkKind::Entry) {
      throw ConfigError("demand entry refers to link " + std::to_string(e.entry_link.value) +
                        ", which is not a boundary entry link");
    }
    if (!(e.rate_vph >= 0.0) || !std::isfinite(e.rate_vph)) {
      throw ConfigError("demand rate must be finite and non-negative");
    }
    if (e.end < e.start) {
      throw ConfigError("demand interval ends before it starts");
    }
  }
  if (ramp_up < 0) {
    throw ConfigError("ramp_up must be non-negative");
  }
  check_turns(default_turns, "default turns");
  for (const auto& o : turn_overrides) {
    if (o.node.value >= net.intersections.size()) {
      throw ConfigError("turn override for unknown intersection " +
                        std::to_string(o.node.value));
    }
    check_turns(o.turns, "intersection " + std::to_string(o.node.value) + " side " +
                             std::string(to_string(o.side)));
  }
}

TurnProbabilities DemandProfile::turns_for(NodeId node, Direction side) const {
  // Later overrides win.
  for (auto it = turn_overrides.rbegin(); it != turn_overrides.rend(); ++it) {
    if (it->node == node && it->side == side) {
      return it->turns;
    }
  }
  return default_turns;
}

void FlowParams::validate() const {
  if (!(saturation_headway > 0.0) || !std::isfinite(saturation_headway)) {
    throw ConfigError("saturation_headway must be positive");
  }
  if (headway_millis() < 1) {
    throw ConfigError("saturation_headway must be at least 1 ms");
  }
  if (startup_lost_time < 0) {
    throw ConfigError("startup_lost_time must be non-negative");
  }
}

std::int64_t FlowParams::headway_millis() const {
  return static_cast<std::int64_t>(std::llround(saturation_headway * 1000.0));
}

SimState::SimState(std::shared_ptr<const NetworkSpec> net, DemandProfile demand, FlowParams flow,
                   SignalConstants constants, std::vector<Seconds> initial_splits,
                   std::uint64_t seed)
    : net_(std::move(net)),
      demand_(std::move(demand)),
      flow_(flow),
      constants_(constants),
      rng_(seed) {
  if (!net_) {
    throw ConfigError("simulation needs a network");
  }
  if (auto problems = validate(*net_); !problems.empty()) {
    throw ConfigError("invalid network: " + problems.front().invariant + " at " +
                      problems.front().element);
  }
  constants_.validate();
  flow_.validate();
  demand_.validate(*net_);
  headway_millis_ = flow_.headway_millis();

  const std::size_t m = net_->intersection_count();
  if (initial_splits.size() != m) {
    throw ConfigError("expected " + std::to_string(m) + " initial splits, got " +
                      std::to_string(initial_splits.size()));
  }
  plans_.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Seconds s = initial_splits[i];
    if (s < constants_.split_lower || s > constants_.split_upper) {
      throw ConfigError("initial split " + std::to_string(s) + " at intersection " +
                        std::to_string(i) + " outside [" + std::to_string(constants_.split_lower) +
                        ", " + std::to_string(constants_.split_upper) + "]");
    }
    plans_.emplace_back(NodeId{static_cast<std::uint32_t>(i)}, s, constants_);
  }
  green_run_.assign(m, std::array<Seconds, 4>{});

  links_.resize(net_->links.size());
  link_turns_.resize(net_->links.size());
  for (const auto& l : net_->links) {
    links_[l.id.value].t_avg = static_cast<double>(l.free_flow_time);
    if (l.to) {
      link_turns_[l.id.value] = demand_.turns_for(*l.to, opposite(l.heading));
    }
  }
}

const Link& SimState::stop_line_link(LinkId link) const {
  const Link& l = net_->link(link);
  if (!l.has_stop_line()) {
    throw LookupError("link " + std::to_string(link.value) + " has no stop line");
  }
  return l;
}

int SimState::measure_queue(LinkId link, int q_ub) const {
  stop_line_link(link);
  const int n = static_cast<int>(links_[link.value].queues[index_of(Movement::Straight)].size());
  return std::min(n, q_ub);
}

int SimState::queue_length(LinkId link, Movement movement) const {
  stop_line_link(link);
  return static_cast<int>(links_[link.value].queues[index_of(movement)].size());
}

int SimState::occupancy(LinkId link) const {
  net_->link(link);
  return links_[link.value].occupancy;
}

LinkStats SimState::link_stats(LinkId link) const {
  stop_line_link(link);
  const auto& s = links_[link.value];
  return {s.t_avg, s.exits_last_cycle};
}

std::vector<TripRecord> SimState::active_trips() const {
  std::vector<TripRecord> out;
  for (const auto& v : vehicles_) {
    if (!v.trip.visits.empty() && !v.trip.exit_time) {
      out.push_back(v.trip);
    }
  }
  return out;
}

const SignalPlan& SimState::plan(NodeId node) const {
  if (node.value >= plans_.size()) {
    throw LookupError("unknown intersection id " + std::to_string(node.value));
  }
  return plans_[node.value];
}

void SimState::request_split_delta(NodeId node, Seconds delta) {
  plan(node);
  plans_[node.value] = apply_split_delta(plans_[node.value], delta);
}

VehicleId SimState::spawn(Seconds now) {
  const auto id = static_cast<VehicleId>(vehicles_.size());
  VehicleState v;
  v.trip.vehicle = id;
  v.trip.entry_time = now;
  vehicles_.push_back(std::move(v));
  ++counters_.injected;
  ++counters_.on_network;
  return id;
}

void SimState::enter_link(VehicleId id, LinkId link, Seconds now) {
  const Link& l = net_->links[link.value];
  VehicleState& v = vehicles_[id];
  v.trip.visits.push_back({link, now, std::nullopt});
  v.stop_line_arrival = now + l.free_flow_time;
  if (l.has_stop_line()) {
    v.movement = sample_movement(link_turns_[link.value], rng_.uniform());
  }
  auto& ls = links_[link.value];
  ls.in_transit.push_back(id);
  ++ls.occupancy;
}

int SimState::preload_queue(LinkId link, Movement movement, int count) {
  const Link& l = stop_line_link(link);
  auto& ls = links_[link.value];
  int placed = 0;
  while (placed < count && ls.occupancy < l.jam_capacity) {
    const VehicleId id = spawn(clock_);
    VehicleState& v = vehicles_[id];
    v.trip.visits.push_back({link, clock_, std::nullopt});
    v.movement = movement;
    v.stop_line_arrival = clock_;
    ls.queues[index_of(movement)].push_back(id);
    ++ls.occupancy;
    ++placed;
  }
  return placed;
}

TickSummary SimState::advance(Seconds dt) {
  if (dt < 1) {
    throw ContractError("advance needs dt >= 1, got " + std::to_string(dt));
  }
  TickSummary total;
  for (Seconds i = 0; i < dt; ++i) {
    const Seconds now = clock_;
    TickSummary tick;
    roll_windows(now);
    inject(now, tick);
    arrive_at_stop_lines(now);
    discharge(now, tick);
    complete_exits(now, tick);
    ++clock_;
    for (auto& p : plans_) {
      p.advance_to(clock_);
    }
    total += tick;
  }
  return total;
}

void SimState::roll_windows(Seconds now) {
  if (now == 0) {
    return;
  }
  for (const auto& l : net_->links) {
    if (!l.to || !plans_[l.to->value].is_cycle_start(now)) {
      continue;
    }
    auto& s = links_[l.id.value];
    if (s.window_count > 0) {
      s.t_avg = s.window_sum / s.window_count;
    }
    s.exits_last_cycle = s.window_count;
    s.window_sum = 0.0;
    s.window_count = 0;
  }
}

void SimState::inject(Seconds now, TickSummary& summary) {
  double ramp = 1.0;
  if (demand_.ramp_up > 0 && now < demand_.ramp_up) {
    ramp = static_cast<double>(now) / static_cast<double>(demand_.ramp_up);
  }
  for (const auto& e : demand_.entries) {
    if (now < e.start || now >= e.end || e.rate_vph <= 0.0) {
      continue;
    }
    const int arrivals = rng_.poisson(e.rate_vph / 3600.0 * ramp);
    const Link& l = net_->links[e.entry_link.value];
    for (int k = 0; k < arrivals; ++k) {
      if (links_[l.id.value].occupancy >= l.jam_capacity) {
        ++counters_.dropped;
        ++summary.dropped;
        continue;
      }
      const VehicleId id = spawn(now);
      enter_link(id, l.id, now);
      ++summary.injected;
    }
  }
}

void SimState::arrive_at_stop_lines(Seconds now) {
  for (const auto& l : net_->links) {
    if (!l.has_stop_line()) {
      continue;
    }
    auto& s = links_[l.id.value];
    while (!s.in_transit.empty() && vehicles_[s.in_transit.front()].stop_line_arrival <= now) {
      const VehicleId id = s.in_transit.front();
      s.in_transit.pop_front();
      s.queues[index_of(vehicles_[id].movement)].push_back(id);
    }
  }
}

void SimState::discharge(Seconds now, TickSummary& summary) {
  const MovementLanes& layout = net_->geometry.approach_layout;
  for (std::size_t n = 0; n < plans_.size(); ++n) {
    const SignalIndications signal = movement_signal(plans_[n], now);
    auto& runs = green_run_[n];
    for (std::size_t g = 0; g < 4; ++g) {
      runs[g] = signal.group[g] == Indication::Green ? runs[g] + 1 : 0;
    }
    const Intersection& node = net_->intersections[n];
    for (Direction side : kDirections) {
      const LinkId approach = node.incoming[index_of(side)];
      const Link& in = net_->links[approach.value];
      auto& s = links_[approach.value];
      for (Movement m : kMovements) {
        const auto group = static_cast<std::size_t>(controlling_group(in.heading, m));
        auto& credit = s.credit[index_of(m)];
        // Yellow is treated as red: only green serves the queue.
        if (signal.group[group] != Indication::Green) {
          credit = 0;
          continue;
        }
        if (runs[group] > flow_.startup_lost_time) {
          credit += static_cast<std::int64_t>(lanes_for(layout, m)) * 1000;
        }
        auto& queue = s.queues[index_of(m)];
        const LinkId out_id = node.outgoing[index_of(departure_heading(in.heading, m))];
        const Link& out = net_->links[out_id.value];
        while (credit >= headway_millis_ && !queue.empty()) {
          if (links_[out_id.value].occupancy >= out.jam_capacity) {
            break;  // spillback
          }
          const VehicleId id = queue.front();
          queue.pop_front();
          --s.occupancy;
          credit -= headway_millis_;
          VehicleState& v = vehicles_[id];
          v.trip.visits.back().leave = now;
          const double link_time = static_cast<double>(now - v.trip.visits.back().enter);
          s.window_sum += link_time;
          ++s.window_count;
          enter_link(id, out_id, now);
          ++summary.discharged;
          if (observer_) {
            observer_({now, approach, m, id});
          }
        }
        // At most one vehicle's worth of unused service carries within a green.
        credit = std::min(credit, headway_millis_);
      }
    }
  }
}

void SimState::complete_exits(Seconds now, TickSummary& summary) {
  for (const auto& l : net_->links) {
    if (l.kind != LinkKind::Exit) {
      continue;
    }
    auto& s = links_[l.id.value];
    while (!s.in_transit.empty() && vehicles_[s.in_transit.front()].stop_line_arrival <= now) {
      const VehicleId id = s.in_transit.front();
      s.in_transit.pop_front();
      --s.occupancy;
      VehicleState& v = vehicles_[id];
      v.trip.visits.back().leave = now;
      v.trip.exit_time = now;
      completed_.push_back(std::move(v.trip));
      v.trip = TripRecord{};
      ++counters_.exited;
      --counters_.on_network;
      ++summary.exited;
    }
  }
}

void SimState::check_invariants() const {
  if (counters_.injected != counters_.exited + counters_.on_network) {
    throw std::logic_error("conservation broken: injected != exited + on_network");
  }
  std::int64_t on_links = 0;
  for (const auto& l : net_->links) {
    const auto& s = links_[l.id.value];
    int counted = static_cast<int>(s.in_transit.size());
    for (const auto& q : s.queues) {
      counted += static_cast<int>(q.size());
    }
    if (counted != s.occupancy) {
      throw std::logic_error("occupancy bookkeeping broken on link " +
                             std::to_string(l.id.value));
    }
    if (s.occupancy > l.jam_capacity) {
      throw std::logic_error("jam capacity exceeded on link " + std::to_string(l.id.value));
    }
    on_links += counted;
  }
  if (on_links != counters_.on_network) {
    throw std::logic_error("vehicles on links != on_network counter");
  }
  if (static_cast<std::int64_t>(completed_.size()) != counters_.exited) {
    throw std::logic_error("completed trip count != exited counter");
  }
}

bool SimState::same_state(const SimState& other) const {
  if (clock_ != other.clock_ || !(rng_ == other.rng_) || counters_ != other.counters_) {
    return false;
  }
  if (plans_.size() != other.plans_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < plans_.size(); ++i) {
    if (plans_[i].split() != other.plans_[i].split() ||
        plans_[i].pending_split() != other.plans_[i].pending_split()) {
      return false;
    }
  }
  return green_run_ == other.green_run_ && links_ == other.links_ &&
         vehicles_ == other.vehicles_ && completed_ == other.completed_;
}

}  // namespace gridtsc

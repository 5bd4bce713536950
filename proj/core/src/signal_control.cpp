#include "gridtsc/signal_control.hpp"

#include <algorithm>
#include <string>

#include "gridtsc/errors.hpp"

namespace gridtsc {

void SignalConstants::validate() const {
  if (cycle <= 0 || left_phase <= 0 || yellow < 0 || all_red < 0) {
    throw ConfigError("signal constants must be positive (cycle, left_phase) or non-negative");
  }
  if (split_step <= 0) {
    throw ConfigError("split step must be positive");
  }
  if (!(split_lower <= default_split && default_split <= split_upper)) {
    throw ConfigError("default split " + std::to_string(default_split) + " outside [" +
                      std::to_string(split_lower) + ", " + std::to_string(split_upper) + "]");
  }
  // P1 shrinks at the lower bound, P3 at the upper bound.
  if (split_lower - left_phase <= 0) {
    throw ConfigError("split lower bound leaves no north-south through green");
  }
  if (total_green() - split_upper - left_phase <= 0) {
    throw ConfigError("split upper bound leaves no east-west through green");
  }
}

PhaseTable derive_phase_table(Seconds split, const SignalConstants& constants) {
  if (split < constants.split_lower || split > constants.split_upper) {
    throw BoundsError("split " + std::to_string(split) + " outside [" +
                      std::to_string(constants.split_lower) + ", " +
                      std::to_string(constants.split_upper) + "]");
  }
  PhaseTable t;
  t.ns_through = split - constants.left_phase;
  t.ns_left = constants.left_phase;
  t.ew_through = constants.total_green() - split - constants.left_phase;
  t.ew_left = constants.left_phase;
  t.transition = constants.transition();
  if (t.ns_through <= 0 || t.ew_through <= 0) {
    throw ConfigError("signal constants give a non-positive through phase at split " +
                      std::to_string(split));
  }
  return t;
}

bool SignalIndications::all_red() const noexcept {
  return std::all_of(group.begin(), group.end(), [](Indication i) { return i == Indication::Red; });
}

std::string_view to_string(Indication i) noexcept {
  switch (i) {
    case Indication::Green:
      return "green";
    case Indication::Yellow:
      return "yellow";
    case Indication::Red:
      return "red";
  }
  return "?";
}

SignalPlan::SignalPlan(NodeId intersection, Seconds split, const SignalConstants& constants)
    : SignalPlan(intersection, split, constants, constants.offset) {}

SignalPlan::SignalPlan(NodeId intersection, Seconds split, const SignalConstants& constants,
                       Seconds offset)
    : intersection_(intersection),
      split_(split),
      offset_(offset),
      constants_(constants),
      phases_(derive_phase_table(split, constants)) {}

Seconds SignalPlan::cycle_position(Seconds t) const noexcept {
  const Seconds c = constants_.cycle;
  return ((t - offset_) % c + c) % c;
}

bool SignalPlan::advance_to(Seconds t) {
  if (!pending_ || !is_cycle_start(t)) {
    return false;
  }
  const Seconds next = *pending_;
  pending_.reset();
  if (next == split_) {
    return false;
  }
  phases_ = derive_phase_table(next, constants_);
  split_ = next;
  return true;
}

void SignalPlan::set_pending(Seconds split) {
  if (split < constants_.split_lower || split > constants_.split_upper) {
    throw BoundsError("pending split " + std::to_string(split) + " outside bounds");
  }
  pending_ = split;
}

SignalPlan apply_split_delta(const SignalPlan& plan, Seconds delta) {
  const Seconds step = plan.constants().split_step;
  if (delta != 0 && delta != step && delta != -step) {
    throw InvalidActionError("split delta " + std::to_string(delta) + " is not one of -" +
                             std::to_string(step) + ", 0, +" + std::to_string(step));
  }
  SignalPlan next = plan;
  if (delta != 0) {
    const auto& k = plan.constants();
    next.set_pending(std::clamp(plan.split() + delta, k.split_lower, k.split_upper));
  }
  return next;
}

SignalIndications movement_signal(const SignalPlan& plan, Seconds t) {
  const PhaseTable& p = plan.phases();
  const Seconds yellow = plan.constants().yellow;
  const Seconds pos = plan.cycle_position(t);

  SignalIndications out;
  const std::array<std::pair<MovementGroup, Seconds>, 4> order = {
      {{MovementGroup::NsThrough, p.ns_through},
       {MovementGroup::NsLeft, p.ns_left},
       {MovementGroup::EwThrough, p.ew_through},
       {MovementGroup::EwLeft, p.ew_left}}};
  Seconds start = 0;
  for (const auto& [group, green] : order) {
    const Seconds rel = pos - start;
    if (rel >= 0 && rel < green) {
      out.group[static_cast<std::size_t>(group)] = Indication::Green;
      break;
    }
    if (rel >= green && rel < green + yellow) {
      out.group[static_cast<std::size_t>(group)] = Indication::Yellow;
      break;
    }
    start += green + p.transition;
  }
  return out;
}

Seconds effective_green(const PhaseTable& table, MovementGroup group) noexcept {
  switch (group) {
    case MovementGroup::NsThrough:
      return table.ns_through;
    case MovementGroup::NsLeft:
      return table.ns_left;
    case MovementGroup::EwThrough:
      return table.ew_through;
    case MovementGroup::EwLeft:
      return table.ew_left;
  }
  return 0;
}

Seconds effective_green(const SignalPlan& plan, MovementGroup group) {
  return effective_green(plan.phases(), group);
}

}  // namespace gridtsc

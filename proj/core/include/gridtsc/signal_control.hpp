#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "gridtsc/net_model.hpp"

namespace gridtsc {

/// Fixed timing constants shared by every intersection of a scenario.
/// The split is the green time of the two north-south phases; transitions
/// (yellow + all-red) are not part of it.
struct SignalConstants {
  Seconds cycle = 100;
  Seconds left_phase = 8;
  Seconds yellow = 2;
  Seconds all_red = 2;
  Seconds offset = 0;
  Seconds split_lower = 30;
  Seconds split_upper = 70;
  Seconds split_step = 3;
  Seconds default_split = 50;

  Seconds transition() const noexcept { return yellow + all_red; }
  /// Green time shared by the four phases.
  Seconds total_green() const noexcept { return cycle - 4 * transition(); }

  /// Throws ConfigError when the bounds or derived phase durations are infeasible.
  void validate() const;
};

struct PhaseTable {
  Seconds ns_through = 0;  // P1, also serves NS right turns
  Seconds ns_left = 0;     // P2
  Seconds ew_through = 0;  // P3, also serves EW right turns
  Seconds ew_left = 0;     // P4
  Seconds transition = 0;  // after each phase

  Seconds cycle() const noexcept {
    return ns_through + ns_left + ew_through + ew_left + 4 * transition;
  }
  bool operator==(const PhaseTable&) const = default;
};

/// P1 = split - left, P3 = total_green - split - left, P2 = P4 = left.
/// Throws BoundsError when split is outside [split_lower, split_upper].
PhaseTable derive_phase_table(Seconds split, const SignalConstants& constants);

enum class MovementGroup : std::uint8_t { NsThrough = 0, NsLeft = 1, EwThrough = 2, EwLeft = 3 };

enum class Indication : std::uint8_t { Green, Yellow, Red };

struct SignalIndications {
  std::array<Indication, 4> group{Indication::Red, Indication::Red, Indication::Red,
                                  Indication::Red};

  Indication operator[](MovementGroup g) const noexcept {
    return group[static_cast<std::size_t>(g)];
  }
  bool all_red() const noexcept;
  bool operator==(const SignalIndications&) const = default;
};

std::string_view to_string(Indication i) noexcept;

/// Timing plan of one intersection. The active split only changes at the
/// start of a cycle; a requested change waits in pending_split until then.
class SignalPlan {
 public:
  SignalPlan(NodeId intersection, Seconds split, const SignalConstants& constants);
  SignalPlan(NodeId intersection, Seconds split, const SignalConstants& constants, Seconds offset);

  NodeId intersection() const noexcept { return intersection_; }
  Seconds split() const noexcept { return split_; }
  std::optional<Seconds> pending_split() const noexcept { return pending_; }
  Seconds offset() const noexcept { return offset_; }
  const SignalConstants& constants() const noexcept { return constants_; }
  const PhaseTable& phases() const noexcept { return phases_; }

  /// Position inside the cycle, in [0, cycle).
  Seconds cycle_position(Seconds t) const noexcept;
  bool is_cycle_start(Seconds t) const noexcept { return cycle_position(t) == 0; }

  /// Called when the clock reaches t; activates a pending split when t is a
  /// cycle start. Returns true if the active split changed.
  bool advance_to(Seconds t);

  /// Overwrites the pending split; value must be within bounds.
  void set_pending(Seconds split);

 private:
  NodeId intersection_;
  Seconds split_;
  std::optional<Seconds> pending_;
  Seconds offset_;
  SignalConstants constants_;
  PhaseTable phases_;
};

/// pending = clamp(split + delta). Delta 0 returns the plan untouched.
/// Throws InvalidActionError unless delta is one of -step, 0, +step.
SignalPlan apply_split_delta(const SignalPlan& plan, Seconds delta);

/// Indication of each movement group at time t under the plan's active split.
SignalIndications movement_signal(const SignalPlan& plan, Seconds t);

/// Green seconds per cycle available to the group under the active split.
Seconds effective_green(const SignalPlan& plan, MovementGroup group);
Seconds effective_green(const PhaseTable& table, MovementGroup group) noexcept;

/// Group controlling through (and right-turn) traffic travelling on `heading`.
constexpr MovementGroup through_group(Direction heading) noexcept {
  return is_north_south(heading) ? MovementGroup::NsThrough : MovementGroup::EwThrough;
}
constexpr MovementGroup left_group(Direction heading) noexcept {
  return is_north_south(heading) ? MovementGroup::NsLeft : MovementGroup::EwLeft;
}

}  // namespace gridtsc

#include <gtest/gtest.h>

#include "gridtsc/errors.hpp"
#include "gridtsc/signal_control.hpp"

using namespace gridtsc;

namespace {

const SignalConstants kDefaults{};

// Phase of the cycle at position p, written out from the fixed phase order
// P1 (NS through), P2 (NS left), P3 (EW through), P4 (EW left), each followed
// by yellow then all-red.
SignalIndications expected_at(Seconds split, Seconds p) {
  const Seconds durations[4] = {split - 8, 8, 84 - split - 8, 8};
  SignalIndications out;
  Seconds start = 0;
  for (int g = 0; g < 4; ++g) {
    const Seconds green_end = start + durations[g];
    if (p >= start && p < green_end) {
      out.group[g] = Indication::Green;
    } else if (p >= green_end && p < green_end + 2) {
      out.group[g] = Indication::Yellow;
    }
    start = green_end + 4;
  }
  return out;
}

}  // namespace

TEST(PhaseTable, DefaultSplit) {
  const PhaseTable t = derive_phase_table(50, kDefaults);
  EXPECT_EQ(t.ns_through, 42);
  EXPECT_EQ(t.ns_left, 8);
  EXPECT_EQ(t.ew_through, 26);
  EXPECT_EQ(t.ew_left, 8);
  EXPECT_EQ(t.transition, 4);
  EXPECT_EQ(t.cycle(), 100);
}

TEST(PhaseTable, Bounds) {
  EXPECT_EQ(derive_phase_table(30, kDefaults).ns_through, 22);
  EXPECT_EQ(derive_phase_table(30, kDefaults).ew_through, 46);
  EXPECT_EQ(derive_phase_table(70, kDefaults).ns_through, 62);
  EXPECT_EQ(derive_phase_table(70, kDefaults).ew_through, 6);
  EXPECT_THROW(derive_phase_table(29, kDefaults), BoundsError);
  EXPECT_THROW(derive_phase_table(71, kDefaults), BoundsError);
}

TEST(PhaseTable, EverySplitFillsTheCycle) {
  for (Seconds s = kDefaults.split_lower; s <= kDefaults.split_upper; ++s) {
    const PhaseTable t = derive_phase_table(s, kDefaults);
    EXPECT_EQ(t.ns_through + t.ns_left + t.ew_through + t.ew_left + 4 * 4, 100) << s;
    EXPECT_EQ(t.ns_through + t.ns_left, s);
    EXPECT_EQ(t.ns_left, t.ew_left);
    EXPECT_GT(t.ew_through, 0);
  }
}

TEST(SignalConstants, Validation) {
  EXPECT_NO_THROW(kDefaults.validate());
  SignalConstants c = kDefaults;
  c.split_upper = 77;  // P3 would be -1
  EXPECT_THROW(c.validate(), ConfigError);
  c = kDefaults;
  c.split_step = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = kDefaults;
  c.default_split = 80;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MovementSignal, Examples) {
  const SignalPlan plan(NodeId{0}, 50, kDefaults);
  EXPECT_EQ(movement_signal(plan, 0)[MovementGroup::NsThrough], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 41)[MovementGroup::NsThrough], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 42)[MovementGroup::NsThrough], Indication::Yellow);
  EXPECT_EQ(movement_signal(plan, 43)[MovementGroup::NsThrough], Indication::Yellow);
  EXPECT_TRUE(movement_signal(plan, 44).all_red());
  EXPECT_TRUE(movement_signal(plan, 45).all_red());
  EXPECT_EQ(movement_signal(plan, 46)[MovementGroup::NsLeft], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 58)[MovementGroup::EwThrough], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 88)[MovementGroup::EwLeft], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 100)[MovementGroup::NsThrough], Indication::Green);
}

TEST(MovementSignal, MatchesPhaseOrderForEverySplit) {
  for (Seconds s = 30; s <= 70; ++s) {
    const SignalPlan plan(NodeId{0}, s, kDefaults);
    for (Seconds t = 0; t < 300; ++t) {
      EXPECT_EQ(movement_signal(plan, t), expected_at(s, t % 100)) << "split " << s << " t " << t;
    }
  }
}

TEST(MovementSignal, AtMostOneGroupActive) {
  for (Seconds s = 30; s <= 70; s += 1) {
    const SignalPlan plan(NodeId{0}, s, kDefaults);
    int all_red = 0;
    for (Seconds t = 0; t < 100; ++t) {
      const auto ind = movement_signal(plan, t);
      int active = 0;
      for (auto g : ind.group) {
        active += g != Indication::Red ? 1 : 0;
      }
      EXPECT_LE(active, 1);
      all_red += active == 0 ? 1 : 0;
    }
    EXPECT_EQ(all_red, 8);
  }
}

TEST(MovementSignal, Offset) {
  const SignalPlan plan(NodeId{0}, 50, kDefaults, 10);
  EXPECT_EQ(movement_signal(plan, 10)[MovementGroup::NsThrough], Indication::Green);
  EXPECT_EQ(movement_signal(plan, 5)[MovementGroup::EwLeft], Indication::Green);
  EXPECT_TRUE(movement_signal(plan, 8).all_red());
  EXPECT_EQ(plan.cycle_position(5), 95);
  EXPECT_TRUE(plan.is_cycle_start(110));
}

TEST(ApplySplitDelta, Examples) {
  const SignalPlan plan(NodeId{0}, 50, kDefaults);
  EXPECT_EQ(apply_split_delta(plan, 3).pending_split(), 53);
  EXPECT_EQ(apply_split_delta(plan, -3).pending_split(), 47);
  EXPECT_EQ(apply_split_delta(SignalPlan(NodeId{0}, 70, kDefaults), 3).pending_split(), 70);
  EXPECT_EQ(apply_split_delta(SignalPlan(NodeId{0}, 30, kDefaults), -3).pending_split(), 30);
  EXPECT_EQ(apply_split_delta(SignalPlan(NodeId{0}, 69, kDefaults), 3).pending_split(), 70);
  EXPECT_FALSE(apply_split_delta(plan, 0).pending_split());
  EXPECT_EQ(apply_split_delta(plan, 3).split(), 50);
  EXPECT_THROW(apply_split_delta(plan, 2), InvalidActionError);
  EXPECT_THROW(apply_split_delta(plan, 6), InvalidActionError);
}

TEST(ApplySplitDelta, PendingIsRelativeToActiveAndOverwrites) {
  SignalPlan plan = apply_split_delta(SignalPlan(NodeId{0}, 50, kDefaults), 3);
  plan = apply_split_delta(plan, 3);
  EXPECT_EQ(plan.pending_split(), 53);
  plan = apply_split_delta(plan, -3);
  EXPECT_EQ(plan.pending_split(), 47);
  plan = apply_split_delta(plan, 0);
  EXPECT_EQ(plan.pending_split(), 47);
}

TEST(SignalPlan, PendingActivatesOnlyAtCycleStart) {
  SignalPlan plan = apply_split_delta(SignalPlan(NodeId{0}, 50, kDefaults), 3);
  for (Seconds t = 1; t < 100; ++t) {
    EXPECT_FALSE(plan.advance_to(t));
    EXPECT_EQ(plan.split(), 50);
  }
  EXPECT_TRUE(plan.advance_to(100));
  EXPECT_EQ(plan.split(), 53);
  EXPECT_FALSE(plan.pending_split());
  EXPECT_EQ(plan.phases(), derive_phase_table(53, kDefaults));
}

TEST(SignalPlan, BoundsOnConstruction) {
  EXPECT_THROW(SignalPlan(NodeId{0}, 20, kDefaults), BoundsError);
  SignalPlan plan(NodeId{0}, 50, kDefaults);
  EXPECT_THROW(plan.set_pending(71), BoundsError);
}

TEST(EffectiveGreen, DefaultAndDefaultRelative) {
  const SignalPlan plan(NodeId{0}, 50, kDefaults);
  EXPECT_EQ(effective_green(plan, MovementGroup::NsThrough), 42);
  EXPECT_EQ(effective_green(plan, MovementGroup::EwThrough), 26);
  EXPECT_EQ(effective_green(plan, MovementGroup::NsLeft), 8);
  for (Seconds s = 30; s <= 70; ++s) {
    const SignalPlan p(NodeId{0}, s, kDefaults);
    EXPECT_EQ(effective_green(p, MovementGroup::NsThrough) +
                  effective_green(p, MovementGroup::EwThrough),
              68);
  }
}

TEST(Groups, ThroughAndLeftByHeading) {
  EXPECT_EQ(through_group(Direction::North), MovementGroup::NsThrough);
  EXPECT_EQ(through_group(Direction::South), MovementGroup::NsThrough);
  EXPECT_EQ(through_group(Direction::East), MovementGroup::EwThrough);
  EXPECT_EQ(left_group(Direction::West), MovementGroup::EwLeft);
}

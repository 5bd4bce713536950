#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <nlohmann/json.hpp>
#include <vector>

#include "gridtsc/errors.hpp"
#include "gridtsc/rl_env.hpp"
#include "gridtsc/rng.hpp"
#include "reward_oracle.hpp"

using namespace gridtsc;

namespace {

EpisodeConfig grid_cfg(int rows, int cols, double rate, Seconds duration = 16200) {
  EpisodeConfig cfg;
  cfg.scenario.network = std::make_shared<const NetworkSpec>(build_grid(rows, cols));
  for (LinkId id : cfg.scenario.network->entry_links()) {
    cfg.scenario.demand.entries.push_back({id, rate});
  }
  cfg.duration = duration;
  return cfg;
}

void expect_rel(double actual, double expected, double tol = 1e-12) {
  const double scale = std::max(1.0, std::abs(expected));
  EXPECT_LE(std::abs(actual - expected), tol * scale) << actual << " vs " << expected;
}

}  // namespace

TEST(EnvSpec, DefaultDimensions) {
  Env env(grid_cfg(5, 5, 0.0, 2000));
  const EnvSpec s = env.spec();
  EXPECT_EQ(s.links, 80u);
  EXPECT_EQ(s.intersections, 25u);
  EXPECT_EQ(s.action_count, 75u);
  EXPECT_EQ(s.control_interval, 25);
  EXPECT_EQ(s.q_ub, 50);
  EXPECT_EQ(s.split_lower, 30);
  EXPECT_EQ(s.split_upper, 70);
  EXPECT_FALSE(env.started());

  const Observation obs = env.reset(7);
  EXPECT_EQ(obs.size(), 105u);
  EXPECT_EQ(obs.flat().size(), 105u);
  EXPECT_EQ(obs.sim_time, 1800);
  for (double q : obs.queues) EXPECT_EQ(q, 0.0);
  for (double s : obs.splits) EXPECT_EQ(s, 50.0);
}

TEST(EpisodeConfig, Bookkeeping) {
  const EpisodeConfig cfg = grid_cfg(5, 5, 0.0);
  EXPECT_EQ(cfg.control_steps(), 576u);
  EXPECT_EQ(cfg.recorded_cycles(), 144u);
}

TEST(EpisodeConfig, Validation) {
  EpisodeConfig cfg = grid_cfg(1, 1, 0.0);
  cfg.warmup = cfg.duration;
  EXPECT_THROW(Env{cfg}, ConfigError);
  cfg = grid_cfg(1, 1, 0.0);
  cfg.duration = 16210;
  EXPECT_THROW(Env{cfg}, ConfigError);
  cfg = grid_cfg(1, 1, 0.0);
  cfg.initial_splits = std::vector<Seconds>{80};
  EXPECT_THROW(Env{cfg}, ConfigError);
  cfg = grid_cfg(1, 1, 0.0);
  cfg.reward.q_lc = 30;
  EXPECT_THROW(Env{cfg}, ConfigError);
  cfg = grid_cfg(1, 1, 0.0);
  cfg.scenario.network = nullptr;
  EXPECT_THROW(Env{cfg}, ConfigError);
}

TEST(RewardConfig, Validation) {
  RewardConfig r;
  EXPECT_NO_THROW(r.validate());
  r.w_cp = 0.5;
  EXPECT_THROW(r.validate(), ConfigError);
  r = {};
  r.f_sat = 0.0;
  EXPECT_THROW(r.validate(), ConfigError);
  r = {};
  r.q_hc = 60;
  EXPECT_THROW(r.validate(), ConfigError);
  r = {};
  r.q_lc = 0;
  EXPECT_THROW(r.validate(), ConfigError);
}

TEST(DecodeAction, Examples) {
  EXPECT_EQ(decode_action(0, 25, 3), (DecodedAction{0, -3}));
  EXPECT_EQ(decode_action(1, 25, 3), (DecodedAction{0, 0}));
  EXPECT_EQ(decode_action(74, 25, 3), (DecodedAction{24, 3}));
  EXPECT_THROW(decode_action(75, 25, 3), InvalidActionError);
  EXPECT_THROW(decode_action(-1, 25, 3), InvalidActionError);
  EXPECT_THROW(encode_action(0, 3), InvalidActionError);
}

TEST(DecodeAction, BijectiveWithEncode) {
  for (std::size_t m = 1; m <= 100; ++m) {
    for (int id = 0; id < static_cast<int>(3 * m); ++id) {
      const DecodedAction d = decode_action(id, m, 3);
      ASSERT_EQ(encode_action(d.intersection, d.delta / 3 + 1).value, id);
    }
  }
}

TEST(RewardCongestion, Examples) {
  const RewardConfig cfg;
  EXPECT_EQ(reward_congestion(std::vector<double>{5, 10}, cfg), 0.0);
  EXPECT_EQ(reward_congestion(std::vector<double>{15}, cfg), -15.0);
  EXPECT_EQ(reward_congestion(std::vector<double>{30}, cfg), -300.0);
  EXPECT_EQ(reward_congestion(std::vector<double>{5, 15, 30}, cfg), -315.0);
  EXPECT_EQ(reward_congestion(std::vector<double>{}, cfg), 0.0);
}

TEST(RewardCongestion, BranchBoundaries) {
  const RewardConfig cfg;
  EXPECT_EQ(classify_queue(10, cfg), CongestionLevel::Free);
  EXPECT_EQ(classify_queue(10.5, cfg), CongestionLevel::Light);
  EXPECT_EQ(classify_queue(24.99, cfg), CongestionLevel::Light);
  EXPECT_EQ(classify_queue(25, cfg), CongestionLevel::Heavy);
  EXPECT_EQ(congestion_link_reward(10, cfg), 0.0);
  EXPECT_EQ(congestion_link_reward(25, cfg), -250.0);
  EXPECT_EQ(congestion_link_reward(24, cfg), -24.0);
}

TEST(RewardTravelTime, Examples) {
  const RewardConfig cfg;
  EXPECT_EQ(travel_time_link_reward({8, 60, 45, 42}, cfg), 0.0);
  expect_rel(travel_time_link_reward({15, 60, 45, 42}, cfg), -3214.2857142857142);
  EXPECT_EQ(travel_time_link_reward({30, 80, 45, 42}, cfg), -40000.0);
  EXPECT_EQ(travel_time_link_reward({30, 80, 1, 99}, cfg), -40000.0);
  EXPECT_THROW(travel_time_link_reward({15, 60, 0, 42}, cfg), ConfigError);
  EXPECT_THROW(travel_time_link_reward({15, 60, 45, -1}, cfg), ConfigError);
  EXPECT_EQ(travel_time_link_reward({5, 60, 0, 0}, cfg), 0.0);
}

TEST(Rewards, MatchIndependentOracle) {
  Rng rng(17);
  const RewardConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.below(100);
    std::vector<double> queues;
    std::vector<TravelTimeTerm> terms;
    std::vector<oracle::TravelTerm> oterms;
    for (std::size_t i = 0; i < n; ++i) {
      // Mix integer queues (including the branch boundaries) with fractional ones.
      const double q = rng.below(4) == 0 ? 50.0 * rng.uniform() : static_cast<double>(rng.below(51));
      const double t_avg = 1.0 + 300.0 * rng.uniform();
      const double gu = 1.0 + 60.0 * rng.uniform();
      const double gd = 1.0 + 60.0 * rng.uniform();
      queues.push_back(q);
      terms.push_back({q, t_avg, gu, gd});
      oterms.push_back({q, t_avg, gu, gd});
    }
    expect_rel(reward_congestion(queues, cfg), oracle::congestion(queues));
    expect_rel(reward_travel_time(terms, cfg), oracle::travel_time(oterms));
  }
}

TEST(Rewards, NonPositiveAndZeroIffFree) {
  Rng rng(5);
  const RewardConfig cfg;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> queues(1 + rng.below(10));
    for (auto& q : queues) q = static_cast<double>(rng.below(51));
    const double r = reward_congestion(queues, cfg);
    const bool all_free = std::all_of(queues.begin(), queues.end(), [](double q) { return q <= 10; });
    EXPECT_LE(r, 0.0);
    EXPECT_EQ(r == 0.0, all_free);
  }
  double prev = 0.0;
  for (int q = 0; q <= 50; ++q) {
    const double r = congestion_link_reward(q, cfg);
    EXPECT_LE(r, prev) << q;
    prev = r;
  }
}

TEST(EnvStep, ErrorsLeaveStateAlone) {
  EpisodeConfig cfg = grid_cfg(2, 2, 700.0, 2100);
  Env env(cfg);
  EXPECT_THROW(env.step(ActionId{1}), ContractError);
  EXPECT_THROW(env.sim(), ContractError);

  Env twin(cfg);
  env.reset(3);
  twin.reset(3);
  env.step(ActionId{5});
  twin.step(ActionId{5});
  EXPECT_THROW(env.step(ActionId{12}), InvalidActionError);
  EXPECT_THROW(env.step(ActionId{-1}), InvalidActionError);
  EXPECT_TRUE(env.sim().same_state(twin.sim()));
  EXPECT_EQ(env.steps_taken(), twin.steps_taken());
  while (!env.done()) {
    const StepResult a = env.step(ActionId{2});
    const StepResult b = twin.step(ActionId{2});
    EXPECT_EQ(a.observation, b.observation);
    EXPECT_EQ(a.reward, b.reward);
  }
  EXPECT_EQ(env.steps_taken(), 12u);
  EXPECT_THROW(env.step(ActionId{1}), EpisodeFinishedError);
  EXPECT_EQ(env.sim().clock(), 2100);
}

TEST(EnvStep, DeltaAppliesAtNextCycleStart) {
  Env env(grid_cfg(1, 1, 0.0, 2300));
  env.reset();
  StepResult r = env.step(ActionId{2});
  EXPECT_EQ(r.observation.splits[0], 50.0);
  EXPECT_EQ(r.info.pending_splits[0], 53.0);
  for (int i = 0; i < 3; ++i) r = env.step(kNoOpAction);
  EXPECT_EQ(r.observation.sim_time, 1900);
  EXPECT_EQ(r.observation.splits[0], 53.0);
  EXPECT_EQ(r.info.pending_splits[0], 53.0);
}

TEST(EnvStep, NoOpKeepsDefaultSplits) {
  Env env(grid_cfg(2, 2, 900.0, 4300));
  env.reset(1);
  while (!env.done()) {
    const StepResult r = env.step(kNoOpAction);
    for (double s : r.observation.splits) ASSERT_EQ(s, 50.0);
  }
  for (const auto& p : env.sim().plans()) EXPECT_FALSE(p.pending_split());
}

TEST(EnvStep, ZeroDemandGivesZeroReward) {
  for (auto variant : {RewardVariant::Congestion, RewardVariant::TravelTime}) {
    EpisodeConfig cfg = grid_cfg(2, 2, 0.0, 2300);
    cfg.reward.variant = variant;
    Env env(cfg);
    const Observation obs = env.reset();
    for (double q : obs.queues) EXPECT_EQ(q, 0.0);
    while (!env.done()) {
      EXPECT_EQ(env.step(ActionId{0}).reward, 0.0);
    }
    EXPECT_EQ(env.episode_return(), 0.0);
    EXPECT_EQ(env.mean_queue_sum(), 0.0);
  }
}

TEST(EnvStep, RewardMatchesOracleFromInfo) {
  for (auto variant : {RewardVariant::Congestion, RewardVariant::TravelTime}) {
    EpisodeConfig cfg = grid_cfg(2, 2, 1300.0, 5800);
    cfg.scenario.observe_entry_links = true;
    cfg.reward.variant = variant;
    Env env(cfg);
    env.reset(9);
    Rng rng(1);
    bool saw_light = false;
    bool saw_heavy = false;
    while (!env.done()) {
      const StepResult r = env.step(ActionId{static_cast<int>(rng.below(12))});
      const StepInfo& info = r.info;
      ASSERT_EQ(info.queues, r.observation.queues);
      ASSERT_EQ(info.link_rewards.size(), info.queues.size());
      double expected = 0.0;
      if (variant == RewardVariant::Congestion) {
        expected = oracle::congestion(info.queues);
      } else {
        std::vector<oracle::TravelTerm> terms;
        for (std::size_t i = 0; i < info.queues.size(); ++i) {
          terms.push_back({info.queues[i], info.t_avg[i], info.t_eg_u[i], info.t_eg_d[i]});
        }
        expected = oracle::travel_time(terms);
      }
      expect_rel(r.reward, expected);
      for (double q : info.queues) {
        saw_light |= q > 10 && q < 25;
        saw_heavy |= q >= 25;
      }
    }
    EXPECT_TRUE(saw_light);
    EXPECT_TRUE(saw_heavy);
  }
}

TEST(EnvStep, TravelTimeGreensFollowUpstreamSplit) {
  EpisodeConfig cfg = grid_cfg(1, 2, 0.0, 2300);
  cfg.reward.variant = RewardVariant::TravelTime;
  cfg.initial_splits = std::vector<Seconds>{53, 50};
  Env env(cfg);
  env.reset();
  const StepInfo info = env.info();
  const NetworkSpec& net = *cfg.scenario.network;
  for (std::size_t i = 0; i < env.observed_links().size(); ++i) {
    const Link& l = net.link(env.observed_links()[i]);
    const bool ns = is_north_south(l.heading);
    EXPECT_EQ(info.t_eg_d[i], ns ? 42.0 : 26.0);
    if (l.from->value == 0) {
      EXPECT_EQ(info.t_eg_u[i], ns ? 45.0 : 23.0);
    } else {
      EXPECT_EQ(info.t_eg_u[i], info.t_eg_d[i]);
    }
    EXPECT_EQ(info.t_avg[i], static_cast<double>(l.free_flow_time));
  }
}

TEST(EnvStep, ObservationBoundsAndDeterminism) {
  EpisodeConfig cfg = grid_cfg(3, 3, 1500.0, 5800);
  auto run = [&](std::uint64_t seed) {
    Env env(cfg);
    std::vector<Observation> trace{env.reset(seed)};
    Rng rng(seed);
    while (!env.done()) {
      trace.push_back(env.step(ActionId{static_cast<int>(rng.below(27))}).observation);
    }
    return trace;
  };
  const auto a = run(4);
  EXPECT_EQ(a, run(4));
  EXPECT_NE(a, run(5));
  for (const auto& o : a) {
    ASSERT_EQ(o.queues.size(), 24u);
    for (double q : o.queues) {
      ASSERT_GE(q, 0.0);
      ASSERT_LE(q, 50.0);
    }
    for (double s : o.splits) {
      ASSERT_GE(s, 30.0);
      ASSERT_LE(s, 70.0);
    }
  }
}

TEST(EnvStep, CycleMaxDominatesBoundarySamples) {
  EpisodeConfig cfg = grid_cfg(2, 2, 1200.0, 4300);
  cfg.scenario.observe_entry_links = true;
  auto samples = [&](QueueSampling mode) {
    cfg.sampling = mode;
    Env env(cfg);
    env.reset(2);
    while (!env.done()) env.step(kNoOpAction);
    return env.queue_samples().samples();
  };
  const auto boundary = samples(QueueSampling::CycleBoundary);
  const auto max = samples(QueueSampling::CycleMax);
  ASSERT_EQ(boundary.size(), max.size());
  ASSERT_EQ(boundary.size(), 16u * 25u);
  bool strictly = false;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    ASSERT_GE(max[i], boundary[i]);
    strictly |= max[i] > boundary[i];
  }
  EXPECT_TRUE(strictly);
}

TEST(EnvInfo, JsonSchema) {
  Env env(grid_cfg(1, 2, 500.0, 1900));
  env.reset();
  const StepResult r = env.step(ActionId{4});
  const nlohmann::json j = to_json(r.info);
  EXPECT_EQ(j.at("schema"), kInfoSchema);
  EXPECT_EQ(j.at("sim_time"), 1825);
  EXPECT_EQ(j.at("reward_variant"), "congestion");
  for (const char* key : {"queues", "t_avg", "t_eg_u", "t_eg_d", "link_rewards"}) {
    EXPECT_EQ(j.at(key).size(), 2u) << key;
  }
  EXPECT_EQ(j.at("splits").size(), 2u);
  EXPECT_EQ(j.at("pending_splits"), nlohmann::json::array({50.0, 50.0}));
  EXPECT_GE(j.at("injected").get<int>(), 0);
  EXPECT_EQ(j.size(), 14u);
}

TEST(EnvEpisode, DefaultBookkeeping) {
  EpisodeConfig cfg = grid_cfg(5, 5, 700.0);
  Env env(cfg);
  env.reset(7);
  std::size_t steps = 0;
  while (!env.done()) {
    env.step(kNoOpAction);
    ++steps;
  }
  EXPECT_EQ(steps, 576u);
  EXPECT_EQ(env.sim().clock(), 16200);
  const EpisodeMetrics m = env.metrics();
  EXPECT_EQ(m.cycle_count, 144u);
  EXPECT_EQ(m.link_count, 80u);
  EXPECT_EQ(m.queue_samples.size(), 11520u);
  EXPECT_EQ(m.control_steps, 576);
  EXPECT_GT(m.completed_trips, 0);
}

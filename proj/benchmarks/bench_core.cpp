#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "gridtsc/controllers.hpp"
#include "gridtsc/meso_sim.hpp"
#include "gridtsc/rl_env.hpp"
#include "gridtsc/rng.hpp"
#include "gridtsc/signal_control.hpp"

using namespace gridtsc;

namespace {

EpisodeConfig grid_episode(int rows, int cols, double rate) {
  EpisodeConfig cfg;
  cfg.scenario.network = std::make_shared<const NetworkSpec>(build_grid(rows, cols));
  for (LinkId id : cfg.scenario.network->entry_links()) {
    cfg.scenario.demand.entries.push_back({id, rate});
  }
  cfg.scenario.demand.ramp_up = 1800;
  return cfg;
}

void BM_PhaseTable(benchmark::State& state) {
  const SignalConstants c;
  Seconds split = c.split_lower;
  for (auto _ : state) {
    benchmark::DoNotOptimize(derive_phase_table(split, c));
    split = split >= c.split_upper ? c.split_lower : split + 1;
  }
}
BENCHMARK(BM_PhaseTable);

void BM_MovementSignal(benchmark::State& state) {
  const SignalPlan plan(NodeId{0}, 53, SignalConstants{});
  Seconds t = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(movement_signal(plan, t++));
  }
}
BENCHMARK(BM_MovementSignal);

void BM_RewardCongestion(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> queues(static_cast<std::size_t>(state.range(0)));
  for (auto& q : queues) q = static_cast<double>(rng.below(51));
  const RewardConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reward_congestion(queues, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RewardCongestion)->Arg(80)->Arg(1000);

void BM_RewardTravelTime(benchmark::State& state) {
  Rng rng(2);
  std::vector<TravelTimeTerm> terms(static_cast<std::size_t>(state.range(0)));
  for (auto& t : terms) {
    t = {static_cast<double>(rng.below(51)), 22.0 + 100.0 * rng.uniform(), 26.0, 42.0};
  }
  const RewardConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reward_travel_time(terms, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RewardTravelTime)->Arg(80)->Arg(1000);

// One simulated hour of the 5x5 grid at 1 s ticks.
void BM_SimHour5x5(benchmark::State& state) {
  const EpisodeConfig cfg = grid_episode(5, 5, static_cast<double>(state.range(0)));
  const std::size_t m = cfg.scenario.network->intersection_count();
  for (auto _ : state) {
    SimState sim(cfg.scenario.network, cfg.scenario.demand, {}, {}, std::vector<Seconds>(m, 50), 7);
    sim.advance(3600);
    benchmark::DoNotOptimize(sim.counters());
  }
  state.SetItemsProcessed(state.iterations() * 3600);
}
BENCHMARK(BM_SimHour5x5)->Arg(600)->Arg(1200)->Unit(benchmark::kMillisecond);

// Full 576-step episode on the 5x5 grid.
void BM_Episode5x5(benchmark::State& state) {
  const EpisodeConfig cfg = grid_episode(5, 5, 900.0);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    if (state.range(0) == 0) {
      FixedTimePolicy fixed;
      benchmark::DoNotOptimize(run_episode(cfg, fixed, seed++));
    } else {
      GreedyPolicy greedy{Env{cfg}};
      benchmark::DoNotOptimize(run_episode(cfg, greedy, seed++));
    }
  }
}
BENCHMARK(BM_Episode5x5)->ArgName("greedy")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EnvStep5x5(benchmark::State& state) {
  const EpisodeConfig cfg = grid_episode(5, 5, 900.0);
  Env env(cfg);
  env.reset(3);
  Rng rng(3);
  for (auto _ : state) {
    if (env.done()) {
      state.PauseTiming();
      env.reset(rng.below(1000));
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(env.step(ActionId{static_cast<int>(rng.below(75))}));
  }
}
BENCHMARK(BM_EnvStep5x5)->Unit(benchmark::kMicrosecond);

void BM_LinearQAct(benchmark::State& state) {
  LinearQAgent agent(80, 25, 50, 30, 70, {}, 1);
  agent.set_training(false);
  Observation obs;
  obs.queues.assign(80, 12.0);
  obs.splits.assign(25, 50.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(agent.act(obs));
  }
}
BENCHMARK(BM_LinearQAct);

}  // namespace
BENCHMARK_MAIN();

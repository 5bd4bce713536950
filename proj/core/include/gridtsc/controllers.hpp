#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtsc/rl_env.hpp"
#include "gridtsc/rng.hpp"

namespace gridtsc {

struct Transition {
  const Observation& observation;
  ActionId action;
  double reward = 0.0;
  const Observation& next_observation;
  bool done = false;
};

/// Maps observations to action ids in [0, 3M).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionId act(const Observation& obs) = 0;
  /// Hook for learners; default ignores the transition.
  virtual void observe(const Transition&) {}
  /// Called at the start of every training/evaluation episode.
  virtual void begin_episode(std::size_t /*episode*/) {}
  virtual std::string name() const = 0;
};

/// Base case: never changes a split.
class FixedTimePolicy final : public Policy {
 public:
  ActionId act(const Observation&) override { return kNoOpAction; }
  std::string name() const override { return "fixed"; }
};

/// Uniform over all 3M actions with its own seeded stream.
class RandomPolicy final : public Policy {
 public:
  RandomPolicy(std::size_t intersections, std::uint64_t seed);
  ActionId act(const Observation& obs) override;
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  std::string name() const override { return "random"; }

 private:
  std::size_t intersections_;
  Rng rng_;
};

/// Topology needed by the greedy controller for each observed link.
struct ObservedLink {
  LinkId link;
  Direction heading = Direction::North;
  std::optional<std::size_t> upstream;  // empty for boundary entry links
  std::size_t downstream = 0;
};

std::vector<ObservedLink> describe_observed_links(const NetworkSpec& net,
                                                  std::span<const LinkId> observed);

/// Relieves the most congested observed link. Even invocations try the
/// upstream lever (shrink the green that feeds the link), odd ones the
/// downstream lever (grow the green that drains it); a lever whose split is
/// already at the bound it would push against falls back to the other one.
/// For a link travelling east-west the levers are upstream +step and
/// downstream -step; north-south links mirror that.
class GreedyPolicy final : public Policy {
 public:
  GreedyPolicy(std::vector<ObservedLink> links, const SignalConstants& constants, int q_lc);
  GreedyPolicy(const Env& env);

  ActionId act(const Observation& obs) override;
  void begin_episode(std::size_t) override { invocations_ = 0; }
  std::string name() const override { return "greedy"; }

 private:
  std::vector<ObservedLink> links_;
  SignalConstants constants_;
  int q_lc_;
  std::uint64_t invocations_ = 0;
};

struct LinearQParams {
  double alpha = 0.01;
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay = 0.97;  // multiplicative, per episode
  /// Rewards are multiplied by this before the TD update.
  double reward_scale = 1e-3;
};

/// Linear action-value learner over normalized features
/// [queues / q_ub, (splits - s_lb) / (s_ub - s_lb), 1].
class LinearQAgent final : public Policy {
 public:
  LinearQAgent(std::size_t links, std::size_t intersections, int q_ub, Seconds split_lower,
               Seconds split_upper, LinearQParams params, std::uint64_t seed);

  std::vector<double> features(const Observation& obs) const;
  double q_value(const std::vector<double>& phi, std::size_t action) const;
  std::size_t greedy_action(const Observation& obs) const;

  ActionId act(const Observation& obs) override;
  void observe(const Transition& t) override;
  void begin_episode(std::size_t episode) override;
  std::string name() const override { return "qlearn"; }

  void set_training(bool training) { training_ = training; }
  bool training() const noexcept { return training_; }
  double epsilon() const noexcept { return epsilon_; }
  void set_epsilon(double e);
  const LinearQParams& params() const noexcept { return params_; }
  LinearQParams& params() noexcept { return params_; }

  std::size_t action_count() const noexcept { return weights_.size(); }
  std::size_t feature_count() const noexcept { return feature_count_; }
  const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }
  std::vector<std::vector<double>>& weights() noexcept { return weights_; }

  void save(const std::filesystem::path& file) const;
  static LinearQAgent load(const std::filesystem::path& file);

 private:
  std::size_t links_;
  std::size_t intersections_;
  int q_ub_;
  Seconds split_lower_;
  Seconds split_upper_;
  LinearQParams params_;
  std::size_t feature_count_;
  std::vector<std::vector<double>> weights_;  // [action][feature]
  double epsilon_;
  bool training_ = true;
  Rng rng_;
};

inline constexpr std::string_view kWeightsSchema = "gridtsc.linear_q_weights/1";

/// One-step TD update on the taken action only; throws DivergenceError on
/// a non-finite target or weight.
void qlearn_step(LinearQAgent& agent, const Transition& t);

struct EpisodeOutcome {
  double episode_return = 0.0;
  std::size_t steps = 0;
  EpisodeMetrics metrics;
  std::vector<Seconds> final_splits;
  double mean_queue_sum = 0.0;  // see Env::mean_queue_sum
};

/// Runs one full episode with `policy`, feeding transitions to policy.observe.
EpisodeOutcome run_episode(const EpisodeConfig& cfg, Policy& policy, std::uint64_t seed);

struct TrainResult {
  std::vector<double> returns;  // one per episode
};

/// Seed of episode `index` derived from the master seed.
std::uint64_t episode_seed(std::uint64_t master, std::size_t index) noexcept;

/// Sequential episodes on fresh environments seeded from `seed`.
TrainResult train(const EpisodeConfig& cfg, Policy& policy, std::size_t episodes,
                  std::uint64_t seed);

}  // namespace gridtsc

#include "gridtsc/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "gridtsc/errors.hpp"

namespace gridtsc {

RandomPolicy::RandomPolicy(std::size_t intersections, std::uint64_t seed)
    : intersections_(intersections), rng_(seed) {
  if (intersections_ == 0) {
    throw ConfigError("random policy needs at least one intersection");
  }
}

ActionId RandomPolicy::act(const Observation&) {
  return ActionId{static_cast<int>(rng_.below(3 * intersections_))};
}

std::vector<ObservedLink> describe_observed_links(const NetworkSpec& net,
                                                  std::span<const LinkId> observed) {
  std::vector<ObservedLink> out;
  out.reserve(observed.size());
  for (LinkId id : observed) {
    const Link& l = net.link(id);
    if (!l.to) {
      throw ConfigError("observed link " + std::to_string(id.value) + " has no stop line");
    }
    ObservedLink o;
    o.link = id;
    o.heading = l.heading;
    if (l.from) {
      o.upstream = l.from->value;
    }
    o.downstream = l.to->value;
    out.push_back(o);
  }
  return out;
}

GreedyPolicy::GreedyPolicy(std::vector<ObservedLink> links, const SignalConstants& constants,
                           int q_lc)
    : links_(std::move(links)), constants_(constants), q_lc_(q_lc) {}

GreedyPolicy::GreedyPolicy(const Env& env)
    : GreedyPolicy(describe_observed_links(*env.config().scenario.network, env.observed_links()),
                   env.config().scenario.signal, env.config().reward.q_lc) {}

ActionId GreedyPolicy::act(const Observation& obs) {
  if (obs.queues.size() != links_.size()) {
    throw ContractError("greedy policy expected " + std::to_string(links_.size()) +
                        " queues, got " + std::to_string(obs.queues.size()));
  }
  if (links_.empty()) {
    return kNoOpAction;
  }
  const auto worst = static_cast<std::size_t>(
      std::max_element(obs.queues.begin(), obs.queues.end()) - obs.queues.begin());
  if (obs.queues[worst] <= q_lc_) {
    return kNoOpAction;
  }
  const ObservedLink& link = links_[worst];
  const bool east_west = !is_north_south(link.heading);

  struct Lever {
    std::optional<std::size_t> node;
    int delta_index;  // 0: -step, 2: +step
  };
  const Lever upstream{link.upstream, east_west ? 2 : 0};
  const Lever downstream{link.downstream, east_west ? 0 : 2};

  auto usable = [&](const Lever& lever) {
    if (!lever.node) {
      return false;
    }
    const double split = obs.splits.at(*lever.node);
    return lever.delta_index == 2 ? split < static_cast<double>(constants_.split_upper)
                                  : split > static_cast<double>(constants_.split_lower);
  };

  const bool upstream_first = invocations_++ % 2 == 0;
  const Lever& preferred = upstream_first ? upstream : downstream;
  const Lever& fallback = upstream_first ? downstream : upstream;
  if (usable(preferred)) {
    return encode_action(*preferred.node, preferred.delta_index);
  }
  if (usable(fallback)) {
    return encode_action(*fallback.node, fallback.delta_index);
  }
  return kNoOpAction;
}

LinearQAgent::LinearQAgent(std::size_t links, std::size_t intersections, int q_ub,
                           Seconds split_lower, Seconds split_upper, LinearQParams params,
                           std::uint64_t seed)
    : links_(links),
      intersections_(intersections),
      q_ub_(q_ub),
      split_lower_(split_lower),
      split_upper_(split_upper),
      params_(params),
      feature_count_(links + intersections + 1),
      weights_(3 * intersections, std::vector<double>(links + intersections + 1, 0.0)),
      epsilon_(params.epsilon_start),
      rng_(seed) {
  if (intersections == 0 || q_ub <= 0 || split_upper <= split_lower) {
    throw ConfigError("linear Q agent needs intersections, q_ub > 0 and split_upper > split_lower");
  }
  if (!(params.epsilon_start >= 0.0 && params.epsilon_start <= 1.0) ||
      !(params.epsilon_end >= 0.0 && params.epsilon_end <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
}

void LinearQAgent::set_epsilon(double e) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw ConfigError("epsilon must lie in [0, 1]");
  }
  epsilon_ = e;
}

std::vector<double> LinearQAgent::features(const Observation& obs) const {
  if (obs.queues.size() != links_ || obs.splits.size() != intersections_) {
    throw ContractError("observation shape does not match the agent");
  }
  std::vector<double> phi;
  phi.reserve(feature_count_);
  for (double q : obs.queues) {
    phi.push_back(q / q_ub_);
  }
  const double range = static_cast<double>(split_upper_ - split_lower_);
  for (double s : obs.splits) {
    phi.push_back((s - static_cast<double>(split_lower_)) / range);
  }
  phi.push_back(1.0);
  return phi;
}

double LinearQAgent::q_value(const std::vector<double>& phi, std::size_t action) const {
  const auto& w = weights_.at(action);
  double v = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    v += w[i] * phi[i];
  }
  return v;
}

std::size_t LinearQAgent::greedy_action(const Observation& obs) const {
  const auto phi = features(obs);
  std::size_t best = 0;
  double best_value = q_value(phi, 0);
  for (std::size_t a = 1; a < weights_.size(); ++a) {
    const double v = q_value(phi, a);
    if (v > best_value) {
      best = a;
      best_value = v;
    }
  }
  return best;
}

ActionId LinearQAgent::act(const Observation& obs) {
  if (training_ && rng_.uniform() < epsilon_) {
    return ActionId{static_cast<int>(rng_.below(weights_.size()))};
  }
  return ActionId{static_cast<int>(greedy_action(obs))};
}

void LinearQAgent::observe(const Transition& t) {
  if (training_) {
    qlearn_step(*this, t);
  }
}

void LinearQAgent::begin_episode(std::size_t episode) {
  if (!training_) {
    return;
  }
  epsilon_ = std::max(params_.epsilon_end,
                      params_.epsilon_start * std::pow(params_.epsilon_decay,
                                                       static_cast<double>(episode)));
}

void qlearn_step(LinearQAgent& agent, const Transition& t) {
  const auto action = static_cast<std::size_t>(t.action.value);
  if (action >= agent.action_count()) {
    throw InvalidActionError("transition action outside the agent's action space");
  }
  const auto& p = agent.params();
  const auto phi = agent.features(t.observation);
  double bootstrap = 0.0;
  if (!t.done) {
    const auto next_phi = agent.features(t.next_observation);
    bootstrap = agent.q_value(next_phi, 0);
    for (std::size_t a = 1; a < agent.action_count(); ++a) {
      bootstrap = std::max(bootstrap, agent.q_value(next_phi, a));
    }
  }
  const double target = t.reward * p.reward_scale + p.gamma * bootstrap;
  if (!std::isfinite(target)) {
    throw DivergenceError("non-finite TD target (reward " + std::to_string(t.reward) + ")");
  }
  const double td = target - agent.q_value(phi, action);
  auto& w = agent.weights()[action];
  for (std::size_t i = 0; i < phi.size(); ++i) {
    w[i] += p.alpha * td * phi[i];
    if (!std::isfinite(w[i])) {
      throw DivergenceError("weight " + std::to_string(i) + " of action " +
                            std::to_string(action) + " diverged");
    }
  }
}

void LinearQAgent::save(const std::filesystem::path& file) const {
  nlohmann::json j;
  j["schema"] = kWeightsSchema;
  j["links"] = links_;
  j["intersections"] = intersections_;
  j["q_ub"] = q_ub_;
  j["split_lower"] = split_lower_;
  j["split_upper"] = split_upper_;
  j["alpha"] = params_.alpha;
  j["gamma"] = params_.gamma;
  j["epsilon_start"] = params_.epsilon_start;
  j["epsilon_end"] = params_.epsilon_end;
  j["epsilon_decay"] = params_.epsilon_decay;
  j["reward_scale"] = params_.reward_scale;
  j["weights"] = weights_;
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + file.string() + " for writing");
  }
  out << j.dump(1) << '\n';
  if (!out) {
    throw IoError("write failed for " + file.string());
  }
}

LinearQAgent LinearQAgent::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw IoError("cannot open weights file " + file.string());
  }
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("schema").get<std::string>() != kWeightsSchema) {
      throw IoError(file.string() + ": unsupported weights schema");
    }
    LinearQParams p;
    p.alpha = j.at("alpha").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.epsilon_start = j.at("epsilon_start").get<double>();
    p.epsilon_end = j.at("epsilon_end").get<double>();
    p.epsilon_decay = j.at("epsilon_decay").get<double>();
    p.reward_scale = j.at("reward_scale").get<double>();
    LinearQAgent agent(j.at("links").get<std::size_t>(), j.at("intersections").get<std::size_t>(),
                       j.at("q_ub").get<int>(), j.at("split_lower").get<Seconds>(),
                       j.at("split_upper").get<Seconds>(), p, 0);
    auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    if (w.size() != agent.action_count() ||
        std::any_of(w.begin(), w.end(),
                    [&](const auto& row) { return row.size() != agent.feature_count(); })) {
      throw IoError(file.string() + ": weight matrix shape does not match its header");
    }
    agent.weights() = std::move(w);
    agent.set_training(false);
    agent.set_epsilon(0.0);
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

EpisodeOutcome run_episode(const EpisodeConfig& cfg, Policy& policy, std::uint64_t seed) {
  Env env(cfg);
  Observation obs = env.reset(seed);
  while (!env.done()) {
    const ActionId a = policy.act(obs);
    StepResult r = env.step(a);
    policy.observe({obs, a, r.reward, r.observation, r.done});
    obs = std::move(r.observation);
  }
  EpisodeOutcome out;
  out.episode_return = env.episode_return();
  out.steps = env.steps_taken();
  out.metrics = env.metrics();
  out.mean_queue_sum = env.mean_queue_sum();
  for (const auto& p : env.sim().plans()) {
    out.final_splits.push_back(p.split());
  }
  return out;
}

std::uint64_t episode_seed(std::uint64_t master, std::size_t index) noexcept {
  return derive_seed(master, index);
}

TrainResult train(const EpisodeConfig& cfg, Policy& policy, std::size_t episodes,
                  std::uint64_t seed) {
  if (episodes < 1) {
    throw ConfigError("training needs at least one episode");
  }
  TrainResult result;
  result.returns.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    policy.begin_episode(i);
    result.returns.push_back(run_episode(cfg, policy, episode_seed(seed, i)).episode_return);
  }
  return result;
}

}  // namespace gridtsc

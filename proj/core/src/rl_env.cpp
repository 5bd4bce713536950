#include "gridtsc/rl_env.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "gridtsc/errors.hpp"

namespace gridtsc {

std::string_view to_string(RewardVariant v) noexcept {
  return v == RewardVariant::Congestion ? "congestion" : "travel-time";
}

std::optional<RewardVariant> parse_reward_variant(std::string_view text) noexcept {
  if (text == "congestion") {
    return RewardVariant::Congestion;
  }
  if (text == "travel-time" || text == "travel_time") {
    return RewardVariant::TravelTime;
  }
  return std::nullopt;
}

void RewardConfig::validate() const {
  if (!(0 < q_lc && q_lc < q_hc && q_hc <= q_ub)) {
    throw ConfigError("reward thresholds need 0 < q_lc < q_hc <= q_ub");
  }
  if (!(w_cp >= 1.0) || !std::isfinite(w_cp)) {
    throw ConfigError("w_cp must be >= 1");
  }
  if (!(f_sat > 0.0) || !std::isfinite(f_sat)) {
    throw ConfigError("f_sat must be positive");
  }
}

CongestionLevel classify_queue(double queue, const RewardConfig& cfg) noexcept {
  if (queue <= cfg.q_lc) {
    return CongestionLevel::Free;
  }
  if (queue < cfg.q_hc) {
    return CongestionLevel::Light;
  }
  return CongestionLevel::Heavy;
}

double congestion_link_reward(double queue, const RewardConfig& cfg) noexcept {
  switch (classify_queue(queue, cfg)) {
    case CongestionLevel::Free:
      return 0.0;
    case CongestionLevel::Light:
      return -queue;
    case CongestionLevel::Heavy:
      return -(cfg.w_cp * queue);
  }
  return 0.0;
}

double reward_congestion(std::span<const double> queues, const RewardConfig& cfg) {
  double total = 0.0;
  for (double q : queues) {
    total += congestion_link_reward(q, cfg);
  }
  return total;
}

double travel_time_link_reward(const TravelTimeTerm& term, const RewardConfig& cfg) {
  switch (classify_queue(term.queue, cfg)) {
    case CongestionLevel::Free:
      return 0.0;
    case CongestionLevel::Light:
      if (!(term.t_eg_u > 0.0) || !(term.t_eg_d > 0.0)) {
        throw ConfigError("effective green must be positive in the travel-time reward");
      }
      return -(term.t_avg * cfg.f_sat * term.t_eg_u / term.t_eg_d);
    case CongestionLevel::Heavy:
      // Heavy congestion uses the saturation flow without green correction.
      return -(cfg.w_cp * term.t_avg * cfg.f_sat);
  }
  return 0.0;
}

double reward_travel_time(std::span<const TravelTimeTerm> terms, const RewardConfig& cfg) {
  double total = 0.0;
  for (const auto& t : terms) {
    total += travel_time_link_reward(t, cfg);
  }
  return total;
}

std::vector<LinkId> Scenario::observed_links() const {
  if (!network) {
    throw ConfigError("scenario has no network");
  }
  std::vector<LinkId> out = internal_links(*network);
  if (observe_entry_links) {
    const auto entries = network->entry_links();
    out.insert(out.end(), entries.begin(), entries.end());
  }
  return out;
}

void EpisodeConfig::validate() const {
  if (!scenario.network) {
    throw ConfigError("episode has no network");
  }
  if (duration <= 0 || warmup < 0 || control_interval <= 0) {
    throw ConfigError("duration and control_interval must be positive, warmup non-negative");
  }
  if (!(warmup < duration)) {
    throw ConfigError("warmup must be shorter than the episode duration");
  }
  if ((duration - warmup) % control_interval != 0) {
    throw ConfigError("(duration - warmup) must be a multiple of control_interval");
  }
  reward.validate();
  scenario.signal.validate();
  scenario.flow.validate();
  scenario.demand.validate(*scenario.network);
  if (initial_splits) {
    if (initial_splits->size() != scenario.network->intersection_count()) {
      throw ConfigError("initial_splits needs one value per intersection");
    }
    for (Seconds s : *initial_splits) {
      if (s < scenario.signal.split_lower || s > scenario.signal.split_upper) {
        throw ConfigError("initial split " + std::to_string(s) + " outside the split bounds");
      }
    }
  }
}

std::size_t EpisodeConfig::control_steps() const noexcept {
  return static_cast<std::size_t>((duration - warmup) / control_interval);
}

std::size_t EpisodeConfig::recorded_cycles() const noexcept {
  const Seconds c = scenario.signal.cycle;
  if (c <= 0) {
    return 0;
  }
  // Global cycle boundaries strictly after the warm-up, up to and including the end.
  return static_cast<std::size_t>(duration / c - warmup / c);
}

std::vector<double> Observation::flat() const {
  std::vector<double> out;
  out.reserve(size());
  out.insert(out.end(), queues.begin(), queues.end());
  out.insert(out.end(), splits.begin(), splits.end());
  return out;
}

DecodedAction decode_action(int id, std::size_t intersections, Seconds step) {
  if (id < 0 || static_cast<std::size_t>(id) >= 3 * intersections) {
    throw InvalidActionError("action id " + std::to_string(id) + " outside [0, " +
                             std::to_string(3 * intersections) + ")");
  }
  return {static_cast<std::size_t>(id / 3), static_cast<Seconds>(id % 3 - 1) * step};
}

ActionId encode_action(std::size_t intersection, int delta_index) {
  if (delta_index < 0 || delta_index > 2) {
    throw InvalidActionError("delta index must be 0, 1 or 2");
  }
  return ActionId{static_cast<int>(3 * intersection) + delta_index};
}

nlohmann::json to_json(const StepInfo& info) {
  nlohmann::json j;
  j["schema"] = kInfoSchema;
  j["sim_time"] = info.sim_time;
  j["reward_variant"] = to_string(info.variant);
  j["queues"] = info.queues;
  j["splits"] = info.splits;
  j["pending_splits"] = info.pending_splits;
  j["t_avg"] = info.t_avg;
  j["t_eg_u"] = info.t_eg_u;
  j["t_eg_d"] = info.t_eg_d;
  j["link_rewards"] = info.link_rewards;
  j["injected"] = info.interval.injected;
  j["dropped"] = info.interval.dropped;
  j["discharged"] = info.interval.discharged;
  j["exited"] = info.interval.exited;
  return j;
}

Env::Env(EpisodeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  observed_ = cfg_.scenario.observed_links();
}

Observation Env::reset() { return reset(cfg_.seed); }

Observation Env::reset(std::uint64_t seed) {
  const auto& sc = cfg_.scenario;
  std::vector<Seconds> splits = cfg_.initial_splits.value_or(
      std::vector<Seconds>(sc.network->intersection_count(), sc.signal.default_split));
  sim_ = std::make_unique<SimState>(sc.network, sc.demand, sc.flow, sc.signal, std::move(splits),
                                    seed);
  recorder_ = QueueRecorder(observed_.size(), cfg_.recorded_cycles());
  cycle_max_.assign(observed_.size(), 0);
  return_ = 0.0;
  steps_ = 0;
  done_ = false;
  queue_integral_ = 0;
  queue_ticks_ = 0;
  for (Seconds t = 0; t < cfg_.warmup; ++t) {
    tick();
  }
  return observation();
}

const SimState& Env::sim() const {
  if (!sim_) {
    throw ContractError("environment has not been reset");
  }
  return *sim_;
}

TickSummary Env::tick() {
  const TickSummary summary = sim_->advance(1);
  const Seconds now = sim_->clock();
  if (now <= cfg_.warmup) {
    return summary;
  }
  const int q_ub = cfg_.reward.q_ub;
  for (LinkId l : observed_) {
    queue_integral_ += sim_->queue_length(l, Movement::Straight);
  }
  ++queue_ticks_;
  if (cfg_.sampling == QueueSampling::CycleMax) {
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      cycle_max_[i] = std::max(cycle_max_[i], sim_->measure_queue(observed_[i], q_ub));
    }
  }
  if (now % cfg_.scenario.signal.cycle != 0) {
    return summary;
  }
  if (cfg_.sampling == QueueSampling::CycleMax) {
    recorder_.record_cycle(cycle_max_);
    std::fill(cycle_max_.begin(), cycle_max_.end(), 0);
  } else {
    std::vector<int> column(observed_.size());
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      column[i] = sim_->measure_queue(observed_[i], q_ub);
    }
    recorder_.record_cycle(column);
  }
  return summary;
}

StepResult Env::step(ActionId action) {
  if (!sim_) {
    throw ContractError("step called before reset");
  }
  if (done_) {
    throw EpisodeFinishedError("episode finished at t=" + std::to_string(sim_->clock()));
  }
  const auto& signal = cfg_.scenario.signal;
  const DecodedAction decoded =
      decode_action(action.value, sim_->network().intersection_count(), signal.split_step);
  sim_->request_split_delta(NodeId{static_cast<std::uint32_t>(decoded.intersection)},
                            decoded.delta);

  TickSummary interval;
  for (Seconds t = 0; t < cfg_.control_interval; ++t) {
    interval += tick();
  }

  StepResult r;
  r.observation = observation();
  r.info = info();
  r.info.interval = interval;
  for (double v : r.info.link_rewards) {
    r.reward += v;
  }
  return_ += r.reward;
  ++steps_;
  done_ = sim_->clock() >= cfg_.duration;
  r.done = done_;
  return r;
}

Observation Env::observation() const {
  const SimState& s = sim();
  Observation o;
  o.sim_time = s.clock();
  o.queues.reserve(observed_.size());
  for (LinkId l : observed_) {
    o.queues.push_back(static_cast<double>(s.measure_queue(l, cfg_.reward.q_ub)));
  }
  o.splits.reserve(s.plans().size());
  for (const auto& p : s.plans()) {
    o.splits.push_back(static_cast<double>(p.split()));
  }
  return o;
}

StepInfo Env::info() const {
  const SimState& s = sim();
  const NetworkSpec& net = s.network();
  const auto& signal = cfg_.scenario.signal;
  const PhaseTable defaults = derive_phase_table(signal.default_split, signal);

  StepInfo info;
  info.sim_time = s.clock();
  info.variant = cfg_.reward.variant;
  for (const auto& p : s.plans()) {
    info.splits.push_back(static_cast<double>(p.split()));
    info.pending_splits.push_back(static_cast<double>(p.pending_split().value_or(p.split())));
  }
  for (LinkId id : observed_) {
    const Link& l = net.link(id);
    const MovementGroup group = through_group(l.heading);
    const double queue = static_cast<double>(s.measure_queue(id, cfg_.reward.q_ub));
    const double t_eg_d = static_cast<double>(effective_green(defaults, group));
    // Entry links have no upstream signal; their ratio is held at 1.
    const double t_eg_u =
        l.from ? static_cast<double>(effective_green(s.plan(*l.from), group)) : t_eg_d;
    const double t_avg = s.link_stats(id).t_avg;
    info.queues.push_back(queue);
    info.t_avg.push_back(t_avg);
    info.t_eg_u.push_back(t_eg_u);
    info.t_eg_d.push_back(t_eg_d);
    if (cfg_.reward.variant == RewardVariant::Congestion) {
      info.link_rewards.push_back(congestion_link_reward(queue, cfg_.reward));
    } else {
      info.link_rewards.push_back(
          travel_time_link_reward({queue, t_avg, t_eg_u, t_eg_d}, cfg_.reward));
    }
  }
  return info;
}

EnvSpec Env::spec() const {
  EnvSpec s;
  s.links = observed_.size();
  s.intersections = cfg_.scenario.network->intersection_count();
  s.action_count = 3 * s.intersections;
  s.control_interval = cfg_.control_interval;
  s.q_ub = cfg_.reward.q_ub;
  s.split_lower = cfg_.scenario.signal.split_lower;
  s.split_upper = cfg_.scenario.signal.split_upper;
  s.variant = cfg_.reward.variant;
  return s;
}

double Env::mean_queue_sum() const noexcept {
  return queue_ticks_ == 0 ? 0.0
                           : static_cast<double>(queue_integral_) / static_cast<double>(queue_ticks_);
}

EpisodeMetrics Env::metrics() const {
  const SimState& s = sim();
  SummaryOptions opts;
  opts.measure_from = cfg_.warmup;
  opts.q_ub = cfg_.reward.q_ub;
  opts.heavy_threshold = cfg_.reward.q_hc;
  opts.dropped_arrivals = s.counters().dropped;
  opts.vehicles_on_network = s.counters().on_network;
  opts.control_steps = static_cast<std::int64_t>(steps_);
  return summarize(s.completed_trips(), recorder_, return_, opts);
}

}  // namespace gridtsc

#include "gridtsc_cli/scenario_config.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <fstream>
#include <limits>
#include <initializer_list>
#include <set>
#include <sstream>

#include "gridtsc/errors.hpp"

namespace gridtsc::cli {

namespace {

struct Ctx {
  const std::string& source;

  [[noreturn]] void fail(const YAML::Node& node, std::string_view field, std::string_view what) const {
    std::ostringstream os;
    os << source;
    const YAML::Mark m = node.Mark();
    if (m.line >= 0) {
      os << ':' << m.line + 1;
    }
    os << ": " << field << ": " << what;
    throw ConfigError(os.str());
  }

  void keys(const YAML::Node& map, std::string_view section,
            std::initializer_list<std::string_view> allowed) const {
    if (!map.IsMap()) {
      fail(map, section, "expected a mapping");
    }
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      for (auto a : allowed) {
        known = known || a == key;
      }
      if (!known) {
        fail(kv.first, std::string(section) + "." + key, "unknown key");
      }
    }
  }

  template <typename T>
  void get(const YAML::Node& map, std::string_view section, const char* key, T& out) const {
    const YAML::Node v = map[key];
    if (!v) {
      return;
    }
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, std::string(section) + "." + key, "expected " + type_name<T>());
    }
  }

  template <typename T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) {
      return "true or false";
    } else if constexpr (std::is_integral_v<T>) {
      return "an integer";
    } else if constexpr (std::is_floating_point_v<T>) {
      return "a number";
    } else {
      return "a string";
    }
  }

  Direction direction(const YAML::Node& v, const std::string& field) const {
    if (!v.IsScalar()) {
      fail(v, field, "expected north, east, south or west");
    }
    const auto d = parse_direction(v.as<std::string>());
    if (!d) {
      fail(v, field, "expected north, east, south or west");
    }
    return *d;
  }
};

template <typename Fn>
void rethrow_as(const Ctx& ctx, const YAML::Node& node, std::string_view field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    ctx.fail(node, field, e.what());
  } catch (const BoundsError& e) {
    ctx.fail(node, field, e.what());
  }
}

NodeId resolve_node(const Ctx& ctx, const NetworkSpec& net, const YAML::Node& v,
                    const std::string& field) {
  if (v.IsSequence() && v.size() == 2) {
    int r = 0;
    int c = 0;
    try {
      r = v[0].as<int>();
      c = v[1].as<int>();
    } catch (const YAML::Exception&) {
      ctx.fail(v, field, "expected [row, col]");
    }
    if (r < 0 || c < 0 || r >= net.rows || c >= net.cols) {
      ctx.fail(v, field, "position outside the grid");
    }
    return net.node_at(GridPosition{r, c});
  }
  int id = -1;
  try {
    id = v.as<int>();
  } catch (const YAML::Exception&) {
    ctx.fail(v, field, "expected a node id or [row, col]");
  }
  if (id < 0 || static_cast<std::size_t>(id) >= net.intersection_count()) {
    ctx.fail(v, field, "node id out of range");
  }
  return NodeId{static_cast<std::uint32_t>(id)};
}

TurnProbabilities turns(const Ctx& ctx, const YAML::Node& v, const std::string& field,
                        TurnProbabilities base) {
  ctx.keys(v, field, {"left", "straight", "right", "node", "side"});
  ctx.get(v, field, "left", base.left);
  ctx.get(v, field, "straight", base.straight);
  ctx.get(v, field, "right", base.right);
  return base;
}

struct Period {
  Seconds start = 0;
  Seconds end = std::numeric_limits<Seconds>::max();
  double scale = 1.0;
};

}  // namespace

ScenarioConfig parse_scenario(std::string_view text, std::string source) {
  ScenarioConfig out;
  out.source = source;
  const Ctx ctx{out.source};
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << out.source << ':' << e.mark.line + 1 << ": <syntax>: " << e.msg;
    throw ConfigError(os.str());
  }
  if (root.IsNull()) {
    root = YAML::Node(YAML::NodeType::Map);
  }
  ctx.keys(root, "<root>", {"network", "signal", "flow", "demand", "episode", "reward", "learner", "seed"});

  EpisodeConfig& ep = out.episode;

  int rows = 5;
  int cols = 5;
  Geometry geometry;
  if (const auto n = root["network"]) {
    ctx.keys(n, "network",
             {"rows", "cols", "link_length", "free_flow_speed", "lanes_mid", "lanes_approach",
              "jam_spacing"});
    ctx.get(n, "network", "rows", rows);
    ctx.get(n, "network", "cols", cols);
    ctx.get(n, "network", "link_length", geometry.link_length);
    ctx.get(n, "network", "free_flow_speed", geometry.free_flow_speed);
    ctx.get(n, "network", "lanes_mid", geometry.lanes_mid);
    ctx.get(n, "network", "lanes_approach", geometry.lanes_approach);
    ctx.get(n, "network", "jam_spacing", geometry.jam_spacing);
  }
  std::shared_ptr<const NetworkSpec> net;
  rethrow_as(ctx, root["network"] ? root["network"] : root, "network",
             [&] { net = std::make_shared<const NetworkSpec>(build_grid(rows, cols, geometry)); });
  ep.scenario.network = net;

  SignalConstants& sig = ep.scenario.signal;
  if (const auto s = root["signal"]) {
    ctx.keys(s, "signal",
             {"cycle", "left_phase", "yellow", "all_red", "offset", "split_lower", "split_upper",
              "split_step", "default_split"});
    ctx.get(s, "signal", "cycle", sig.cycle);
    ctx.get(s, "signal", "left_phase", sig.left_phase);
    ctx.get(s, "signal", "yellow", sig.yellow);
    ctx.get(s, "signal", "all_red", sig.all_red);
    ctx.get(s, "signal", "offset", sig.offset);
    ctx.get(s, "signal", "split_lower", sig.split_lower);
    ctx.get(s, "signal", "split_upper", sig.split_upper);
    ctx.get(s, "signal", "split_step", sig.split_step);
    ctx.get(s, "signal", "default_split", sig.default_split);
    rethrow_as(ctx, s, "signal", [&] { sig.validate(); });
  }

  FlowParams& flow = ep.scenario.flow;
  if (const auto f = root["flow"]) {
    ctx.keys(f, "flow", {"saturation_headway", "startup_lost_time"});
    ctx.get(f, "flow", "saturation_headway", flow.saturation_headway);
    ctx.get(f, "flow", "startup_lost_time", flow.startup_lost_time);
    rethrow_as(ctx, f, "flow", [&] { flow.validate(); });
  }

  DemandProfile& demand = ep.scenario.demand;
  if (const auto d = root["demand"]) {
    ctx.keys(d, "demand",
             {"ramp_up", "turns", "default_rate", "by_heading", "entries", "periods",
              "turn_overrides"});
    ctx.get(d, "demand", "ramp_up", demand.ramp_up);
    if (const auto t = d["turns"]) {
      demand.default_turns = turns(ctx, t, "demand.turns", demand.default_turns);
    }

    // Base rate per entry link: default_rate, then by_heading, then explicit entries.
    double default_rate = 0.0;
    ctx.get(d, "demand", "default_rate", default_rate);
    std::array<std::optional<double>, 4> heading_rate{};
    if (const auto h = d["by_heading"]) {
      ctx.keys(h, "demand.by_heading", {"north", "east", "south", "west"});
      constexpr std::array<const char*, 4> names{"north", "east", "south", "west"};
      for (Direction dir : kDirections) {
        const std::string key = names[index_of(dir)];
        double r = 0.0;
        if (h[key]) {
          ctx.get(h, "demand.by_heading", key.c_str(), r);
          heading_rate[index_of(dir)] = r;
        }
      }
    }
    std::vector<std::pair<LinkId, double>> base;
    for (LinkId l : net->entry_links()) {
      const auto& hr = heading_rate[index_of(net->link(l).heading)];
      base.emplace_back(l, hr.value_or(default_rate));
    }

    std::vector<Period> periods;
    if (const auto p = d["periods"]) {
      if (!p.IsSequence()) {
        ctx.fail(p, "demand.periods", "expected a list");
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        const std::string field = "demand.periods[" + std::to_string(i) + "]";
        ctx.keys(p[i], field, {"start", "end", "scale"});
        Period per;
        ctx.get(p[i], field, "start", per.start);
        ctx.get(p[i], field, "end", per.end);
        ctx.get(p[i], field, "scale", per.scale);
        if (per.end <= per.start || per.scale < 0.0) {
          ctx.fail(p[i], field, "needs start < end and scale >= 0");
        }
        periods.push_back(per);
      }
    } else {
      periods.push_back(Period{});
    }
    for (const auto& [link, rate] : base) {
      for (const Period& per : periods) {
        if (rate * per.scale > 0.0) {
          demand.entries.push_back({link, rate * per.scale, per.start, per.end});
        }
      }
    }

    if (const auto e = d["entries"]) {
      if (!e.IsSequence()) {
        ctx.fail(e, "demand.entries", "expected a list");
      }
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string field = "demand.entries[" + std::to_string(i) + "]";
        ctx.keys(e[i], field, {"node", "side", "rate", "start", "end"});
        if (!e[i]["node"] || !e[i]["side"] || !e[i]["rate"]) {
          ctx.fail(e[i], field, "node, side and rate are required");
        }
        const NodeId node = resolve_node(ctx, *net, e[i]["node"], field + ".node");
        const Direction side = ctx.direction(e[i]["side"], field + ".side");
        const auto link = net->entry_link(node, side);
        if (!link) {
          ctx.fail(e[i]["side"], field + ".side", "no boundary entry on that side of the node");
        }
        DemandEntry entry{*link, 0.0};
        ctx.get(e[i], field, "rate", entry.rate_vph);
        ctx.get(e[i], field, "start", entry.start);
        ctx.get(e[i], field, "end", entry.end);
        demand.entries.push_back(entry);
      }
    }

    if (const auto o = d["turn_overrides"]) {
      if (!o.IsSequence()) {
        ctx.fail(o, "demand.turn_overrides", "expected a list");
      }
      for (std::size_t i = 0; i < o.size(); ++i) {
        const std::string field = "demand.turn_overrides[" + std::to_string(i) + "]";
        if (!o[i].IsMap() || !o[i]["node"] || !o[i]["side"]) {
          ctx.fail(o[i], field, "node and side are required");
        }
        TurnOverride t;
        t.node = resolve_node(ctx, *net, o[i]["node"], field + ".node");
        t.side = ctx.direction(o[i]["side"], field + ".side");
        t.turns = turns(ctx, o[i], field, demand.default_turns);
        demand.turn_overrides.push_back(t);
      }
    }
    rethrow_as(ctx, d, "demand", [&] { demand.validate(*net); });
  }

  if (const auto e = root["episode"]) {
    ctx.keys(e, "episode",
             {"duration", "warmup", "control_interval", "sampling", "observe_entry_links",
              "initial_splits"});
    ctx.get(e, "episode", "duration", ep.duration);
    ctx.get(e, "episode", "warmup", ep.warmup);
    ctx.get(e, "episode", "control_interval", ep.control_interval);
    ctx.get(e, "episode", "observe_entry_links", ep.scenario.observe_entry_links);
    if (const auto s = e["sampling"]) {
      std::string v;
      ctx.get(e, "episode", "sampling", v);
      if (v == "cycle-boundary") {
        ep.sampling = QueueSampling::CycleBoundary;
      } else if (v == "cycle-max") {
        ep.sampling = QueueSampling::CycleMax;
      } else {
        ctx.fail(s, "episode.sampling", "expected cycle-boundary or cycle-max");
      }
    }
    if (const auto s = e["initial_splits"]) {
      std::vector<Seconds> splits;
      ctx.get(e, "episode", "initial_splits", splits);
      ep.initial_splits = std::move(splits);
    }
  }

  if (const auto r = root["reward"]) {
    ctx.keys(r, "reward", {"variant", "q_ub", "q_lc", "q_hc", "w_cp", "f_sat"});
    if (const auto v = r["variant"]) {
      std::string name;
      ctx.get(r, "reward", "variant", name);
      const auto parsed = parse_reward_variant(name);
      if (!parsed) {
        ctx.fail(v, "reward.variant", "expected congestion or travel-time");
      }
      ep.reward.variant = *parsed;
    }
    ctx.get(r, "reward", "q_ub", ep.reward.q_ub);
    ctx.get(r, "reward", "q_lc", ep.reward.q_lc);
    ctx.get(r, "reward", "q_hc", ep.reward.q_hc);
    ctx.get(r, "reward", "w_cp", ep.reward.w_cp);
    ctx.get(r, "reward", "f_sat", ep.reward.f_sat);
    rethrow_as(ctx, r, "reward", [&] { ep.reward.validate(); });
  }

  if (const auto l = root["learner"]) {
    ctx.keys(l, "learner",
             {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay", "reward_scale"});
    ctx.get(l, "learner", "alpha", out.learner.alpha);
    ctx.get(l, "learner", "gamma", out.learner.gamma);
    ctx.get(l, "learner", "epsilon_start", out.learner.epsilon_start);
    ctx.get(l, "learner", "epsilon_end", out.learner.epsilon_end);
    ctx.get(l, "learner", "epsilon_decay", out.learner.epsilon_decay);
    ctx.get(l, "learner", "reward_scale", out.learner.reward_scale);
  }

  if (root["seed"]) {
    ctx.get(root, "<root>", "seed", ep.seed);
  }

  rethrow_as(ctx, root["episode"] ? root["episode"] : root, "episode", [&] { ep.validate(); });
  return out;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw ConfigError(file.string() + ": cannot open scenario file");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), file.string());
}

}  // namespace gridtsc::cli

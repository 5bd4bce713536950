#include "gridtsc/net_model.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "gridtsc/errors.hpp"

namespace gridtsc {

namespace {

// Row/column displacement of one step in a heading; row 0 is the northern edge.
constexpr std::array<int, 4> kRowStep = {-1, 0, 1, 0};
constexpr std::array<int, 4> kColStep = {0, 1, 0, -1};

std::string describe(const Link& link) {
  std::ostringstream out;
  out << "link " << link.id.value << " (" << to_string(link.heading) << ")";
  return out.str();
}

std::string describe(const Intersection& node) {
  std::ostringstream out;
  out << "intersection " << node.id.value << " (" << node.position.row << ","
      << node.position.col << ")";
  return out.str();
}

}  // namespace

std::string_view to_string(Direction d) noexcept {
  switch (d) {
    case Direction::North:
      return "N";
    case Direction::East:
      return "E";
    case Direction::South:
      return "S";
    case Direction::West:
      return "W";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view text) noexcept {
  if (text == "N" || text == "north") return Direction::North;
  if (text == "E" || text == "east") return Direction::East;
  if (text == "S" || text == "south") return Direction::South;
  if (text == "W" || text == "west") return Direction::West;
  return std::nullopt;
}

std::size_t NetworkSpec::internal_link_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : links) {
    n += l.is_internal() ? 1 : 0;
  }
  return n;
}

const Link& NetworkSpec::link(LinkId id) const {
  if (id.value >= links.size()) {
    throw LookupError("unknown link id " + std::to_string(id.value));
  }
  return links[id.value];
}

const Intersection& NetworkSpec::intersection(NodeId id) const {
  if (id.value >= intersections.size()) {
    throw LookupError("unknown intersection id " + std::to_string(id.value));
  }
  return intersections[id.value];
}

NodeId NetworkSpec::node_at(GridPosition pos) const {
  if (pos.row < 0 || pos.row >= rows || pos.col < 0 || pos.col >= cols) {
    throw LookupError("grid position (" + std::to_string(pos.row) + "," +
                      std::to_string(pos.col) + ") is outside the network");
  }
  return NodeId{static_cast<std::uint32_t>(pos.row * cols + pos.col)};
}

std::vector<LinkId> NetworkSpec::entry_links() const {
  std::vector<LinkId> out;
  for (const auto& l : links) {
    if (l.kind == LinkKind::Entry) {
      out.push_back(l.id);
    }
  }
  return out;
}

std::optional<LinkId> NetworkSpec::entry_link(NodeId node, Direction side) const {
  const LinkId id = intersection(node).incoming[index_of(side)];
  if (link(id).kind == LinkKind::Entry) {
    return id;
  }
  return std::nullopt;
}

LinkId NetworkSpec::downstream_of(LinkId approach, Direction departure_heading) const {
  const Link& l = link(approach);
  if (!l.to) {
    throw LookupError(describe(l) + " ends at a boundary sink");
  }
  return intersection(*l.to).outgoing[index_of(departure_heading)];
}

Seconds free_flow_time_for(double length, double speed) {
  // The small slack keeps exact quotients such as 300/15 from rounding up.
  return static_cast<Seconds>(std::ceil(length / speed - 1e-9));
}

int jam_capacity_for(double length, int lanes, double jam_spacing) {
  return static_cast<int>(std::floor(length * lanes / jam_spacing + 1e-9));
}

NetworkSpec build_grid(int rows, int cols, const Geometry& geometry) {
  if (rows < 1 || cols < 1) {
    throw ConfigError("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  if (!(geometry.link_length > 0.0)) {
    throw ConfigError("link_length must be positive");
  }
  if (!(geometry.free_flow_speed > 0.0)) {
    throw ConfigError("free_flow_speed must be positive");
  }
  if (geometry.lanes_mid < 1 || !(geometry.jam_spacing > 0.0)) {
    throw ConfigError("lanes_mid and jam_spacing must be positive");
  }
  const auto& layout = geometry.approach_layout;
  if (layout.straight < 1 || layout.left < 1 || layout.right < 1) {
    throw ConfigError("every movement needs at least one lane");
  }
  if (layout.straight + layout.left + layout.right != geometry.lanes_approach) {
    throw ConfigError("approach_layout lanes must add up to lanes_approach");
  }
  const int capacity =
      jam_capacity_for(geometry.link_length, geometry.lanes_mid, geometry.jam_spacing);
  if (capacity < 1) {
    throw ConfigError("jam capacity per link must be at least one vehicle");
  }

  NetworkSpec net;
  net.rows = rows;
  net.cols = cols;
  net.geometry = geometry;
  const Seconds fft = free_flow_time_for(geometry.link_length, geometry.free_flow_speed);

  net.intersections.resize(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto& node = net.intersections[r * cols + c];
      node.id = NodeId{static_cast<std::uint32_t>(r * cols + c)};
      node.position = {r, c};
    }
  }

  auto add_link = [&](std::optional<NodeId> from, std::optional<NodeId> to, Direction heading,
                      LinkKind kind) {
    Link l;
    l.id = LinkId{static_cast<std::uint32_t>(net.links.size())};
    l.from = from;
    l.to = to;
    l.heading = heading;
    l.length = geometry.link_length;
    l.free_flow_time = fft;
    l.jam_capacity = capacity;
    l.kind = kind;
    net.links.push_back(l);
    if (from) {
      net.intersections[from->value].outgoing[index_of(heading)] = l.id;
    }
    if (to) {
      net.intersections[to->value].incoming[index_of(opposite(heading))] = l.id;
    }
  };

  auto neighbour = [&](int r, int c, Direction d) -> std::optional<NodeId> {
    const int nr = r + kRowStep[index_of(d)];
    const int nc = c + kColStep[index_of(d)];
    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) {
      return std::nullopt;
    }
    return NodeId{static_cast<std::uint32_t>(nr * cols + nc)};
  };

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (Direction d : kDirections) {
        if (auto to = neighbour(r, c, d)) {
          add_link(NodeId{static_cast<std::uint32_t>(r * cols + c)}, to, d, LinkKind::Internal);
        }
      }
    }
  }
  // Entry links: one per open side, travelling into the grid.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (Direction side : kDirections) {
        if (!neighbour(r, c, side)) {
          add_link(std::nullopt, NodeId{static_cast<std::uint32_t>(r * cols + c)}, opposite(side),
                   LinkKind::Entry);
        }
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (Direction d : kDirections) {
        if (!neighbour(r, c, d)) {
          add_link(NodeId{static_cast<std::uint32_t>(r * cols + c)}, std::nullopt, d,
                   LinkKind::Exit);
        }
      }
    }
  }

  if (auto problems = validate(net); !problems.empty()) {
    throw ConfigError("generated grid violates " + problems.front().invariant + " at " +
                      problems.front().element);
  }
  return net;
}

std::vector<LinkId> internal_links(const NetworkSpec& net) {
  std::vector<LinkId> out;
  out.reserve(net.links.size());
  for (const auto& l : net.links) {
    if (l.is_internal()) {
      out.push_back(l.id);
    }
  }
  return out;
}

std::vector<Violation> validate(const NetworkSpec& net) {
  std::vector<Violation> out;
  auto report = [&](std::string invariant, std::string element) {
    out.push_back({std::move(invariant), std::move(element)});
  };

  if (net.rows < 1 || net.cols < 1) {
    report("positive grid dimensions", "network");
    return out;
  }
  if (net.intersections.size() != static_cast<std::size_t>(net.rows) * net.cols) {
    report("intersection count equals rows x cols", "network");
    return out;
  }
  if (!(net.geometry.free_flow_speed > 0.0)) {
    report("positive free_flow_speed", "geometry");
  }

  const std::size_t link_count = net.links.size();
  std::size_t internal = 0;
  for (std::size_t i = 0; i < link_count; ++i) {
    const Link& l = net.links[i];
    if (l.id.value != i) {
      report("link id equals storage position", describe(l));
    }
    if (l.from && l.from->value >= net.intersections.size()) {
      report("link endpoints exist", describe(l));
      continue;
    }
    if (l.to && l.to->value >= net.intersections.size()) {
      report("link endpoints exist", describe(l));
      continue;
    }
    const bool both = l.from.has_value() && l.to.has_value();
    if (both != l.is_internal()) {
      report("is_internal iff both endpoints are signalised", describe(l));
    }
    if (!l.from && !l.to) {
      report("link touches at least one intersection", describe(l));
    }
    internal += l.is_internal() ? 1 : 0;
    if (!(l.length > 0.0)) {
      report("positive link length (free_flow_time/jam_capacity undefined)", describe(l));
      continue;
    }
    if (net.geometry.free_flow_speed > 0.0 &&
        l.free_flow_time != free_flow_time_for(l.length, net.geometry.free_flow_speed)) {
      report("free_flow_time == ceil(length / free_flow_speed)", describe(l));
    }
    if (l.jam_capacity <= 0) {
      report("jam_capacity > 0", describe(l));
    }
  }

  if (internal != expected_internal_links(net.rows, net.cols)) {
    report("internal link count == 2(rows(cols-1) + cols(rows-1))", "network");
  }

  std::vector<int> approach_uses(link_count, 0);
  for (const auto& node : net.intersections) {
    std::set<std::uint32_t> seen;
    int internal_in = 0;
    int internal_out = 0;
    for (Direction side : kDirections) {
      const LinkId in = node.incoming[index_of(side)];
      if (in.value >= link_count) {
        report("approach slot bound to an existing link", describe(node));
        continue;
      }
      if (!seen.insert(in.value).second) {
        report("approach uniqueness", describe(node));
      }
      const Link& l = net.links[in.value];
      if (!l.to || *l.to != node.id || l.heading != opposite(side)) {
        report("approach slot link ends at this intersection from that side", describe(node));
      }
      ++approach_uses[in.value];
      internal_in += l.is_internal() ? 1 : 0;

      const LinkId departing = node.outgoing[index_of(side)];
      if (departing.value >= link_count) {
        report("departure slot bound to an existing link", describe(node));
        continue;
      }
      const Link& o = net.links[departing.value];
      if (!o.from || *o.from != node.id || o.heading != side) {
        report("departure slot link starts here with that heading", describe(node));
      }
      internal_out += o.is_internal() ? 1 : 0;
    }
    const bool interior = node.position.row > 0 && node.position.row < net.rows - 1 &&
                          node.position.col > 0 && node.position.col < net.cols - 1;
    if (interior && (internal_in != 4 || internal_out != 4)) {
      report("interior intersection has 4 internal approaches and departures", describe(node));
    }
  }
  for (const auto& l : net.links) {
    if (l.has_stop_line() && l.id.value < link_count && approach_uses[l.id.value] != 1) {
      report("every stop-line link is exactly one intersection's approach", describe(l));
    }
  }
  return out;
}

}  // namespace gridtsc

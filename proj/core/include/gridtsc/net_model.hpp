#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridtsc {

using Seconds = std::int64_t;

/// Compass direction. Used both as a travel heading and as the side of an
/// intersection an approach arrives from. Order N, E, S, W is the canonical order.
enum class Direction : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::North, Direction::East,
                                                         Direction::South, Direction::West};

constexpr std::size_t index_of(Direction d) noexcept { return static_cast<std::size_t>(d); }
constexpr Direction opposite(Direction d) noexcept {
  return static_cast<Direction>((static_cast<int>(d) + 2) % 4);
}
/// Heading after a left turn (right-hand traffic).
constexpr Direction left_of(Direction d) noexcept {
  return static_cast<Direction>((static_cast<int>(d) + 3) % 4);
}
constexpr Direction right_of(Direction d) noexcept {
  return static_cast<Direction>((static_cast<int>(d) + 1) % 4);
}
constexpr bool is_north_south(Direction d) noexcept {
  return d == Direction::North || d == Direction::South;
}
std::string_view to_string(Direction d) noexcept;
std::optional<Direction> parse_direction(std::string_view text) noexcept;

struct NodeId {
  std::uint32_t value = 0;
  auto operator<=>(const NodeId&) const = default;
};

struct LinkId {
  std::uint32_t value = 0;
  auto operator<=>(const LinkId&) const = default;
};

struct GridPosition {
  int row = 0;
  int col = 0;
  auto operator<=>(const GridPosition&) const = default;
};

/// Lanes per turning movement at the stop line of an approach.
struct MovementLanes {
  int straight = 2;
  int left = 1;
  int right = 1;
};

struct Geometry {
  double link_length = 300.0;      // m
  double free_flow_speed = 13.89;  // m/s
  int lanes_mid = 3;
  int lanes_approach = 4;
  MovementLanes approach_layout{};
  double jam_spacing = 7.5;  // m per vehicle per lane
};

enum class LinkKind : std::uint8_t {
  Internal,  // signal to signal
  Entry,     // boundary source to signal
  Exit,      // signal to boundary sink
};

struct Link {
  LinkId id;
  std::optional<NodeId> from;  // empty: boundary source
  std::optional<NodeId> to;    // empty: boundary sink
  Direction heading = Direction::North;
  double length = 0.0;
  Seconds free_flow_time = 0;
  int jam_capacity = 0;
  LinkKind kind = LinkKind::Internal;

  bool is_internal() const noexcept { return kind == LinkKind::Internal; }
  /// True when the link ends at a stop line (internal and entry links).
  bool has_stop_line() const noexcept { return to.has_value(); }
};

struct Intersection {
  NodeId id;
  GridPosition position;
  /// Approach links keyed by the side they arrive from (index_of(Direction)).
  std::array<LinkId, 4> incoming{};
  /// Departing links keyed by travel heading.
  std::array<LinkId, 4> outgoing{};
};

/// Grid topology. Link storage order is part of the public contract:
///   1. internal links, row-major by from-node, then heading N, E, S, W;
///   2. entry links, row-major by to-node, then arrival side N, E, S, W;
///   3. exit links, row-major by from-node, then heading N, E, S, W.
/// Internal links therefore occupy ids [0, L) and their id equals their
/// position in the queue vector of the observation.
struct NetworkSpec {
  int rows = 0;
  int cols = 0;
  Geometry geometry{};
  std::vector<Intersection> intersections;
  std::vector<Link> links;

  std::size_t intersection_count() const noexcept { return intersections.size(); }
  std::size_t internal_link_count() const noexcept;

  const Link& link(LinkId id) const;
  const Intersection& intersection(NodeId id) const;
  NodeId node_at(GridPosition pos) const;

  /// Entry links in storage order.
  std::vector<LinkId> entry_links() const;
  /// Entry link arriving at `node` from `side`; empty if that side is internal.
  std::optional<LinkId> entry_link(NodeId node, Direction side) const;

  /// Link a vehicle joins when it leaves the end of `approach` travelling `departure_heading`.
  LinkId downstream_of(LinkId approach, Direction departure_heading) const;
};

/// Closed-form count of internal directed links of a rows x cols grid.
constexpr std::size_t expected_internal_links(int rows, int cols) noexcept {
  if (rows < 1 || cols < 1) {
    return 0;
  }
  return 2 * (static_cast<std::size_t>(rows) * (cols - 1) +
              static_cast<std::size_t>(cols) * (rows - 1));
}

Seconds free_flow_time_for(double length, double speed);
int jam_capacity_for(double length, int lanes, double jam_spacing);

/// Builds a validated grid. Throws ConfigError on non-positive dimensions or geometry.
NetworkSpec build_grid(int rows, int cols, const Geometry& geometry = {});

/// Ids of the internal links, in observation order.
std::vector<LinkId> internal_links(const NetworkSpec& net);

struct Violation {
  std::string invariant;
  std::string element;
};

/// Checks every structural invariant; empty result means the network is well formed.
std::vector<Violation> validate(const NetworkSpec& net);

}  // namespace gridtsc

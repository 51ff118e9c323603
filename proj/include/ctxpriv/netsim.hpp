#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ctxpriv/error.hpp"
#include "ctxpriv/rng.hpp"

namespace ctxpriv {

struct NodeId {
  std::uint32_t index = 0;

  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t i) : index(i) {}
  constexpr explicit NodeId(std::size_t i) : index(static_cast<std::uint32_t>(i)) {}
  constexpr explicit NodeId(int i) : index(static_cast<std::uint32_t>(i)) {}

  constexpr std::size_t value() const noexcept { return index; }
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(Point, Point) = default;
};

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Immutable sensor field: positions, unit-disk adjacency and the roles of the
// sink (home gateway) and sources. Neighbour lists are sorted by id.
class Topology {
 public:
  static Topology from_positions(std::vector<Point> positions, double radio_range,
                                 NodeId sink = NodeId{0u}, std::vector<NodeId> sources = {}) {
    if (positions.empty()) throw Error(Errc::invalid_argument, "topology needs at least one node");
    if (!(radio_range > 0.0)) throw Error(Errc::invalid_argument, "radio_range must be positive");
    Topology topo;
    topo.positions_ = std::move(positions);
    topo.radio_range_ = radio_range;
    topo.build_adjacency();
    if (!topo.is_connected()) {
      throw Error(Errc::disconnected, "topology with " + std::to_string(topo.node_count()) +
                                          " nodes is not connected at range " +
                                          std::to_string(radio_range));
    }
    return topo.with_roles(sink, std::move(sources));
  }

  Topology with_roles(NodeId sink, std::vector<NodeId> sources) const {
    require_valid(sink);
    for (NodeId s : sources) require_valid(s);
    Topology copy = *this;
    copy.sink_ = sink;
    copy.sources_ = std::move(sources);
    return copy;
  }

  std::size_t node_count() const noexcept { return positions_.size(); }
  double radio_range() const noexcept { return radio_range_; }
  NodeId sink() const noexcept { return sink_; }
  const std::vector<NodeId>& sources() const noexcept { return sources_; }
  const std::vector<Point>& positions() const noexcept { return positions_; }

  bool valid(NodeId node) const noexcept { return node.value() < node_count(); }

  void require_valid(NodeId node) const {
    if (!valid(node)) {
      throw Error(Errc::invalid_node, "node " + std::to_string(node.index) + " not in topology of " +
                                          std::to_string(node_count()) + " nodes");
    }
  }

  Point position(NodeId node) const {
    require_valid(node);
    return positions_[node.value()];
  }

  std::span<const NodeId> neighbors(NodeId node) const {
    require_valid(node);
    return adjacency_[node.value()];
  }

  bool adjacent(NodeId a, NodeId b) const {
    const auto row = neighbors(a);
    return std::binary_search(row.begin(), row.end(), b);
  }

  std::size_t degree(NodeId node) const { return neighbors(node).size(); }

  std::size_t edge_count() const noexcept {
    std::size_t total = 0;
    for (const auto& row : adjacency_) total += row.size();
    return total / 2;
  }

  bool is_connected() const {
    std::vector<char> seen(node_count(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      for (NodeId n : adjacency_[cur]) {
        if (!seen[n.value()]) {
          seen[n.value()] = 1;
          ++reached;
          stack.push_back(n.value());
        }
      }
    }
    return reached == node_count();
  }

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  Topology() = default;

  void build_adjacency() {
    const std::size_t n = positions_.size();
    adjacency_.assign(n, {});
    const double cell = radio_range_;
    const double range_sq = radio_range_ * radio_range_;
    auto key = [](std::int64_t cx, std::int64_t cy) {
      return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint32_t>(cy);
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    std::vector<std::pair<std::int64_t, std::int64_t>> cells(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cx = static_cast<std::int64_t>(std::floor(positions_[i].x / cell));
      const auto cy = static_cast<std::int64_t>(std::floor(positions_[i].y / cell));
      cells[i] = {cx, cy};
      buckets[key(cx, cy)].push_back(static_cast<std::uint32_t>(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto [cx, cy] = cells[i];
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          const auto it = buckets.find(key(cx + dx, cy + dy));
          if (it == buckets.end()) continue;
          for (std::uint32_t j : it->second) {
            if (j == i) continue;
            if (squared_distance(positions_[i], positions_[j]) <= range_sq) {
              adjacency_[i].push_back(NodeId{j});
            }
          }
        }
      }
      std::sort(adjacency_[i].begin(), adjacency_[i].end());
    }
  }

  std::vector<Point> positions_;
  double radio_range_ = 1.0;
  std::vector<std::vector<NodeId>> adjacency_;
  NodeId sink_{0u};
  std::vector<NodeId> sources_;
};

// width x height nodes on the unit lattice; node i sits at (i % width, i / width).
inline Topology build_grid(int width, int height, double radio_range) {
  if (width < 1 || height < 1) throw Error(Errc::invalid_argument, "grid dimensions must be >= 1");
  std::vector<Point> positions;
  positions.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) positions.push_back({static_cast<double>(x), static_cast<double>(y)});
  }
  return Topology::from_positions(std::move(positions), radio_range);
}

inline NodeId grid_node(int width, int x, int y) {
  return NodeId{static_cast<std::uint32_t>(y * width + x)};
}

inline Topology build_random_geometric(std::size_t node_count, double area_side, double radio_range,
                                       SimRng& rng, int max_attempts = 64) {
  if (node_count < 1) throw Error(Errc::invalid_argument, "node_count must be >= 1");
  if (!(area_side > 0.0)) throw Error(Errc::invalid_argument, "area_side must be positive");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Point> positions(node_count);
    for (auto& p : positions) {
      p.x = rng.uniform_real() * area_side;
      p.y = rng.uniform_real() * area_side;
    }
    try {
      return Topology::from_positions(std::move(positions), radio_range);
    } catch (const Error& e) {
      if (e.code() != Errc::disconnected) throw;
    }
  }
  throw Error(Errc::disconnected, "no connected placement after " + std::to_string(max_attempts) +
                                      " attempts");
}

inline constexpr int kUnreachable = -1;

// Hop distance from `origin` to every node (kUnreachable if none).
inline std::vector<int> hop_distances(const Topology& topo, NodeId origin) {
  topo.require_valid(origin);
  std::vector<int> dist(topo.node_count(), kUnreachable);
  std::deque<NodeId> queue{origin};
  dist[origin.value()] = 0;
  while (!queue.empty()) {
    const NodeId cur = queue.front();
    queue.pop_front();
    for (NodeId n : topo.neighbors(cur)) {
      if (dist[n.value()] == kUnreachable) {
        dist[n.value()] = dist[cur.value()] + 1;
        queue.push_back(n);
      }
    }
  }
  return dist;
}

// Shortest path from `from` to `to`, preferring the lowest-id parent at every
// hop so the result is reproducible.
inline std::vector<NodeId> shortest_path(const Topology& topo, NodeId from, NodeId to) {
  const auto dist = hop_distances(topo, to);
  if (dist[from.value()] == kUnreachable) throw Error(Errc::disconnected, "no path between nodes");
  std::vector<NodeId> path{from};
  NodeId cur = from;
  while (cur != to) {
    for (NodeId n : topo.neighbors(cur)) {
      if (dist[n.value()] == dist[cur.value()] - 1) {
        cur = n;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

// One radio emission. Every neighbour of `from` hears it; `hearers` views the
// topology's adjacency and is valid while the topology is alive.
struct Transmission {
  std::int64_t tick = 0;
  NodeId from;
  std::uint64_t payload_id = 0;
  std::span<const NodeId> hearers;
};

inline bool same_emission(const Transmission& a, const Transmission& b) {
  return a.tick == b.tick && a.from == b.from && a.payload_id == b.payload_id &&
         std::equal(a.hearers.begin(), a.hearers.end(), b.hearers.begin(), b.hearers.end());
}

class TransmissionLog {
 public:
  explicit TransmissionLog(const Topology& topo) : topo_(&topo) {}

  void record(std::int64_t tick, NodeId from, std::uint64_t payload_id) {
    if (!entries_.empty() && tick < entries_.back().tick) {
      throw Error(Errc::invalid_argument, "transmission ticks must be non-decreasing");
    }
    entries_.push_back({tick, from, payload_id, topo_->neighbors(from)});
  }

  const std::vector<Transmission>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  const Topology* topo_;
  std::vector<Transmission> entries_;
};

// ---- structured text export -------------------------------------------------

inline nlohmann::json topology_to_json(const Topology& topo) {
  nlohmann::json positions = nlohmann::json::array();
  for (Point p : topo.positions()) positions.push_back({p.x, p.y});
  nlohmann::json sources = nlohmann::json::array();
  for (NodeId s : topo.sources()) sources.push_back(s.index);
  return {
      {"radio_range", topo.radio_range()},
      {"positions", positions},
      {"sink", topo.sink().index},
      {"sources", sources},
  };
}

inline Topology topology_from_json(const nlohmann::json& doc) {
  try {
    std::vector<Point> positions;
    for (const auto& p : doc.at("positions")) positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    std::vector<NodeId> sources;
    for (const auto& s : doc.value("sources", nlohmann::json::array())) sources.emplace_back(s.get<std::uint32_t>());
    return Topology::from_positions(std::move(positions), doc.at("radio_range").get<double>(),
                                    NodeId{doc.value("sink", 0u)}, std::move(sources));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("topology document: ") + e.what());
  }
}

}  // namespace ctxpriv

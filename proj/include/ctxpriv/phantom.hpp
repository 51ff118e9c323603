#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctxpriv/error.hpp"
#include "ctxpriv/netsim.hpp"
#include "ctxpriv/rng.hpp"

// Source-location anonymity: phantom routing (random walk then flooding), the
// two-way receptor variant, flooding-zone sizing and a back-tracing adversary.
namespace ctxpriv::phantom {

enum class WalkMode { Pure, Directed };

struct WalkConfig {
  WalkMode mode = WalkMode::Pure;
  int hops = 0;
};

namespace detail {

inline NodeId pick(std::span<const NodeId> candidates, SimRng& rng) {
  return candidates[static_cast<std::size_t>(rng.uniform(candidates.size()))];
}

// Neighbours of `cur` other than `prev`; falls back to `prev` when it is the
// only way out.
inline std::vector<NodeId> forward_choices(const Topology& topo, NodeId cur, std::optional<NodeId> prev) {
  std::vector<NodeId> out;
  for (NodeId n : topo.neighbors(cur)) {
    if (!prev || n != *prev) out.push_back(n);
  }
  if (out.empty() && prev) out.push_back(*prev);
  return out;
}

// Same choice as pick(forward_choices(...)) without allocating.
inline NodeId step_forward(const Topology& topo, NodeId cur, std::optional<NodeId> prev, SimRng& rng) {
  const auto row = topo.neighbors(cur);
  const bool skip_prev = prev && std::binary_search(row.begin(), row.end(), *prev);
  const std::size_t choices = row.size() - (skip_prev ? 1 : 0);
  if (choices == 0) return *prev;
  std::size_t k = static_cast<std::size_t>(rng.uniform(choices));
  for (NodeId n : row) {
    if (skip_prev && n == *prev) continue;
    if (k-- == 0) return n;
  }
  return row.back();
}

}  // namespace detail

// Walk of `cfg.hops` hops from `source`; the last element is the phantom
// source. Directed mode only steps to neighbours that advance along the
// source->destination axis while any exist, which keeps the walk monotone
// and puts the phantom `hops` away from the source on open ground.
inline std::vector<NodeId> random_walk(const Topology& topo, NodeId source, const WalkConfig& cfg,
                                       SimRng& rng, std::optional<NodeId> destination = std::nullopt) {
  topo.require_valid(source);
  if (cfg.hops < 0) throw Error(Errc::invalid_argument, "walk hops must be >= 0");
  const NodeId dest = destination.value_or(topo.sink());
  topo.require_valid(dest);

  const Point origin = topo.position(source);
  const Point target = topo.position(dest);
  const double ax = target.x - origin.x;
  const double ay = target.y - origin.y;
  const bool has_axis = cfg.mode == WalkMode::Directed && (ax != 0.0 || ay != 0.0);

  std::vector<NodeId> path{source};
  path.reserve(static_cast<std::size_t>(cfg.hops) + 1);
  std::optional<NodeId> prev;
  NodeId cur = source;
  for (int step = 0; step < cfg.hops; ++step) {
    if (topo.degree(cur) == 0) break;
    NodeId next;
    std::vector<NodeId> ahead;
    if (has_axis) {
      const Point here = topo.position(cur);
      for (NodeId n : topo.neighbors(cur)) {
        const Point p = topo.position(n);
        if ((p.x - here.x) * ax + (p.y - here.y) * ay > 0.0) ahead.push_back(n);
      }
    }
    next = ahead.empty() ? detail::step_forward(topo, cur, prev, rng) : detail::pick(ahead, rng);
    prev = cur;
    cur = next;
    path.push_back(cur);
  }
  return path;
}

struct FloodResult {
  bool delivered = false;
  std::size_t transmissions = 0;
  int latency_hops = 0;
};

// Breadth-first flood over the whole connected component. Every reached node
// except the destination rebroadcasts exactly once, at tick
// start_tick + hop distance from the origin. The destination consumes.
inline FloodResult flood(const Topology& topo, NodeId origin, NodeId destination,
                         TransmissionLog* log = nullptr, std::int64_t start_tick = 0,
                         std::uint64_t payload_id = 0) {
  topo.require_valid(destination);
  const auto dist = hop_distances(topo, origin);
  FloodResult result;
  result.delivered = dist[destination.value()] != kUnreachable;
  result.latency_hops = result.delivered ? dist[destination.value()] : kUnreachable;
  if (origin == destination) return result;

  std::vector<NodeId> senders;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] != kUnreachable && NodeId{i} != destination) senders.emplace_back(i);
  }
  std::stable_sort(senders.begin(), senders.end(),
                   [&](NodeId a, NodeId b) { return dist[a.value()] < dist[b.value()]; });
  result.transmissions = senders.size();
  if (log) {
    for (NodeId s : senders) log->record(start_tick + dist[s.value()], s, payload_id);
  }
  return result;
}

struct ReceptorPath {
  std::vector<NodeId> nodes;  // far end first, destination last

  std::size_t length() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
  NodeId destination() const { return nodes.back(); }
};

// Self-avoiding walk of up to `length` hops grown from the destination and
// stored in forwarding order. Stops early if the walk traps itself.
inline ReceptorPath build_receptor(const Topology& topo, NodeId destination, int length, SimRng& rng) {
  topo.require_valid(destination);
  if (length < 0) throw Error(Errc::invalid_argument, "receptor length must be >= 0");
  std::vector<char> used(topo.node_count(), 0);
  std::vector<NodeId> grown{destination};
  used[destination.value()] = 1;
  NodeId cur = destination;
  for (int step = 0; step < length; ++step) {
    std::vector<NodeId> free;
    for (NodeId n : topo.neighbors(cur)) {
      if (!used[n.value()]) free.push_back(n);
    }
    if (free.empty()) break;
    cur = detail::pick(free, rng);
    used[cur.value()] = 1;
    grown.push_back(cur);
  }
  std::reverse(grown.begin(), grown.end());
  return ReceptorPath{std::move(grown)};
}

struct Route {
  std::vector<NodeId> nodes;
  std::size_t transmissions = 0;
  int latency_hops = 0;
};

// Slot of every receptor node, validated against the topology once.
class ReceptorIndex {
 public:
  ReceptorIndex(const Topology& topo, const ReceptorPath& receptor)
      : receptor_(&receptor), slot_(topo.node_count(), kNone) {
    if (receptor.nodes.empty()) throw Error(Errc::invalid_argument, "empty receptor path");
    for (std::size_t i = 0; i < receptor.nodes.size(); ++i) {
      topo.require_valid(receptor.nodes[i]);
      if (i > 0 && !topo.adjacent(receptor.nodes[i - 1], receptor.nodes[i])) {
        throw Error(Errc::invalid_argument, "receptor path is not contiguous in this topology");
      }
      slot_[receptor.nodes[i].value()] = i;
    }
  }

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t slot(NodeId node) const { return slot_[node.value()]; }
  const ReceptorPath& path() const { return *receptor_; }

 private:
  const ReceptorPath* receptor_;
  std::vector<std::size_t> slot_;
};

// Random walk from `source` (no immediate backtracking) until it touches the
// receptor, then along the receptor to its destination.
inline Route deliver_two_way(const Topology& topo, NodeId source, const ReceptorIndex& receptor, SimRng& rng,
                             std::int64_t max_steps) {
  topo.require_valid(source);
  Route route;
  route.nodes.push_back(source);
  std::optional<NodeId> prev;
  NodeId cur = source;
  std::int64_t steps = 0;
  while (receptor.slot(cur) == ReceptorIndex::kNone) {
    if (steps >= max_steps) {
      throw Error(Errc::no_rendezvous, "walk missed the receptor within " + std::to_string(max_steps) +
                                           " steps");
    }
    const NodeId next = detail::step_forward(topo, cur, prev, rng);
    prev = cur;
    cur = next;
    route.nodes.push_back(cur);
    ++steps;
  }
  const auto& nodes = receptor.path().nodes;
  route.nodes.insert(route.nodes.end(), nodes.begin() + static_cast<std::ptrdiff_t>(receptor.slot(cur)) + 1,
                     nodes.end());
  route.transmissions = route.nodes.size() - 1;
  route.latency_hops = static_cast<int>(route.nodes.size() - 1);
  return route;
}

inline Route deliver_two_way(const Topology& topo, NodeId source, const ReceptorPath& receptor, SimRng& rng,
                             std::int64_t max_steps) {
  return deliver_two_way(topo, source, ReceptorIndex(topo, receptor), rng, max_steps);
}

// ---- adversary hunt ---------------------------------------------------------

struct Strategy {
  enum class Kind { FloodOnly, Phantom, TwoWay };

  Kind kind = Kind::FloodOnly;
  WalkConfig walk{};
  int receptor_length = 0;

  static Strategy flood_only() { return {}; }
  static Strategy phantom(WalkConfig walk) { return {Kind::Phantom, walk, 0}; }
  static Strategy two_way(int receptor_length) { return {Kind::TwoWay, {}, receptor_length}; }

  std::string name() const {
    switch (kind) {
      case Kind::FloodOnly: return "flood";
      case Kind::Phantom: return "phantom";
      case Kind::TwoWay: return "twoway";
    }
    return "?";
  }

  // Walk hops for phantom routing, receptor length for the two-way variant.
  int walk_hops() const {
    switch (kind) {
      case Kind::FloodOnly: return 0;
      case Kind::Phantom: return walk.hops;
      case Kind::TwoWay: return receptor_length;
    }
    return 0;
  }
};

struct AdversaryState {
  NodeId location;
  int moves_made = 0;
  std::vector<std::pair<std::int64_t, NodeId>> heard_log;
  std::vector<NodeId> relocations;
};

struct HuntReport {
  int safety_period = 0;
  bool captured = false;
  std::size_t transmissions_total = 0;
  std::size_t messages_delivered = 0;
  std::vector<int> delivery_latency_hops;  // one entry per delivered message
  AdversaryState adversary;

  double mean_latency_hops() const {
    if (delivery_latency_hops.empty()) return 0.0;
    const double total = std::accumulate(delivery_latency_hops.begin(), delivery_latency_hops.end(), 0.0);
    return total / static_cast<double>(delivery_latency_hops.size());
  }
};

struct MessageOutcome {
  bool delivered = false;
  std::size_t transmissions = 0;
  int latency_hops = 0;
  std::vector<NodeId> route;  // path the copy reaching the destination took
};

// Routes one message under `strategy`, appending its emissions to `log`
// starting at `start_tick`. A message born at the destination is delivered
// on the spot whatever the strategy.
inline MessageOutcome route_message(const Topology& topo, const Strategy& strategy, NodeId source,
                                    NodeId destination, const ReceptorIndex* receptor, SimRng& rng,
                                    TransmissionLog& log, std::int64_t start_tick, std::uint64_t payload_id,
                                    std::int64_t max_steps) {
  MessageOutcome out;
  topo.require_valid(source);
  topo.require_valid(destination);
  if (source == destination) {
    out.delivered = true;
    out.route = {source};
    return out;
  }
  switch (strategy.kind) {
    case Strategy::Kind::FloodOnly: {
      const auto res = flood(topo, source, destination, &log, start_tick, payload_id);
      out.delivered = res.delivered;
      out.transmissions = res.transmissions;
      out.latency_hops = res.latency_hops;
      out.route = shortest_path(topo, source, destination);
      break;
    }
    case Strategy::Kind::Phantom: {
      const auto walk = random_walk(topo, source, strategy.walk, rng, destination);
      const std::size_t hops = walk.size() - 1;
      for (std::size_t i = 0; i < hops; ++i) {
        log.record(start_tick + static_cast<std::int64_t>(i), walk[i], payload_id);
      }
      const NodeId phantom_source = walk.back();
      const auto res = flood(topo, phantom_source, destination, &log,
                             start_tick + static_cast<std::int64_t>(hops), payload_id);
      out.delivered = res.delivered;
      out.transmissions = hops + res.transmissions;
      out.latency_hops = static_cast<int>(hops) + res.latency_hops;
      out.route = walk;
      const auto tail = shortest_path(topo, phantom_source, destination);
      out.route.insert(out.route.end(), tail.begin() + 1, tail.end());
      break;
    }
    case Strategy::Kind::TwoWay: {
      if (!receptor) throw Error(Errc::invalid_argument, "two-way routing needs a receptor path");
      try {
        auto route = deliver_two_way(topo, source, *receptor, rng, max_steps);
        for (std::size_t i = 0; i + 1 < route.nodes.size(); ++i) {
          log.record(start_tick + static_cast<std::int64_t>(i), route.nodes[i], payload_id);
        }
        out.delivered = true;
        out.transmissions = route.transmissions;
        out.latency_hops = route.latency_hops;
        out.route = std::move(route.nodes);
      } catch (const Error& e) {
        if (e.code() != Errc::no_rendezvous) throw;
        // The walk still transmitted max_steps times; the copy is lost.
        out.delivered = false;
        out.transmissions = static_cast<std::size_t>(max_steps);
      }
      break;
    }
  }
  return out;
}

struct HuntOptions {
  std::int64_t max_steps = 1'000'000;
  // Invoked after every message with its emissions and the adversary state
  // after it reacted.
  std::function<void(int message, const TransmissionLog&, const AdversaryState&)> observer;
};

// Patient single adversary: starts at `adversary_start`, and after each
// message moves once to the earliest overheard sender (lowest tick, then
// lowest id). Capture happens when it stands on the true source, which is the
// topology's first source; the destination is the sink.
inline HuntReport hunt(const Topology& topo, const Strategy& strategy, NodeId adversary_start, int message_budget,
                       SimRng& rng, const HuntOptions& options = {}) {
  if (message_budget < 1) throw Error(Errc::invalid_argument, "message_budget must be >= 1");
  if (topo.sources().empty()) throw Error(Errc::invalid_argument, "topology has no source role");
  topo.require_valid(adversary_start);
  const NodeId source = topo.sources().front();
  const NodeId destination = topo.sink();

  std::optional<ReceptorPath> receptor;
  std::optional<ReceptorIndex> receptor_index;
  if (strategy.kind == Strategy::Kind::TwoWay) {
    SimRng receptor_rng = rng.fork("receptor");
    receptor = build_receptor(topo, destination, strategy.receptor_length, receptor_rng);
    receptor_index.emplace(topo, *receptor);
  }

  HuntReport report;
  report.adversary.location = adversary_start;
  if (adversary_start == source) {
    report.captured = true;
    return report;
  }

  TransmissionLog log(topo);
  std::int64_t clock = 0;
  for (int message = 1; message <= message_budget; ++message) {
    log.clear();
    const auto outcome = route_message(topo, strategy, source, destination, receptor_index ? &*receptor_index : nullptr, rng,
                                       log, clock, static_cast<std::uint64_t>(message), options.max_steps);
    report.transmissions_total += outcome.transmissions;
    if (outcome.delivered) {
      ++report.messages_delivered;
      report.delivery_latency_hops.push_back(outcome.latency_hops);
    }

    AdversaryState& adv = report.adversary;
    const Transmission* first = nullptr;
    for (const auto& tx : log.entries()) {
      if (!topo.adjacent(tx.from, adv.location)) continue;
      adv.heard_log.emplace_back(tx.tick, tx.from);
      if (!first || tx.tick < first->tick || (tx.tick == first->tick && tx.from < first->from)) first = &tx;
    }
    if (first) {
      adv.location = first->from;
      ++adv.moves_made;
      adv.relocations.push_back(adv.location);
    }
    clock = log.empty() ? clock + 1 : log.entries().back().tick + 1;
    if (options.observer) options.observer(message, log, adv);

    if (adv.location == source) {
      report.captured = true;
      report.safety_period = message;
      return report;
    }
  }
  report.safety_period = message_budget;
  return report;
}

// ---- flooding-zone sizing ---------------------------------------------------

// Exact C(n, k) with overflow detection.
inline std::uint64_t binom(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0) throw Error(Errc::domain, "binom arguments must be non-negative");
  if (k > n) throw Error(Errc::domain, "binom requires H <= N");
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    acc = acc * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
    if (acc > static_cast<unsigned __int128>(UINT64_MAX)) {
      throw Error(Errc::overflow, "C(" + std::to_string(n) + ", " + std::to_string(k) + ") exceeds 64 bits");
    }
  }
  return static_cast<std::uint64_t>(acc);
}

struct ZonePlan {
  double p_r = 0.0;
  int hops = 0;
  std::int64_t min_nodes = 0;
  std::uint64_t broadcast_count = 0;  // K = C(min_nodes, hops)
};

// Smallest zone size N >= H whose broadcast count C(N, H) exceeds 1 / P_r.
inline ZonePlan min_zone_nodes(double p_r, int hops) {
  if (!(p_r > 0.0 && p_r <= 1.0)) throw Error(Errc::domain, "P_r must lie in (0, 1]");
  if (hops < 1) throw Error(Errc::domain, "H must be >= 1");
  const double threshold = 1.0 / p_r;
  for (std::int64_t n = hops;; ++n) {
    const std::uint64_t k = binom(n, hops);
    if (static_cast<double>(k) > threshold) return {p_r, hops, n, k};
  }
}

inline double traceback_probability(std::int64_t n, std::int64_t hops) {
  return 1.0 / static_cast<double>(binom(n, hops));
}

}  // namespace ctxpriv::phantom

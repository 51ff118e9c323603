#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxpriv/error.hpp"
#include "ctxpriv/field.hpp"
#include "ctxpriv/keymgmt.hpp"
#include "ctxpriv/netsim.hpp"
#include "ctxpriv/phantom.hpp"
#include "ctxpriv/ppda.hpp"
#include "ctxpriv/rng.hpp"
#include "ctxpriv/transcript.hpp"

// End-to-end delivery to the home gateway (the sink): optional data
// perturbation between source pairs at an aggregator-forwarder, followed by
// optional anonymous routing of whatever leaves the aggregator.
namespace ctxpriv::pipeline {

enum class PrivacyLevel { None, AnonymityOnly, PerturbationOnly, Full };

struct Layers {
  bool anonymity = false;     // L1: phantom or two-way routing
  bool perturbation = false;  // L2: key setup + share-based aggregation
  friend bool operator==(const Layers&, const Layers&) = default;
};

inline Layers select_layers(PrivacyLevel level) {
  switch (level) {
    case PrivacyLevel::None: return {false, false};
    case PrivacyLevel::AnonymityOnly: return {true, false};
    case PrivacyLevel::PerturbationOnly: return {false, true};
    case PrivacyLevel::Full: return {true, true};
  }
  return {};
}

inline std::string to_string(PrivacyLevel level) {
  switch (level) {
    case PrivacyLevel::None: return "none";
    case PrivacyLevel::AnonymityOnly: return "anonymity";
    case PrivacyLevel::PerturbationOnly: return "perturbation";
    case PrivacyLevel::Full: return "full";
  }
  return "?";
}

inline PrivacyLevel parse_level(std::string_view s) {
  if (s == "none") return PrivacyLevel::None;
  if (s == "anonymity") return PrivacyLevel::AnonymityOnly;
  if (s == "perturbation") return PrivacyLevel::PerturbationOnly;
  if (s == "full") return PrivacyLevel::Full;
  throw Error(Errc::parse, "unknown privacy level '" + std::string(s) + "'");
}

struct Cluster {
  NodeId s1;
  NodeId s2;
  NodeId af;
  friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct Pairing {
  std::vector<Cluster> clusters;
  std::vector<NodeId> unpaired;
};

// Greedy: repeatedly pair the two closest remaining sources (hop count, ties
// by ids). The AF is a common neighbour, else the node nearest the pair's
// midpoint; sources, the sink and already-chosen AFs are never used.
inline Pairing pair_sources(std::span<const NodeId> sources, const Topology& topo) {
  if (sources.size() < 2) throw Error(Errc::invalid_argument, "pairing needs at least two sources");
  std::set<NodeId> remaining;
  for (NodeId s : sources) {
    topo.require_valid(s);
    if (!remaining.insert(s).second) throw Error(Errc::invalid_argument, "duplicate source");
  }
  std::map<NodeId, std::vector<int>> dist;
  for (NodeId s : remaining) dist.emplace(s, hop_distances(topo, s));

  std::set<NodeId> taken(remaining.begin(), remaining.end());
  taken.insert(topo.sink());

  Pairing out;
  while (remaining.size() >= 2) {
    std::optional<std::pair<NodeId, NodeId>> best;
    int best_d = std::numeric_limits<int>::max();
    for (auto a = remaining.begin(); a != remaining.end(); ++a) {
      for (auto b = std::next(a); b != remaining.end(); ++b) {
        const int d = dist.at(*a)[b->value()];
        if (d != kUnreachable && d < best_d) {
          best_d = d;
          best = {*a, *b};
        }
      }
    }
    if (!best) break;
    const auto [s1, s2] = *best;
    const Point pa = topo.position(s1);
    const Point pb = topo.position(s2);
    const Point mid{(pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0};

    std::optional<NodeId> af;
    double af_d = std::numeric_limits<double>::infinity();
    bool af_common = false;
    const auto& d1 = dist.at(s1);
    const auto& d2 = dist.at(s2);
    for (std::uint32_t i = 0; i < topo.node_count(); ++i) {
      const NodeId n{i};
      if (taken.contains(n) || d1[i] == kUnreachable || d2[i] == kUnreachable) continue;
      const bool common = topo.adjacent(n, s1) && topo.adjacent(n, s2);
      const double d = squared_distance(topo.position(n), mid);
      if ((common && !af_common) || (common == af_common && d < af_d)) {
        af = n;
        af_d = d;
        af_common = common;
      }
    }
    if (!af) {
      throw Error(Errc::no_af_candidate, "no node reaches both " + std::to_string(s1.value()) + " and " +
                                             std::to_string(s2.value()));
    }
    taken.insert(*af);
    out.clusters.push_back({s1, s2, *af});
    remaining.erase(s1);
    remaining.erase(s2);
  }
  out.unpaired.assign(remaining.begin(), remaining.end());
  return out;
}

struct PipelineConfig {
  int grid_w = 10;
  int grid_h = 10;
  double radio_range = 1.0;
  std::optional<Topology> topology;  // overrides the grid when set
  NodeId sink{0u};
  PrivacyLevel level = PrivacyLevel::Full;
  phantom::Strategy anonymity = phantom::Strategy::phantom({phantom::WalkMode::Pure, 10});
  std::uint64_t modulus = kDefaultModulus;
  std::size_t pool_size = 256;
  std::size_t af_bank_size = 128;
  std::vector<Cluster> clusters;
  std::vector<NodeId> sources;          // paired automatically when `clusters` is empty
  std::map<NodeId, std::uint64_t> readings;  // absent nodes read 0
  int rounds = 1;
  std::uint64_t seed = 0;
  std::int64_t max_walk_steps = 100'000;
  // Replay hooks for the three-party round.
  std::optional<ppda::SeedAssignment> fixed_seeds;
  std::optional<std::array<ppda::RandomCoeffs, 3>> fixed_coeffs;
};

struct MessageRecord {
  int round = 0;
  PrivacyLevel level = PrivacyLevel::None;
  NodeId origin;                // AF with perturbation, else the source
  std::vector<NodeId> members;  // sources whose data the message carries
  std::size_t route_length = 0;
  std::size_t transmissions = 0;
  int latency_hops = 0;
  bool delivered = false;
  std::optional<std::uint64_t> hg_value;
  std::size_t transcript_begin = 0;  // first transcript frame of this message
  friend bool operator==(const MessageRecord&, const MessageRecord&) = default;
};

struct DeliveryReport {
  std::vector<MessageRecord> messages;
  std::vector<Cluster> clusters;
  std::vector<NodeId> unpaired;
  Transcript transcript;
  bool af_holds_ss_key = false;
  friend bool operator==(const DeliveryReport&, const DeliveryReport&) = default;
};

inline Topology make_topology(const PipelineConfig& cfg) {
  if (cfg.topology) return cfg.topology->with_roles(cfg.sink, cfg.topology->sources());
  if (cfg.grid_w < 1 || cfg.grid_h < 1) throw Error(Errc::configuration, "grid dimensions must be >= 1");
  return build_grid(cfg.grid_w, cfg.grid_h, cfg.radio_range).with_roles(cfg.sink, {});
}

namespace detail {

struct Leg {
  std::size_t route_length = 0;
  std::size_t transmissions = 0;
  int latency_hops = 0;
  bool delivered = false;
};

inline Leg deliver(const Topology& topo, const PipelineConfig& cfg, bool anonymous, NodeId origin,
                   const phantom::ReceptorIndex* receptor, SimRng& rng, std::uint64_t payload_id) {
  Leg leg;
  if (!anonymous) {
    const auto path = shortest_path(topo, origin, topo.sink());
    leg.route_length = path.size() - 1;
    leg.transmissions = leg.route_length;
    leg.latency_hops = static_cast<int>(leg.route_length);
    leg.delivered = true;
    return leg;
  }
  TransmissionLog log(topo);
  const auto out =
      phantom::route_message(topo, cfg.anonymity, origin, topo.sink(), receptor, rng, log, 0, payload_id, cfg.max_walk_steps);
  leg.route_length = out.route.empty() ? 0 : out.route.size() - 1;
  leg.transmissions = out.transmissions;
  leg.latency_hops = out.latency_hops;
  leg.delivered = out.delivered;
  return leg;
}

inline std::uint64_t reading(const PipelineConfig& cfg, NodeId n) {
  const auto it = cfg.readings.find(n);
  return it == cfg.readings.end() ? 0 : it->second;
}

}  // namespace detail

inline DeliveryReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.rounds < 0) throw Error(Errc::configuration, "rounds must be >= 0");
  const Topology topo = make_topology(cfg);
  const Layers layers = select_layers(cfg.level);
  const Field field(cfg.modulus);

  DeliveryReport report;
  if (!cfg.clusters.empty()) {
    report.clusters = cfg.clusters;
  } else if (layers.perturbation && cfg.sources.size() >= 2) {
    auto pairing = pair_sources(cfg.sources, topo);
    report.clusters = std::move(pairing.clusters);
    report.unpaired = std::move(pairing.unpaired);
  }
  for (const auto& c : report.clusters) {
    for (NodeId n : {c.s1, c.s2, c.af}) {
      if (!topo.valid(n)) throw Error(Errc::configuration, "cluster node " + std::to_string(n.value()) + " out of range");
    }
    if (c.af == c.s1 || c.af == c.s2 || c.s1 == c.s2) {
      throw Error(Errc::configuration, "cluster members and AF must be distinct");
    }
  }
  if (layers.perturbation && report.clusters.empty()) {
    throw Error(Errc::configuration, "perturbation requires at least one (s1, s2, af) cluster");
  }

  // Without perturbation every source (clustered or not) reports on its own.
  std::vector<NodeId> solo = cfg.sources;
  for (const auto& c : cfg.clusters) {
    for (NodeId s : {c.s1, c.s2}) {
      if (std::ranges::find(solo, s) == solo.end()) solo.push_back(s);
    }
  }
  if (!layers.perturbation && solo.empty()) throw Error(Errc::configuration, "no sources configured");
  for (NodeId s : solo) {
    if (!topo.valid(s)) throw Error(Errc::configuration, "source " + std::to_string(s.value()) + " out of range");
  }

  SimRng rng(cfg.seed, "pipeline");
  std::optional<phantom::ReceptorPath> receptor;
  std::optional<phantom::ReceptorIndex> receptor_index;
  if (layers.anonymity && cfg.anonymity.kind == phantom::Strategy::Kind::TwoWay) {
    SimRng r = rng.fork("receptor");
    receptor = phantom::build_receptor(topo, topo.sink(), cfg.anonymity.receptor_length, r);
    receptor_index.emplace(topo, *receptor);
  }
  std::optional<keymgmt::KeyPool> pool;
  if (layers.perturbation) {
    SimRng r = rng.fork("pool");
    pool = keymgmt::generate_pool(cfg.pool_size, cfg.af_bank_size, r);
  }

  Transcript& log = report.transcript;
  std::uint64_t payload = 0;
  auto emit = [&](int round, NodeId origin, std::vector<NodeId> members, std::uint64_t value, SimRng& mrng) {
    MessageRecord rec;
    rec.round = round;
    rec.level = cfg.level;
    rec.origin = origin;
    rec.members = std::move(members);
    rec.transcript_begin = log.frames.size();
    log.event(layers.anonymity ? "route:" + cfg.anonymity.name() : "route:shortest");
    const auto leg = detail::deliver(topo, cfg, layers.anonymity, origin, receptor_index ? &*receptor_index : nullptr,
                                     mrng, payload++);
    rec.route_length = leg.route_length;
    rec.transmissions = leg.transmissions;
    rec.latency_hops = leg.latency_hops;
    rec.delivered = leg.delivered;
    if (leg.delivered) {
      rec.hg_value = value;
      wire::Bytes body;
      wire::put_u64(body, value);
      log.frame({"deliver", origin, topo.sink(), std::nullopt, wire::hex(body), value});
    }
    report.messages.push_back(std::move(rec));
  };

  for (int round = 0; round < cfg.rounds; ++round) {
    if (layers.perturbation) {
      for (std::size_t c = 0; c < report.clusters.size(); ++c) {
        const Cluster& cl = report.clusters[c];
        SimRng mrng = rng.fork("round:" + std::to_string(round) + "/cluster:" + std::to_string(c));
        ppda::SppdaOptions opt;
        opt.modulus = cfg.modulus;
        opt.af = cl.af;
        opt.s1 = cl.s1;
        opt.s2 = cl.s2;
        opt.pool = &*pool;
        opt.fixed_seeds = cfg.fixed_seeds;
        opt.fixed_coeffs = cfg.fixed_coeffs;
        opt.transcript = &log;
        const std::size_t first_frame = log.frames.size();
        SimRng agg_rng = mrng.fork("ppda");
        const auto sppda = ppda::run_sppda(field.elem(detail::reading(cfg, cl.s1)), field.elem(detail::reading(cfg, cl.s2)),
                                           field.elem(detail::reading(cfg, cl.af)), agg_rng, opt);
        const auto held = sppda.af_state.held_key_ids();
        for (auto id : held) {
          if (std::ranges::find(sppda.ss_bank_ids, id) != sppda.ss_bank_ids.end()) report.af_holds_ss_key = true;
        }
        SimRng route_rng = mrng.fork("route");
        emit(round, cl.af, {cl.s1, cl.s2}, sppda.result.pair_sum.value, route_rng);
        report.messages.back().transcript_begin = first_frame;
      }
    } else {
      for (std::size_t i = 0; i < solo.size(); ++i) {
        SimRng mrng = rng.fork("round:" + std::to_string(round) + "/source:" + std::to_string(i));
        SimRng route_rng = mrng.fork("route");
        emit(round, solo[i], {solo[i]}, field.elem(detail::reading(cfg, solo[i])).value, route_rng);
      }
    }
  }
  return report;
}

inline nlohmann::json to_json(const MessageRecord& m) {
  nlohmann::json members = nlohmann::json::array();
  for (NodeId n : m.members) members.push_back(n.value());
  return {{"round", m.round},
          {"level", to_string(m.level)},
          {"origin", m.origin.value()},
          {"members", members},
          {"route_length", m.route_length},
          {"transmissions", m.transmissions},
          {"latency_hops", m.latency_hops},
          {"delivered", m.delivered},
          {"hg_value", m.hg_value ? nlohmann::json(*m.hg_value) : nlohmann::json(nullptr)},
          {"transcript_begin", m.transcript_begin}};
}

inline nlohmann::json to_json(const DeliveryReport& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back(to_json(m));
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : r.clusters) clusters.push_back({{"s1", c.s1.value()}, {"s2", c.s2.value()}, {"af", c.af.value()}});
  nlohmann::json unpaired = nlohmann::json::array();
  for (NodeId n : r.unpaired) unpaired.push_back(n.value());
  return {{"messages", msgs},
          {"clusters", clusters},
          {"unpaired", unpaired},
          {"af_holds_ss_key", r.af_holds_ss_key},
          {"transcript", ctxpriv::to_json(r.transcript)}};
}

inline const char* kMessageCsvHeader =
    "round,level,origin,members,route_length,transmissions,latency_hops,delivered,hg_value\n";

inline std::string messages_csv(const DeliveryReport& r) {
  std::string out = kMessageCsvHeader;
  for (const auto& m : r.messages) {
    std::string members;
    for (std::size_t i = 0; i < m.members.size(); ++i) {
      if (i) members += ';';
      members += std::to_string(m.members[i].value());
    }
    out += std::to_string(m.round) + ',' + to_string(m.level) + ',' + std::to_string(m.origin.value()) + ',' + members +
           ',' + std::to_string(m.route_length) + ',' + std::to_string(m.transmissions) + ',' +
           std::to_string(m.latency_hops) + ',' + (m.delivered ? "1" : "0") + ',' +
           (m.hg_value ? std::to_string(*m.hg_value) : std::string()) + '\n';
  }
  return out;
}

}  // namespace ctxpriv::pipeline

#include <algorithm>
#include <string>

#include "ctxpriv/pipeline.hpp"
#include "test_support.hpp"

using namespace ctxpriv;
using namespace ctxpriv::pipeline;

namespace {

PipelineConfig worked_config(PrivacyLevel level, std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.grid_w = 8;
  cfg.grid_h = 8;
  cfg.sink = NodeId{0u};
  cfg.level = level;
  cfg.anonymity = phantom::Strategy::phantom({phantom::WalkMode::Pure, 5});
  // S1 and S2 two apart on row 5, AF between them.
  cfg.clusters = {{grid_node(8, 4, 5), grid_node(8, 6, 5), grid_node(8, 5, 5)}};
  cfg.readings = {{grid_node(8, 4, 5), 5}, {grid_node(8, 6, 5), 7}, {grid_node(8, 5, 5), 3}};
  cfg.seed = seed;
  return cfg;
}

std::string le_hex(std::uint64_t v) { wire::Bytes b; wire::put_u64(b, v); return wire::hex(b); }

// True when any frame exposes `v` as a plaintext field, or carries its 8-byte
// little-endian encoding at a byte boundary of its wire image.
bool transcript_exposes(const Transcript& t, std::uint64_t v) {
  const std::string needle = le_hex(v);
  for (const auto& f : t.frames) {
    if (f.plaintext_value && *f.plaintext_value == v) return true;
    for (std::size_t pos = f.wire_hex.find(needle); pos != std::string::npos; pos = f.wire_hex.find(needle, pos + 1)) {
      if (pos % 2 == 0) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("layer selection", "[pipeline]") {
  CHECK(select_layers(PrivacyLevel::None) == Layers{false, false});
  CHECK(select_layers(PrivacyLevel::AnonymityOnly) == Layers{true, false});
  CHECK(select_layers(PrivacyLevel::PerturbationOnly) == Layers{false, true});
  CHECK(select_layers(PrivacyLevel::Full) == Layers{true, true});
  for (auto l : {PrivacyLevel::None, PrivacyLevel::AnonymityOnly, PrivacyLevel::PerturbationOnly, PrivacyLevel::Full}) {
    CHECK(parse_level(to_string(l)) == l);
  }
  REQUIRE_ERRC(parse_level("max"), Errc::parse);
}

TEST_CASE("plain delivery uses the shortest path", "[pipeline]") {
  PipelineConfig cfg;
  cfg.grid_w = 6;
  cfg.grid_h = 6;
  cfg.level = PrivacyLevel::None;
  const NodeId src = grid_node(6, 5, 3);
  cfg.sources = {src};
  cfg.readings = {{src, 5}};
  const auto r = run_pipeline(cfg);
  REQUIRE(r.messages.size() == 1);
  CHECK(r.messages[0].hg_value == 5u);
  CHECK(r.messages[0].route_length == 8);  // Manhattan distance to the corner
  CHECK(r.messages[0].transmissions == 8);
  CHECK_FALSE(r.transcript.has_event_prefix("keymgmt"));
  CHECK_FALSE(r.transcript.has_event_prefix("ppda"));
  CHECK(r.transcript.has_event_prefix("route:shortest"));
}

TEST_CASE("full level delivers only the pair sum", "[pipeline][confidentiality]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = run_pipeline(worked_config(PrivacyLevel::Full, seed));
    REQUIRE(r.messages.size() == 1);
    REQUIRE(r.messages[0].delivered);
    REQUIRE(r.messages[0].hg_value == 12u);
    REQUIRE(r.messages[0].origin == grid_node(8, 5, 5));
    REQUIRE_FALSE(transcript_exposes(r.transcript, 5));
    REQUIRE_FALSE(transcript_exposes(r.transcript, 7));
    REQUIRE_FALSE(r.af_holds_ss_key);
    REQUIRE(r.transcript.has_event_prefix("route:phantom"));
    REQUIRE(r.transcript.has_event_prefix("ppda:solve"));
  }
}

TEST_CASE("confidentiality holds for random readings", "[pipeline][confidentiality][property]") {
  SimRng rng(9, "conf");
  for (int trial = 0; trial < 40; ++trial) {
    auto cfg = worked_config(trial % 2 ? PrivacyLevel::Full : PrivacyLevel::PerturbationOnly, trial);
    const std::uint64_t x = 1 + rng.uniform(kDefaultModulus - 1);
    const std::uint64_t y = 1 + rng.uniform(kDefaultModulus - 1);
    const std::uint64_t z = rng.uniform(kDefaultModulus);
    cfg.readings = {{cfg.clusters[0].s1, x}, {cfg.clusters[0].s2, y}, {cfg.clusters[0].af, z}};
    const auto r = run_pipeline(cfg);
    REQUIRE(r.messages[0].hg_value == (x + y) % kDefaultModulus);
    REQUIRE_FALSE(transcript_exposes(r.transcript, x));
    REQUIRE_FALSE(transcript_exposes(r.transcript, y));
  }
}

TEST_CASE("layer isolation", "[pipeline]") {
  auto anon = worked_config(PrivacyLevel::AnonymityOnly, 3);
  const auto ra = run_pipeline(anon);
  CHECK_FALSE(ra.transcript.has_event_prefix("keymgmt"));
  CHECK_FALSE(ra.transcript.has_event_prefix("ppda"));
  REQUIRE(ra.messages.size() == 2);  // each source reports its own reading
  CHECK(ra.messages[0].hg_value == 5u);
  CHECK(ra.messages[1].hg_value == 7u);
  CHECK(ra.transcript.has_event_prefix("route:phantom"));

  const auto rp = run_pipeline(worked_config(PrivacyLevel::PerturbationOnly, 3));
  CHECK(rp.transcript.has_event_prefix("keymgmt"));
  CHECK(rp.transcript.has_event_prefix("route:shortest"));
  CHECK_FALSE(rp.transcript.has_event_prefix("route:phantom"));
  REQUIRE(rp.messages.size() == 1);
  // AF at (5,5) to the corner.
  CHECK(rp.messages[0].route_length == 10);
}

TEST_CASE("phantom leg costs at least the direct route", "[pipeline]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto full = run_pipeline(worked_config(PrivacyLevel::Full, seed));
    const auto plain = run_pipeline(worked_config(PrivacyLevel::PerturbationOnly, seed));
    REQUIRE(full.messages[0].latency_hops >= plain.messages[0].latency_hops);
  }
}

TEST_CASE("two-way anonymity in the pipeline", "[pipeline]") {
  auto cfg = worked_config(PrivacyLevel::Full, 4);
  cfg.anonymity = phantom::Strategy::two_way(6);
  cfg.rounds = 5;
  const auto r = run_pipeline(cfg);
  REQUIRE(r.messages.size() == 5);
  for (const auto& m : r.messages) {
    REQUIRE(m.delivered);
    REQUIRE(m.hg_value == 12u);
    REQUIRE(m.route_length >= 10);
  }
  CHECK(r.transcript.has_event_prefix("route:twoway"));
}

TEST_CASE("configuration guards", "[pipeline]") {
  auto cfg = worked_config(PrivacyLevel::PerturbationOnly, 1);
  cfg.clusters.clear();
  REQUIRE_ERRC(run_pipeline(cfg), Errc::configuration);
  cfg.level = PrivacyLevel::Full;
  REQUIRE_ERRC(run_pipeline(cfg), Errc::configuration);

  auto same = worked_config(PrivacyLevel::Full, 1);
  same.clusters[0].af = same.clusters[0].s1;
  REQUIRE_ERRC(run_pipeline(same), Errc::configuration);

  auto far = worked_config(PrivacyLevel::Full, 1);
  far.clusters[0].af = NodeId{999u};
  REQUIRE_ERRC(run_pipeline(far), Errc::configuration);
}

TEST_CASE("worked example replays through the pipeline", "[pipeline]") {
  auto cfg = worked_config(PrivacyLevel::Full, 0);
  cfg.fixed_seeds = ppda::SeedAssignment{{{1}, {2}, {3}}};
  cfg.fixed_coeffs = std::array<ppda::RandomCoeffs, 3>{ppda::RandomCoeffs{{{10}, {20}}},
                                                       ppda::RandomCoeffs{{{30}, {40}}},
                                                       ppda::RandomCoeffs{{{50}, {60}}}};
  CHECK(run_pipeline(cfg).messages[0].hg_value == 12u);
}

TEST_CASE("source pairing", "[pipeline][pairing]") {
  SECTION("two sources with a common neighbour") {
    const auto topo = build_grid(3, 3, 1.0);
    const std::vector<NodeId> src{grid_node(3, 0, 1), grid_node(3, 1, 0)};
    const auto p = pair_sources(src, topo);
    REQUIRE(p.clusters.size() == 1);
    CHECK(p.unpaired.empty());
    // Common neighbours are (0,0), which is the sink, and (1,1).
    CHECK(p.clusters[0].af == grid_node(3, 1, 1));
  }

  SECTION("odd count leaves one unpaired") {
    const auto topo = build_grid(5, 5, 1.0);
    const std::vector<NodeId> src{grid_node(5, 1, 1), grid_node(5, 3, 1), grid_node(5, 4, 4)};
    const auto p = pair_sources(src, topo);
    REQUIRE(p.clusters.size() == 1);
    REQUIRE(p.unpaired.size() == 1);
    CHECK(p.unpaired[0] == grid_node(5, 4, 4));
    CHECK(p.clusters[0].af == grid_node(5, 2, 1));
  }

  SECTION("eight sources on a 5x5 grid") {
    const auto topo = build_grid(5, 5, 1.0);
    std::vector<NodeId> src;
    for (int x : {0, 2, 4}) src.push_back(grid_node(5, x, 4));
    for (int x : {1, 3}) src.push_back(grid_node(5, x, 2));
    for (int x : {0, 2, 4}) src.push_back(grid_node(5, x, 0));
    const auto p = pair_sources(src, topo);
    REQUIRE(p.clusters.size() == 4);
    std::set<NodeId> used;
    for (const auto& c : p.clusters) {
      REQUIRE(used.insert(c.s1).second);
      REQUIRE(used.insert(c.s2).second);
      const auto d = hop_distances(topo, c.af);
      const int between = hop_distances(topo, c.s1)[c.s2.value()];
      // Near both members: never further from either than they are apart.
      REQUIRE(d[c.s1.value()] >= 1);
      REQUIRE(d[c.s1.value()] <= between);
      REQUIRE(d[c.s2.value()] <= between);
      if (between == 2) {
        const bool has_common = std::ranges::any_of(topo.neighbors(c.s1), [&](NodeId n) {
          return topo.adjacent(n, c.s2) && n != topo.sink() && std::ranges::find(src, n) == src.end();
        });
        if (has_common) REQUIRE((topo.adjacent(c.af, c.s1) && topo.adjacent(c.af, c.s2)));
      }
    }
    // AFs are distinct from sources, sink and each other.
    std::set<NodeId> afs;
    for (const auto& c : p.clusters) {
      REQUIRE_FALSE(used.contains(c.af));
      REQUIRE(c.af != topo.sink());
      REQUIRE(afs.insert(c.af).second);
    }
    CHECK(p.unpaired.empty());
  }

  SECTION("errors") {
    const auto topo = build_grid(3, 1, 1.0);
    const std::vector<NodeId> one{NodeId{1u}};
    REQUIRE_ERRC(pair_sources(one, topo), Errc::invalid_argument);
    // Only node 0 (sink) remains besides the sources.
    const std::vector<NodeId> two{NodeId{1u}, NodeId{2u}};
    REQUIRE_ERRC(pair_sources(two, topo), Errc::no_af_candidate);
  }

  SECTION("automatic pairing inside the pipeline") {
    PipelineConfig cfg;
    cfg.grid_w = 5;
    cfg.grid_h = 5;
    cfg.level = PrivacyLevel::Full;
    cfg.sources = {grid_node(5, 1, 3), grid_node(5, 3, 3), grid_node(5, 4, 0)};
    cfg.readings = {{cfg.sources[0], 100}, {cfg.sources[1], 23}};
    const auto r = run_pipeline(cfg);
    REQUIRE(r.clusters.size() == 1);
    REQUIRE(r.unpaired.size() == 1);
    REQUIRE(r.messages.size() == 1);
    CHECK(r.messages[0].hg_value == 123u);
  }
}

TEST_CASE("pipeline runs are deterministic", "[pipeline][determinism]") {
  for (auto level : {PrivacyLevel::None, PrivacyLevel::AnonymityOnly, PrivacyLevel::PerturbationOnly, PrivacyLevel::Full}) {
    auto cfg = worked_config(level, 77);
    cfg.rounds = 3;
    const auto a = run_pipeline(cfg);
    const auto b = run_pipeline(cfg);
    REQUIRE(a == b);
    REQUIRE(to_json(a).dump() == to_json(b).dump());
    REQUIRE(messages_csv(a) == messages_csv(b));
  }
  auto c1 = worked_config(PrivacyLevel::Full, 1);
  auto c2 = worked_config(PrivacyLevel::Full, 2);
  CHECK_FALSE(run_pipeline(c1) == run_pipeline(c2));
}

TEST_CASE("message CSV layout", "[pipeline]") {
  const auto r = run_pipeline(worked_config(PrivacyLevel::PerturbationOnly, 5));
  const auto csv = messages_csv(r);
  CHECK(csv.starts_with(kMessageCsvHeader));
  CHECK(csv.substr(std::string(kMessageCsvHeader).size()) == "0,perturbation,45,44;46,10,10,10,1,12\n");
}

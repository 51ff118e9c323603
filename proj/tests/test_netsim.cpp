#include <set>

#include "ctxpriv/netsim.hpp"
#include "test_support.hpp"

using namespace ctxpriv;

namespace {

// Independent lattice oracle: number of lattice points at distance exactly 1.
std::size_t lattice_degree(int w, int h, int x, int y) {
  std::size_t d = 0;
  for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
    const int nx = x + dx, ny = y + dy;
    if (nx >= 0 && nx < w && ny >= 0 && ny < h) ++d;
  }
  return d;
}

void require_symmetric_irreflexive(const Topology& t) {
  for (std::size_t i = 0; i < t.node_count(); ++i) {
    const NodeId a{i};
    for (NodeId b : t.neighbors(a)) {
      REQUIRE(b != a);
      REQUIRE(t.adjacent(b, a));
    }
  }
}

}  // namespace

TEST_CASE("singleton grid has no edges", "[netsim]") {
  const auto t = build_grid(1, 1, 1.0);
  CHECK(t.node_count() == 1);
  CHECK(t.edge_count() == 0);
  CHECK(t.neighbors(NodeId{0u}).empty());
}

TEST_CASE("3x3 grid degrees follow lattice position", "[netsim]") {
  const auto t = build_grid(3, 3, 1.0);
  CHECK(t.degree(grid_node(3, 1, 1)) == 4);
  CHECK(t.degree(grid_node(3, 0, 0)) == 2);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) CHECK(t.degree(grid_node(3, x, y)) == lattice_degree(3, 3, x, y));
  }
}

TEST_CASE("50x50 grid interior degree is four", "[netsim]") {
  const auto t = build_grid(50, 50, 1.0);
  REQUIRE(t.node_count() == 2500);
  for (int y = 0; y < 50; ++y) {
    for (int x = 0; x < 50; ++x) {
      const auto d = t.degree(grid_node(50, x, y));
      REQUIRE(d == lattice_degree(50, 50, x, y));
      REQUIRE((d == 2 || d == 3 || d == 4));
    }
  }
  require_symmetric_irreflexive(t);
}

TEST_CASE("grid below unit range is disconnected", "[netsim]") {
  REQUIRE_ERRC(build_grid(2, 2, 0.5), Errc::disconnected);
  REQUIRE_ERRC(build_grid(0, 3, 1.0), Errc::invalid_argument);
  REQUIRE_NOTHROW(build_grid(1, 1, 0.5));
}

TEST_CASE("random geometric topology respects range and determinism", "[netsim]") {
  SimRng a(7, "rgg");
  SimRng b(7, "rgg");
  const auto t1 = build_random_geometric(100, 10.0, 2.0, a);
  const auto t2 = build_random_geometric(100, 10.0, 2.0, b);
  CHECK(t1 == t2);
  REQUIRE(t1.is_connected());

  // Brute-force all pairs against the unit-disk rule.
  for (std::size_t i = 0; i < t1.node_count(); ++i) {
    for (std::size_t j = 0; j < t1.node_count(); ++j) {
      if (i == j) continue;
      const double d2 = squared_distance(t1.positions()[i], t1.positions()[j]);
      REQUIRE(t1.adjacent(NodeId{i}, NodeId{j}) == (d2 <= 4.0));
    }
  }
  require_symmetric_irreflexive(t1);

  SimRng single(1, "one");
  CHECK(build_random_geometric(1, 10.0, 1.0, single).node_count() == 1);

  SimRng sparse(3, "sparse");
  REQUIRE_ERRC(build_random_geometric(50, 100.0, 0.5, sparse, 4), Errc::disconnected);
}

TEST_CASE("neighbors rejects invalid nodes", "[netsim]") {
  const auto t = build_grid(3, 3, 1.0);
  REQUIRE_ERRC(t.neighbors(NodeId{9u}), Errc::invalid_node);
  REQUIRE_ERRC(t.with_roles(NodeId{42u}, {}), Errc::invalid_node);
}

TEST_CASE("adjacency symmetric on sampled random fields", "[netsim][property]") {
  SimRng rng(99, "property");
  for (int trial = 0; trial < 20; ++trial) {
    SimRng field = rng.fork("trial:" + std::to_string(trial));
    const auto t = build_random_geometric(40 + trial * 5, 8.0, 2.5, field);
    require_symmetric_irreflexive(t);
  }
}

TEST_CASE("shortest path is contiguous and minimal", "[netsim]") {
  const auto t = build_grid(5, 4, 1.0);
  const auto path = shortest_path(t, grid_node(5, 0, 0), grid_node(5, 4, 3));
  REQUIRE(path.size() == 8);
  for (std::size_t i = 1; i < path.size(); ++i) REQUIRE(t.adjacent(path[i - 1], path[i]));
}

TEST_CASE("transmission log hearers mirror adjacency", "[netsim]") {
  const auto t = build_grid(3, 3, 1.0);
  TransmissionLog log(t);
  log.record(0, NodeId{4u}, 1);
  log.record(1, NodeId{0u}, 1);
  REQUIRE(std::ranges::equal(log.entries()[0].hearers, t.neighbors(NodeId{4u})));
  REQUIRE_ERRC(log.record(0, NodeId{1u}, 1), Errc::invalid_argument);
}

TEST_CASE("topology document round trip", "[netsim]") {
  const auto t = build_grid(4, 3, 1.5).with_roles(NodeId{11u}, {NodeId{0u}, NodeId{3u}});
  const auto doc = topology_to_json(t);
  const auto back = topology_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back == t);
  REQUIRE_ERRC(topology_from_json(nlohmann::json{{"positions", 3}}), Errc::parse);
}

TEST_CASE("rng streams are reproducible and label separated", "[netsim][rng]") {
  SimRng a(5, "walk"), b(5, "walk"), c(5, "trial:17");
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);

  SimRng d(5, "bounded");
  for (int i = 0; i < 1000; ++i) {
    const auto v = d.uniform_between(3, 9);
    REQUIRE((v >= 3 && v <= 9));
  }
}

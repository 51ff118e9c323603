#include <cmath>

#include "ctxpriv/metrics.hpp"
#include "test_support.hpp"

using namespace ctxpriv;
using namespace ctxpriv::metrics;
using Catch::Approx;

TEST_CASE("disclosure endpoints and hand values", "[metrics][disclosure]") {
  const auto sppda = ClusterSizeDist::sppda();
  const auto cpda = ClusterSizeDist::uniform(3, 5);
  for (auto model : {DisclosureModel::AllLinks, DisclosureModel::AnyLink}) {
    CHECK(disclosure_probability(0.0, sppda, model) == 0.0);
    CHECK(disclosure_probability(1.0, sppda, model) == 1.0);
    CHECK(disclosure_probability(0.0, cpda, model) == 0.0);
    CHECK(disclosure_probability(1.0, cpda, model) == Approx(1.0).margin(1e-15));
  }
  CHECK(disclosure_probability(0.1, sppda) == Approx(0.01).margin(1e-15));
  CHECK(disclosure_probability(0.5, sppda) == 0.25);
  // (0.25 + 0.125 + 0.0625) / 3
  CHECK(disclosure_probability(0.5, cpda) == Approx(0.4375 / 3).margin(1e-15));
  CHECK(disclosure_probability(0.5, cpda) == Approx(0.145833).margin(1e-6));
  // (0.75 + 0.875 + 0.9375) / 3
  CHECK(disclosure_probability(0.5, cpda, DisclosureModel::AnyLink) == Approx(2.5625 / 3).margin(1e-15));
  CHECK(disclosure_probability(0.1, sppda, DisclosureModel::AnyLink) == Approx(1 - 0.81).margin(1e-15));
}

TEST_CASE("three-party curve is b squared", "[metrics][disclosure]") {
  const auto grid = parse_b_grid("0:1:0.05");
  REQUIRE(grid.size() == 21);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
  for (double b : grid) REQUIRE(disclosure_probability(b, ClusterSizeDist::sppda()) == b * b);
}

TEST_CASE("disclosure is monotone and bounded for random distributions", "[metrics][disclosure][property]") {
  SimRng rng(5, "dist");
  const auto grid = parse_b_grid("0:1:0.01");
  for (int trial = 0; trial < 300; ++trial) {
    ClusterSizeDist d;
    d.p_c = 3 + static_cast<int>(rng.uniform(5));
    d.d_max = d.p_c + static_cast<int>(rng.uniform(8));
    double total = 0;
    for (int m = d.p_c; m <= d.d_max; ++m) {
      d.p.push_back(rng.uniform_real());
      total += d.p.back();
    }
    for (double& q : d.p) q /= total;
    for (auto model : {DisclosureModel::AllLinks, DisclosureModel::AnyLink}) {
      double prev = -1.0;
      for (double b : grid) {
        const double v = disclosure_probability(b, d, model);
        // Independent evaluation with std::pow.
        double oracle = 0;
        for (int m = d.p_c; m <= d.d_max; ++m) {
          const double pm = d.p[static_cast<std::size_t>(m - d.p_c)];
          oracle += pm * (model == DisclosureModel::AllLinks ? std::pow(b, m - 1) : 1 - std::pow(1 - b, m - 1));
        }
        REQUIRE(v == Approx(oracle).margin(1e-12));
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        REQUIRE(v >= prev - 1e-15);
        prev = v;
      }
    }
  }
}

TEST_CASE("distribution validation and parsing", "[metrics][disclosure]") {
  REQUIRE_ERRC(disclosure_probability(0.5, {2, 3, {0.5, 0.5}}), Errc::domain);
  REQUIRE_ERRC(disclosure_probability(0.5, {4, 3, {}}), Errc::domain);
  REQUIRE_ERRC(disclosure_probability(0.5, {3, 4, {0.5, 0.6}}), Errc::domain);
  REQUIRE_ERRC(disclosure_probability(0.5, {3, 4, {1.0}}), Errc::domain);
  REQUIRE_ERRC(disclosure_probability(1.5, ClusterSizeDist::sppda()), Errc::domain);
  REQUIRE_ERRC(disclosure_probability(-0.1, ClusterSizeDist::sppda()), Errc::domain);

  CHECK(parse_dist("sppda").p_c == 3);
  const auto u = parse_dist("uniform:3:5");
  CHECK(u.d_max == 5);
  CHECK(u.p.size() == 3);
  const auto w = parse_dist("weights:3:1,1,2");
  CHECK(w.d_max == 5);
  CHECK(w.p[2] == 0.5);
  REQUIRE_ERRC(parse_dist("uniform:2:5"), Errc::domain);
  REQUIRE_ERRC(parse_dist("uniform:x"), Errc::parse);
  REQUIRE_ERRC(parse_dist("gauss"), Errc::parse);
  REQUIRE_ERRC(parse_b_grid("0:2:0.1"), Errc::domain);
  REQUIRE_ERRC(parse_b_grid("0;1;0.1"), Errc::parse);
  CHECK(parse_model("any-link") == DisclosureModel::AnyLink);
  REQUIRE_ERRC(parse_model("some"), Errc::parse);
}

TEST_CASE("disclosure CSV", "[metrics][disclosure]") {
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const std::vector<Scheme> schemes{{"sppda", ClusterSizeDist::sppda()}};
  const std::vector<DisclosureModel> models{DisclosureModel::AllLinks};
  const auto rows = disclosure_curve(grid, schemes, models);
  CHECK(disclosure_csv(rows) ==
        "b,scheme,model,p_disclose\n"
        "0.0000,sppda,all-links,0.0000000000\n"
        "0.5000,sppda,all-links,0.2500000000\n"
        "1.0000,sppda,all-links,1.0000000000\n");
}

TEST_CASE("quantiles", "[metrics]") {
  CHECK(median({5, 1, 3}) == 3);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == 1);
  CHECK(quantile({1, 2, 3, 4}, 0.75) == 3);
  CHECK(quantile({7}, 0.0) == 7);
}

TEST_CASE("strategy and grid specs", "[metrics]") {
  for (std::string s : {"flood", "phantom:10", "phantom-directed:4", "twoway:7"}) CHECK(strategy_spec(parse_strategy(s)) == s);
  REQUIRE_ERRC(parse_strategy("phantom:"), Errc::parse);
  REQUIRE_ERRC(parse_strategy("phantom:-1"), Errc::parse);
  REQUIRE_ERRC(parse_strategy("walk:3"), Errc::parse);
  CHECK(parse_grid("30x20") == std::pair{30, 20});
  REQUIRE_ERRC(parse_grid("30"), Errc::parse);
  REQUIRE_ERRC(parse_grid("0x3"), Errc::parse);
}

TEST_CASE("one-trial campaign equals a single hunt", "[metrics][hunt]") {
  HuntCampaign c;
  c.grids = {{8, 8}};
  c.strategies = {phantom::Strategy::phantom({phantom::WalkMode::Pure, 4})};
  c.trials = 1;
  c.message_budget = 100;
  c.seed = 11;
  const auto res = montecarlo_hunt(c);
  const auto topo = campaign_topology(8, 8);
  SimRng rng(11, "trial/0");
  const auto direct = phantom::hunt(topo, c.strategies[0], topo.sink(), 100, rng);
  REQUIRE(res.trials.size() == 1);
  CHECK(res.trials[0].safety_period == direct.safety_period);
  CHECK(res.trials[0].captured == direct.captured);
  CHECK(res.trials[0].transmissions == direct.transmissions_total);
  CHECK(res.trials[0].mean_latency_hops == direct.mean_latency_hops());
  CHECK(res.cells[0].median == direct.safety_period);
}

TEST_CASE("campaign output is deterministic", "[metrics][hunt][determinism]") {
  HuntCampaign c;
  c.grids = {{6, 6}, {8, 8}};
  c.strategies = {phantom::Strategy::flood_only(), parse_strategy("phantom:5"), parse_strategy("twoway:5")};
  c.trials = 10;
  c.message_budget = 60;
  const auto a = montecarlo_hunt(c);
  const auto b = montecarlo_hunt(c);
  CHECK(trials_csv(a.trials) == trials_csv(b.trials));
  CHECK(cells_csv(a.cells) == cells_csv(b.cells));
  CHECK(a.trials.size() == 60);
  CHECK(a.cells.size() == 6);
  CHECK(trials_csv(a.trials).starts_with(kTrialCsvHeader));
  // Flooding is deterministic: the adversary walks the 10-hop diagonal back.
  CHECK(a.cells[0].median == 10);
  CHECK(a.cells[0].captured == 10);
}

TEST_CASE("benchmark harness", "[metrics][bench]") {
  REQUIRE_ERRC(bench_aggregation(std::vector<std::size_t>{3}, 10), Errc::invalid_argument);
  REQUIRE_ERRC(bench_aggregation(std::vector<std::size_t>{2}, 30), Errc::invalid_argument);
  const std::vector<std::size_t> sizes{3};
  const auto first = bench_aggregation(sizes, 30);
  const auto second = bench_aggregation(sizes, 30);
  REQUIRE(first.size() == 2);
  CHECK(first[1].scheme == "sppda");
  // Repeating the three-party measurement lands within a factor of three.
  const double ratio = first[1].median_ns / second[1].median_ns;
  CHECK(ratio > 1.0 / 3.0);
  CHECK(ratio < 3.0);
  CHECK(timing_csv(first).starts_with(kTimingCsvHeader));
}

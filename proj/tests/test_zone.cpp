#include <algorithm>
#include <cmath>
#include <vector>

#include "ctxpriv/phantom.hpp"
#include "test_support.hpp"

using namespace ctxpriv;
using namespace ctxpriv::phantom;

namespace {

// Pascal's triangle, independent of the multiplicative formula in binom().
// Columns past `max_k` are dropped and sums saturate instead of wrapping.
std::vector<std::vector<std::uint64_t>> pascal(int rows, int max_k = 1 << 30) {
  std::vector<std::vector<std::uint64_t>> c(rows + 1);
  for (int n = 0; n <= rows; ++n) {
    const int width = std::min(n, max_k) + 1;
    c[n].assign(width, 1);
    for (int k = 1; k < width; ++k) {
      if (k == n) break;
      const std::uint64_t a = c[n - 1][k - 1];
      const std::uint64_t b = c[n - 1][k];
      c[n][k] = a > UINT64_MAX - b ? UINT64_MAX : a + b;
    }
  }
  return c;
}

}  // namespace

TEST_CASE("binomial coefficients", "[zone]") {
  CHECK(binom(10, 3) == 10 * 9 * 8 / 6);
  CHECK(binom(10, 3) == 120);
  for (int n = 0; n < 20; ++n) {
    CHECK(binom(n, 0) == 1);
    CHECK(binom(n, n) == 1);
  }
  const auto c = pascal(60);
  for (int n = 0; n <= 60; ++n) {
    for (int k = 0; k <= n; ++k) REQUIRE(binom(n, k) == c[n][k]);
  }
  REQUIRE_ERRC(binom(3, 4), Errc::domain);
  REQUIRE_ERRC(binom(-1, 0), Errc::domain);
  REQUIRE_ERRC(binom(200, 100), Errc::overflow);
  CHECK(binom(67, 33) == 14226520737620288370ULL);
}

TEST_CASE("zone planner instances", "[zone]") {
  const auto h3 = min_zone_nodes(0.01, 3);
  CHECK(h3.min_nodes == 10);
  CHECK(h3.broadcast_count == 120);

  // C(8,4) = 70 does not exceed 100, so eight nodes are not enough for H = 4.
  const auto h4 = min_zone_nodes(0.01, 4);
  CHECK(binom(8, 4) == 70);
  CHECK(h4.min_nodes == 9);
  CHECK(h4.broadcast_count == 126);

  for (int h = 1; h <= 8; ++h) CHECK(min_zone_nodes(1.0, h).min_nodes == h + 1);

  REQUIRE_ERRC(min_zone_nodes(0.0, 3), Errc::domain);
  REQUIRE_ERRC(min_zone_nodes(1.5, 3), Errc::domain);
  REQUIRE_ERRC(min_zone_nodes(0.1, 0), Errc::domain);
  REQUIRE_ERRC(min_zone_nodes(1e-300, 40), Errc::overflow);
}

TEST_CASE("zone planner agrees with a brute-force scan", "[zone][property]") {
  const auto c = pascal(1200, 8);
  for (double pr : {1e-1, 1e-2, 1e-3}) {
    for (int h = 1; h <= 8; ++h) {
      int scan = h;
      while (!(static_cast<double>(c[scan][h]) > 1.0 / pr)) ++scan;
      const auto plan = min_zone_nodes(pr, h);
      REQUIRE(plan.min_nodes == scan);
      REQUIRE(static_cast<double>(binom(plan.min_nodes, h)) > 1.0 / pr);
      REQUIRE(static_cast<double>(plan.min_nodes - 1 >= h ? binom(plan.min_nodes - 1, h) : 0) <= 1.0 / pr);
    }
  }
}

TEST_CASE("trace-back probability", "[zone]") {
  CHECK(traceback_probability(10, 3) == Catch::Approx(1.0 / 120.0));
  CHECK(traceback_probability(7, 7) == 1.0);
  for (int h = 1; h <= 5; ++h) {
    for (int n = 2 * h; n < 40; ++n) REQUIRE(traceback_probability(n + 1, h) <= traceback_probability(n, h));
  }
}

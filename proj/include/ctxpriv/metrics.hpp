#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ctxpriv/error.hpp"
#include "ctxpriv/field.hpp"
#include "ctxpriv/keymgmt.hpp"
#include "ctxpriv/netsim.hpp"
#include "ctxpriv/phantom.hpp"
#include "ctxpriv/ppda.hpp"
#include "ctxpriv/rng.hpp"

namespace ctxpriv::metrics {

// ---- formatting -------------------------------------------------------------

inline std::string fmt_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// ---- disclosure model -------------------------------------------------------

struct ClusterSizeDist {
  int p_c = 3;
  int d_max = 3;
  std::vector<double> p;  // p[m - p_c] = P(k = m)

  static ClusterSizeDist degenerate(int k) { return {k, k, {1.0}}; }
  static ClusterSizeDist sppda() { return degenerate(3); }
  static ClusterSizeDist uniform(int lo, int hi) {
    if (hi < lo) throw Error(Errc::domain, "cluster size range is empty");
    return {lo, hi, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), 1.0 / (hi - lo + 1))};
  }

  void validate() const {
    if (p_c < 3) throw Error(Errc::domain, "minimum cluster size must be >= 3");
    if (d_max < p_c) throw Error(Errc::domain, "maximum cluster size below minimum");
    if (p.size() != static_cast<std::size_t>(d_max - p_c + 1)) {
      throw Error(Errc::domain, "one probability per cluster size required");
    }
    double sum = 0.0;
    for (double q : p) {
      if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::domain, "cluster size probability outside [0,1]");
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::domain, "cluster size probabilities must sum to 1");
  }
};

// "sppda", "uniform:LO:HI", or "weights:P_C:w1,w2,..." (weights normalised).
inline ClusterSizeDist parse_dist(const std::string& spec) {
  auto fail = [&] { return Error(Errc::parse, "bad distribution spec '" + spec + "'"); };
  try {
    if (spec == "sppda") return ClusterSizeDist::sppda();
    if (spec.starts_with("uniform:")) {
      const auto rest = spec.substr(8);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) throw fail();
      auto d = ClusterSizeDist::uniform(std::stoi(rest.substr(0, colon)), std::stoi(rest.substr(colon + 1)));
      d.validate();
      return d;
    }
    if (spec.starts_with("weights:")) {
      const auto rest = spec.substr(8);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) throw fail();
      ClusterSizeDist d;
      d.p_c = std::stoi(rest.substr(0, colon));
      std::string list = rest.substr(colon + 1);
      double total = 0.0;
      for (std::size_t pos = 0; pos <= list.size();) {
        const auto comma = std::min(list.find(',', pos), list.size());
        d.p.push_back(std::stod(list.substr(pos, comma - pos)));
        total += d.p.back();
        pos = comma + 1;
      }
      if (!(total > 0.0)) throw Error(Errc::domain, "weights must have a positive sum");
      for (double& q : d.p) q /= total;
      d.d_max = d.p_c + static_cast<int>(d.p.size()) - 1;
      d.validate();
      return d;
    }
  } catch (const std::invalid_argument&) {
    throw fail();
  } catch (const std::out_of_range&) {
    throw fail();
  }
  throw fail();
}

// AllLinks: every one of the m-1 peer links must break. AnyLink: one broken
// link is enough.
enum class DisclosureModel { AllLinks, AnyLink };

inline std::string to_string(DisclosureModel m) { return m == DisclosureModel::AllLinks ? "all-links" : "any-link"; }

inline DisclosureModel parse_model(std::string_view s) {
  if (s == "all-links") return DisclosureModel::AllLinks;
  if (s == "any-link") return DisclosureModel::AnyLink;
  throw Error(Errc::parse, "unknown disclosure model '" + std::string(s) + "'");
}

inline double ipow(double base, int exp) {
  double r = 1.0;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

inline double disclosure_probability(double b, const ClusterSizeDist& dist,
                                     DisclosureModel model = DisclosureModel::AllLinks) {
  if (!(b >= 0.0 && b <= 1.0)) throw Error(Errc::domain, "b must lie in [0,1]");
  dist.validate();
  double acc = 0.0;
  for (int m = dist.p_c; m <= dist.d_max; ++m) {
    const double pm = dist.p[static_cast<std::size_t>(m - dist.p_c)];
    const double term = model == DisclosureModel::AllLinks ? ipow(b, m - 1) : 1.0 - ipow(1.0 - b, m - 1);
    acc += pm * term;
  }
  return std::clamp(acc, 0.0, 1.0);
}

struct Scheme {
  std::string name;  // "sppda" or "cpda"
  ClusterSizeDist dist;
};

struct DisclosurePoint {
  double b = 0.0;
  std::string scheme;
  DisclosureModel model = DisclosureModel::AllLinks;
  double p_disclose = 0.0;
};

// "lo:hi:step", inclusive of both ends.
inline std::vector<double> parse_b_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &tail) != 3) {
    throw Error(Errc::parse, "b grid must be lo:hi:step");
  }
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi && step > 0.0)) throw Error(Errc::domain, "b grid must lie in [0,1]");
  const auto steps = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> grid;
  for (long i = 0; i <= steps; ++i) grid.push_back(std::min(hi, lo + static_cast<double>(i) * step));
  if (hi - grid.back() > 1e-12) grid.push_back(hi);
  return grid;
}

inline std::vector<DisclosurePoint> disclosure_curve(std::span<const double> b_grid, std::span<const Scheme> schemes,
                                                     std::span<const DisclosureModel> models) {
  std::vector<DisclosurePoint> rows;
  for (const auto& s : schemes) {
    s.dist.validate();
    for (auto model : models) {
      for (double b : b_grid) rows.push_back({b, s.name, model, disclosure_probability(b, s.dist, model)});
    }
  }
  return rows;
}

inline constexpr const char* kDisclosureCsvHeader = "b,scheme,model,p_disclose\n";

inline std::string disclosure_csv(std::span<const DisclosurePoint> rows) {
  std::string out = kDisclosureCsvHeader;
  for (const auto& r : rows) {
    out += fmt_double(r.b, 4) + ',' + r.scheme + ',' + to_string(r.model) + ',' + fmt_double(r.p_disclose, 10) + '\n';
  }
  return out;
}

// ---- timing ----------------------------------------------------------------

struct TimingRow {
  std::string scheme;
  std::size_t n = 0;  // cluster size, or pair count for pipeline rows
  double median_ns = 0.0;
  int repetitions = 0;
};

template <class F>
double median_ns(int repetitions, int warmup, F&& body) {
  if (repetitions < 1) throw Error(Errc::invalid_argument, "repetitions must be >= 1");
  for (int i = 0; i < warmup; ++i) body(i);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body(warmup + i);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  return samples.size() % 2 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2.0;
}

inline constexpr int kMinRepetitions = 30;

// Per-aggregation cost of the n-party baseline for each size, plus one row for
// the three-party round. Inputs are drawn before the clock starts.
inline std::vector<TimingRow> bench_aggregation(std::span<const std::size_t> sizes, int repetitions, int warmup = 5) {
  if (repetitions < kMinRepetitions) throw Error(Errc::invalid_argument, "at least 30 repetitions required");
  const Field field;
  std::vector<TimingRow> rows;
  for (std::size_t n : sizes) {
    if (n < 3 || n > 64) throw Error(Errc::invalid_argument, "cluster sizes must lie in [3,64]");
    SimRng rng(0, "bench/cpda/" + std::to_string(n));
    std::vector<std::vector<FieldElem>> inputs;
    std::vector<ppda::SeedAssignment> seeds;
    for (int i = 0; i < warmup + repetitions; ++i) {
      std::vector<FieldElem> v;
      for (std::size_t k = 0; k < n; ++k) v.push_back({rng.uniform(field.modulus())});
      inputs.push_back(std::move(v));
      seeds.push_back(ppda::draw_seeds(field, n, rng));
    }
    volatile std::uint64_t sink = 0;
    const double ns = median_ns(repetitions, warmup, [&](int i) {
      const auto idx = static_cast<std::size_t>(i);
      sink = sink + ppda::run_cpda(field, inputs[idx], seeds[idx], rng).value;
    });
    rows.push_back({"cpda", n, ns, repetitions});
  }

  SimRng rng(0, "bench/sppda");
  const auto pool = keymgmt::generate_pool(256, 128, rng);
  ppda::SppdaOptions opt;
  opt.pool = &pool;
  volatile std::uint64_t sink = 0;
  const double ns = median_ns(repetitions, warmup, [&](int) {
    sink = sink + ppda::run_sppda({rng.uniform(field.modulus())}, {1}, {2}, rng, opt).result.pair_sum.value;
  });
  rows.push_back({"sppda", 3, ns, repetitions});
  return rows;
}

// Cost of aggregating `pairs` independent source pairs, each at its own AF,
// sharing one predistributed pool generated outside the timed region. Each
// sample times `batch` back-to-back workloads and reports the per-workload
// cost, so short workloads are not swamped by timer and scheduler jitter.
inline std::vector<TimingRow> bench_pipeline_pairs(std::span<const std::size_t> pair_counts, int repetitions,
                                                   int warmup = 5, int batch = 8) {
  if (batch < 1) throw Error(Errc::invalid_argument, "batch must be >= 1");
  if (repetitions < kMinRepetitions) throw Error(Errc::invalid_argument, "at least 30 repetitions required");
  SimRng rng(0, "bench/pairs");
  const auto pool = keymgmt::generate_pool(256, 128, rng);
  std::vector<TimingRow> rows;
  for (std::size_t pairs : pair_counts) {
    if (pairs < 1) throw Error(Errc::invalid_argument, "pair count must be >= 1");
    volatile std::uint64_t sink = 0;
    const double ns = median_ns(repetitions, warmup, [&](int) {
      for (int b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < pairs; ++c) {
          ppda::SppdaOptions opt;
          opt.pool = &pool;
          opt.af = NodeId{static_cast<std::uint32_t>(3 * c)};
          opt.s1 = NodeId{static_cast<std::uint32_t>(3 * c + 1)};
          opt.s2 = NodeId{static_cast<std::uint32_t>(3 * c + 2)};
          sink = sink + ppda::run_sppda({c}, {c + 1}, {0}, rng, opt).result.pair_sum.value;
        }
      }
    });
    rows.push_back({"sppda-pairs", pairs, ns / batch, repetitions});
  }
  return rows;
}

inline constexpr const char* kTimingCsvHeader = "scheme,n,median_ns,repetitions\n";

inline std::string timing_csv(std::span<const TimingRow> rows) {
  std::string out = kTimingCsvHeader;
  for (const auto& r : rows) {
    out += r.scheme + ',' + std::to_string(r.n) + ',' + fmt_double(r.median_ns, 0) + ',' + std::to_string(r.repetitions) + '\n';
  }
  return out;
}

// ---- hunt campaigns --------------------------------------------------------

// "flood", "phantom:H", "phantom-directed:H" or "twoway:L".
inline phantom::Strategy parse_strategy(const std::string& spec) {
  auto number = [&](std::size_t from) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(spec.substr(from), &used);
      if (used != spec.size() - from || v < 0) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw Error(Errc::parse, "bad strategy '" + spec + "'");
    }
  };
  if (spec == "flood") return phantom::Strategy::flood_only();
  if (spec.starts_with("phantom:")) return phantom::Strategy::phantom({phantom::WalkMode::Pure, number(8)});
  if (spec.starts_with("phantom-directed:")) return phantom::Strategy::phantom({phantom::WalkMode::Directed, number(17)});
  if (spec.starts_with("twoway:")) return phantom::Strategy::two_way(number(7));
  throw Error(Errc::parse, "bad strategy '" + spec + "'");
}

inline std::string strategy_spec(const phantom::Strategy& s) {
  switch (s.kind) {
    case phantom::Strategy::Kind::FloodOnly: return "flood";
    case phantom::Strategy::Kind::Phantom:
      return std::string(s.walk.mode == phantom::WalkMode::Pure ? "phantom:" : "phantom-directed:") +
             std::to_string(s.walk.hops);
    case phantom::Strategy::Kind::TwoWay: return "twoway:" + std::to_string(s.receptor_length);
  }
  return "?";
}

// "WxH".
inline std::pair<int, int> parse_grid(const std::string& spec) {
  int w = 0, h = 0;
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%dx%d%c", &w, &h, &tail) != 2 || w < 1 || h < 1) {
    throw Error(Errc::parse, "grid must be WxH");
  }
  return {w, h};
}

// Source in one corner, sink and adversary start in the opposite one.
struct HuntCampaign {
  std::vector<std::pair<int, int>> grids;
  std::vector<phantom::Strategy> strategies;
  int trials = 100;
  int message_budget = 500;
  std::uint64_t seed = 1;
};

struct TrialRow {
  int trial = 0;
  std::string strategy;
  int walk_hops = 0;
  int grid_w = 0;
  int grid_h = 0;
  int safety_period = 0;
  bool captured = false;
  std::size_t transmissions = 0;
  double mean_latency_hops = 0.0;
};

struct CellSummary {
  std::string strategy;
  int walk_hops = 0;
  int grid_w = 0;
  int grid_h = 0;
  int trials = 0;
  int captured = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct CampaignResult {
  std::vector<TrialRow> trials;
  std::vector<CellSummary> cells;
};

// Nearest-rank quantile of sorted data.
inline double quantile(std::vector<int> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - (q > 0.0 ? 1 : 0);
  return v[std::min(idx, v.size() - 1)];
}

inline double median(std::vector<int> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

inline phantom::HuntReport campaign_trial(const Topology& topo, const phantom::Strategy& s, int budget,
                                          std::uint64_t seed, int trial) {
  SimRng rng(seed, "trial/" + std::to_string(trial));
  return phantom::hunt(topo, s, topo.sink(), budget, rng);
}

inline Topology campaign_topology(int w, int h) {
  return build_grid(w, h, 1.0).with_roles(grid_node(w, w - 1, h - 1), {grid_node(w, 0, 0)});
}

inline CampaignResult montecarlo_hunt(const HuntCampaign& c) {
  if (c.trials < 1) throw Error(Errc::invalid_argument, "trials must be >= 1");
  CampaignResult out;
  for (const auto& [w, h] : c.grids) {
    if (w * h < 2) throw Error(Errc::invalid_argument, "campaign grid needs two nodes");
    const Topology topo = campaign_topology(w, h);
    for (const auto& s : c.strategies) {
      std::vector<int> periods;
      int captured = 0;
      for (int t = 0; t < c.trials; ++t) {
        const auto r = campaign_trial(topo, s, c.message_budget, c.seed, t);
        out.trials.push_back({t, s.name(), s.walk_hops(), w, h, r.safety_period, r.captured, r.transmissions_total,
                              r.mean_latency_hops()});
        periods.push_back(r.safety_period);
        captured += r.captured ? 1 : 0;
      }
      out.cells.push_back({s.name(), s.walk_hops(), w, h, c.trials, captured, median(periods), quantile(periods, 0.25),
                           quantile(periods, 0.75)});
    }
  }
  return out;
}

inline constexpr const char* kTrialCsvHeader =
    "trial,strategy,walk_hops,grid_w,grid_h,safety_period,captured,transmissions,mean_latency_hops\n";

inline std::string trials_csv(std::span<const TrialRow> rows) {
  std::string out = kTrialCsvHeader;
  for (const auto& r : rows) {
    out += std::to_string(r.trial) + ',' + r.strategy + ',' + std::to_string(r.walk_hops) + ',' + std::to_string(r.grid_w) +
           ',' + std::to_string(r.grid_h) + ',' + std::to_string(r.safety_period) + ',' + (r.captured ? "1" : "0") + ',' +
           std::to_string(r.transmissions) + ',' + fmt_double(r.mean_latency_hops, 4) + '\n';
  }
  return out;
}

inline constexpr const char* kCellCsvHeader =
    "strategy,walk_hops,grid_w,grid_h,trials,captured,median_safety,q25_safety,q75_safety\n";

inline std::string cells_csv(std::span<const CellSummary> rows) {
  std::string out = kCellCsvHeader;
  for (const auto& r : rows) {
    out += r.strategy + ',' + std::to_string(r.walk_hops) + ',' + std::to_string(r.grid_w) + ',' + std::to_string(r.grid_h) +
           ',' + std::to_string(r.trials) + ',' + std::to_string(r.captured) + ',' + fmt_double(r.median, 1) + ',' +
           fmt_double(r.q25, 1) + ',' + fmt_double(r.q75, 1) + '\n';
  }
  return out;
}

}  // namespace ctxpriv::metrics

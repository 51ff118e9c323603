#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <set>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxpriv/error.hpp"
#include "ctxpriv/metrics.hpp"
#include "ctxpriv/netsim.hpp"
#include "ctxpriv/output.hpp"
#include "ctxpriv/phantom.hpp"
#include "ctxpriv/pipeline.hpp"
#include "ctxpriv/ppda.hpp"

// Scenario documents: a JSON object with a "scenarios" array. Each entry has
// a "name", a "kind" (plan-zone, aggregate, hunt, pipeline, disclosure), the
// kind's parameters and an optional "expect" object checked after the run.
namespace ctxpriv::scenario {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& why) {
  throw Error(Errc::validation, field + ": " + why);
}

inline const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline bool is_uint(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline std::string path(const std::string& base, const char* key) { return base + "." + key; }

inline std::uint64_t get_u64(const json& obj, const std::string& base, const char* key,
                             std::optional<std::uint64_t> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    invalid(path(base, key), "required");
  }
  if (!is_uint(*v)) {
    invalid(path(base, key), "must be a non-negative integer");
  }
  return v->get<std::uint64_t>();
}

inline int get_int(const json& obj, const std::string& base, const char* key, std::optional<int> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    invalid(path(base, key), "required");
  }
  if (!v->is_number_integer()) invalid(path(base, key), "must be an integer");
  const auto x = v->get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) invalid(path(base, key), "out of range");
  return static_cast<int>(x);
}

inline double get_double(const json& obj, const std::string& base, const char* key,
                         std::optional<double> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    invalid(path(base, key), "required");
  }
  if (!v->is_number()) invalid(path(base, key), "must be a number");
  return v->get<double>();
}

inline std::string get_string(const json& obj, const std::string& base, const char* key,
                              std::optional<std::string> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    invalid(path(base, key), "required");
  }
  if (!v->is_string()) invalid(path(base, key), "must be a string");
  return v->get<std::string>();
}

// Re-raises library errors as validation errors naming `field`.
template <class F>
auto guarded(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::validation) throw;
    invalid(field, e.what());
  }
}

inline NodeId get_node(const json& obj, const std::string& base, const char* key) {
  const auto v = get_u64(obj, base, key);
  if (v > std::numeric_limits<std::uint32_t>::max()) invalid(path(base, key), "node id out of range");
  return NodeId{static_cast<std::uint32_t>(v)};
}

inline ppda::SeedAssignment get_seeds(const json& obj, const std::string& base) {
  const json* v = find(obj, "seeds");
  ppda::SeedAssignment s;
  if (!v->is_array() || v->size() != 3) invalid(path(base, "seeds"), "must be an array of three integers");
  for (const auto& e : *v) {
    if (!is_uint(e)) invalid(path(base, "seeds"), "must be an array of three integers");
    s.seeds.push_back({e.get<std::uint64_t>()});
  }
  return s;
}

inline std::array<ppda::RandomCoeffs, 3> get_coeffs(const json& obj, const std::string& base) {
  const json* v = find(obj, "coeffs");
  const std::string field = path(base, "coeffs");
  if (!v->is_array() || v->size() != 3) invalid(field, "must hold three [r1, r2] pairs");
  std::array<ppda::RandomCoeffs, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& pair = (*v)[i];
    if (!pair.is_array() || pair.size() != 2 || !is_uint(pair[0]) || !is_uint(pair[1])) {
      invalid(field, "must hold three [r1, r2] pairs");
    }
    out[i].r = {{pair[0].get<std::uint64_t>()}, {pair[1].get<std::uint64_t>()}};
  }
  return out;
}

}  // namespace detail

inline pipeline::PipelineConfig parse_pipeline_config(const json& s, const std::string& base) {
  using namespace detail;
  pipeline::PipelineConfig cfg;
  const auto [w, h] = guarded(path(base, "grid"), [&] { return metrics::parse_grid(get_string(s, base, "grid", "10x10")); });
  cfg.grid_w = w;
  cfg.grid_h = h;
  cfg.radio_range = get_double(s, base, "radio_range", 1.0);
  if (!(cfg.radio_range > 0.0)) invalid(path(base, "radio_range"), "must be positive");
  cfg.sink = find(s, "sink") ? get_node(s, base, "sink") : NodeId{0u};
  if (cfg.sink.value() >= static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h)) {
    invalid(path(base, "sink"), "outside the grid");
  }
  cfg.level = guarded(path(base, "level"), [&] { return pipeline::parse_level(get_string(s, base, "level")); });
  cfg.anonymity =
      guarded(path(base, "anonymity"), [&] { return metrics::parse_strategy(get_string(s, base, "anonymity", "phantom:10")); });
  cfg.modulus = get_u64(s, base, "modulus", kDefaultModulus);
  guarded(path(base, "modulus"), [&] { return Field(cfg.modulus).modulus(); });
  cfg.pool_size = get_u64(s, base, "pool_size", 256);
  cfg.af_bank_size = get_u64(s, base, "af_bank_size", 128);
  if (cfg.af_bank_size < 1 || cfg.af_bank_size >= cfg.pool_size) invalid(path(base, "af_bank_size"), "must lie in [1, pool_size)");
  cfg.rounds = get_int(s, base, "rounds", 1);
  if (cfg.rounds < 1) invalid(path(base, "rounds"), "must be >= 1");
  cfg.seed = get_u64(s, base, "seed", 0);

  if (const json* c = find(s, "clusters")) {
    if (!c->is_array()) invalid(path(base, "clusters"), "must be an array");
    for (std::size_t i = 0; i < c->size(); ++i) {
      const std::string cb = path(base, "clusters") + "[" + std::to_string(i) + "]";
      cfg.clusters.push_back({get_node((*c)[i], cb, "s1"), get_node((*c)[i], cb, "s2"), get_node((*c)[i], cb, "af")});
    }
  }
  if (const json* src = find(s, "sources")) {
    if (!src->is_array()) invalid(path(base, "sources"), "must be an array");
    for (const auto& e : *src) {
      if (!is_uint(e) || e.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        invalid(path(base, "sources"), "must hold node ids");
      }
      cfg.sources.push_back(NodeId{e.get<std::uint32_t>()});
    }
  }
  if (const json* r = find(s, "readings")) {
    if (!r->is_object()) invalid(path(base, "readings"), "must map node id to value");
    for (const auto& [k, v] : r->items()) {
      std::uint32_t id = 0;
      try {
        std::size_t used = 0;
        id = static_cast<std::uint32_t>(std::stoul(k, &used));
        if (used != k.size()) throw std::invalid_argument(k);
      } catch (const std::exception&) {
        invalid(path(base, "readings"), "key '" + k + "' is not a node id");
      }
      if (!is_uint(v)) invalid(path(base, "readings") + "." + k, "must be a non-negative integer");
      cfg.readings[NodeId{id}] = v.get<std::uint64_t>();
    }
  }
  if (find(s, "seeds")) cfg.fixed_seeds = get_seeds(s, base);
  if (find(s, "coeffs")) cfg.fixed_coeffs = get_coeffs(s, base);
  return cfg;
}

struct ScenarioResult {
  std::string name;
  std::string kind;
  bool passed = true;
  std::vector<std::string> failures;
  json result;
  std::vector<output::Artifact> artifacts;
};

namespace detail {

inline void expect_eq(ScenarioResult& r, const json& expect, const char* key, const json& actual) {
  const json* want = find(expect, key);
  if (!want) return;
  if (*want != actual) {
    r.passed = false;
    r.failures.push_back(std::string(key) + ": expected " + want->dump() + ", got " + actual.dump());
  }
}

inline void expect_min(ScenarioResult& r, const json& expect, const char* key, double actual) {
  const json* want = find(expect, key);
  if (!want) return;
  if (!(actual >= want->get<double>())) {
    r.passed = false;
    r.failures.push_back(std::string(key) + ": expected >= " + want->dump() + ", got " + metrics::fmt_double(actual, 3));
  }
}

}  // namespace detail

// Validates and prepares one scenario; the returned callable performs the run.
inline std::function<ScenarioResult()> prepare(const json& s, const std::string& base) {
  using namespace detail;
  if (!s.is_object()) invalid(base, "must be an object");
  const std::string name = get_string(s, base, "name");
  if (!std::regex_match(name, std::regex("[A-Za-z0-9_.-]+"))) invalid(path(base, "name"), "use letters, digits, '.', '_' or '-'");
  const std::string kind = get_string(s, base, "kind");
  json expect = json::object();
  if (const json* e = find(s, "expect")) {
    if (!e->is_object()) invalid(path(base, "expect"), "must be an object");
    expect = *e;
  }

  if (kind == "plan-zone") {
    const double pr = get_double(s, base, "pr");
    if (!(pr > 0.0 && pr <= 1.0)) invalid(path(base, "pr"), "must lie in (0, 1]");
    const int hops = get_int(s, base, "hops");
    if (hops < 1) invalid(path(base, "hops"), "must be >= 1");
    return [=] {
      ScenarioResult r;
      r.name = name;
      r.kind = kind;
      const auto plan = phantom::min_zone_nodes(pr, hops);
      r.result = {{"min_nodes", plan.min_nodes}, {"broadcast_count", plan.broadcast_count}};
      r.artifacts.push_back({name + ".csv", "pr,hops,min_nodes,broadcast_count\n" + metrics::fmt_double(pr, 6) + ',' +
                                                std::to_string(hops) + ',' + std::to_string(plan.min_nodes) + ',' +
                                                std::to_string(plan.broadcast_count) + '\n'});
      expect_eq(r, expect, "min_nodes", plan.min_nodes);
      return r;
    };
  }

  if (kind == "aggregate") {
    const std::uint64_t x = get_u64(s, base, "x"), y = get_u64(s, base, "y"), z = get_u64(s, base, "z", 0);
    const std::uint64_t seed = get_u64(s, base, "seed", 0);
    ppda::SppdaOptions opt;
    opt.modulus = get_u64(s, base, "modulus", kDefaultModulus);
    guarded(path(base, "modulus"), [&] { return Field(opt.modulus).modulus(); });
    if (find(s, "seeds")) {
      opt.fixed_seeds = get_seeds(s, base);
      guarded(path(base, "seeds"), [&] {
        ppda::validate_seeds(Field(opt.modulus), *opt.fixed_seeds);
        return 0;
      });
    }
    if (find(s, "coeffs")) opt.fixed_coeffs = get_coeffs(s, base);
    return [=] {
      ScenarioResult r;
      r.name = name;
      r.kind = kind;
      SimRng rng(seed, "aggregate");
      const auto round = ppda::run_sppda({x}, {y}, {z}, rng, opt);
      json f = json::array(), shares = json::array();
      for (const auto& a : round.aggregates) f.push_back(a.f.value);
      for (const auto& p : round.producers) {
        json row = json::array();
        for (const auto& sh : p.shares) row.push_back(sh.value.value);
        shares.push_back(row);
      }
      r.result = {{"total", round.result.total.value}, {"pair_sum", round.result.pair_sum.value}, {"f", f}, {"shares", shares}};
      r.artifacts.push_back({name + ".csv", "total,pair_sum\n" + std::to_string(round.result.total.value) + ',' +
                                                std::to_string(round.result.pair_sum.value) + '\n'});
      expect_eq(r, expect, "pair_sum", round.result.pair_sum.value);
      expect_eq(r, expect, "total", round.result.total.value);
      expect_eq(r, expect, "f", f);
      expect_eq(r, expect, "shares", shares);
      return r;
    };
  }

  if (kind == "hunt") {
    metrics::HuntCampaign c;
    c.grids.push_back(guarded(path(base, "grid"), [&] { return metrics::parse_grid(get_string(s, base, "grid")); }));
    const json* strategies = find(s, "strategies");
    if (!strategies || !strategies->is_array() || strategies->empty()) invalid(path(base, "strategies"), "must be a non-empty array");
    for (const auto& e : *strategies) {
      if (!e.is_string()) invalid(path(base, "strategies"), "must hold strategy strings");
      c.strategies.push_back(guarded(path(base, "strategies"), [&] { return metrics::parse_strategy(e.get<std::string>()); }));
    }
    c.trials = get_int(s, base, "trials", 100);
    if (c.trials < 1) invalid(path(base, "trials"), "must be >= 1");
    c.message_budget = get_int(s, base, "budget", 500);
    if (c.message_budget < 1) invalid(path(base, "budget"), "must be >= 1");
    c.seed = get_u64(s, base, "seed", 1);
    return [=] {
      ScenarioResult r;
      r.name = name;
      r.kind = kind;
      const auto res = metrics::montecarlo_hunt(c);
      json medians = json::object();
      for (const auto& cell : res.cells) medians[metrics::strategy_spec(c.strategies[&cell - res.cells.data()])] = cell.median;
      r.result = {{"median_safety", medians}};
      r.artifacts.push_back({name + ".trials.csv", metrics::trials_csv(res.trials)});
      r.artifacts.push_back({name + ".csv", metrics::cells_csv(res.cells)});
      for (const char* key : {"median_safety", "median_safety_min"}) {
        const json* m = find(expect, key);
        if (!m) continue;
        for (const auto& [k, v] : m->items()) {
          if (!medians.contains(k)) {
            r.passed = false;
            r.failures.push_back(std::string(key) + ": no strategy '" + k + "' in this scenario");
          } else if (std::string_view(key) == "median_safety") {
            expect_eq(r, json{{k, v}}, k.c_str(), medians[k]);
          } else {
            expect_min(r, json{{k, v}}, k.c_str(), medians[k].get<double>());
          }
        }
      }
      return r;
    };
  }

  if (kind == "pipeline") {
    const auto cfg = parse_pipeline_config(s, base);
    guarded(base, [&] { return pipeline::make_topology(cfg).node_count(); });
    return [=] {
      ScenarioResult r;
      r.name = name;
      r.kind = kind;
      const auto report = pipeline::run_pipeline(cfg);
      json hg = json::array();
      for (const auto& m : report.messages) hg.push_back(m.hg_value ? json(*m.hg_value) : json(nullptr));
      r.result = {{"hg_values", hg}, {"af_holds_ss_key", report.af_holds_ss_key}, {"messages", report.messages.size()}};
      r.artifacts.push_back({name + ".csv", pipeline::messages_csv(report)});
      r.artifacts.push_back({name + ".report.json", pipeline::to_json(report).dump(2) + "\n"});
      expect_eq(r, expect, "hg_values", hg);
      expect_eq(r, expect, "af_holds_ss_key", report.af_holds_ss_key);
      return r;
    };
  }

  if (kind == "disclosure") {
    const auto grid = guarded(path(base, "b_grid"), [&] { return metrics::parse_b_grid(get_string(s, base, "b_grid", "0:1:0.05")); });
    std::vector<metrics::Scheme> schemes;
    const json* dists = find(s, "dists");
    if (!dists || !dists->is_object() || dists->empty()) invalid(path(base, "dists"), "must map scheme name to distribution spec");
    for (const auto& [k, v] : dists->items()) {
      if (!v.is_string()) invalid(path(base, "dists") + "." + k, "must be a distribution spec");
      schemes.push_back({k, guarded(path(base, "dists") + "." + k, [&] { return metrics::parse_dist(v.get<std::string>()); })});
    }
    std::vector<metrics::DisclosureModel> models{metrics::DisclosureModel::AllLinks, metrics::DisclosureModel::AnyLink};
    if (const json* m = find(s, "models")) {
      models.clear();
      if (!m->is_array()) invalid(path(base, "models"), "must be an array");
      for (const auto& e : *m) {
        if (!e.is_string()) invalid(path(base, "models"), "must hold model names");
        models.push_back(guarded(path(base, "models"), [&] { return metrics::parse_model(e.get<std::string>()); }));
      }
    }
    return [=] {
      ScenarioResult r;
      r.name = name;
      r.kind = kind;
      const auto rows = metrics::disclosure_curve(grid, schemes, models);
      r.result = {{"rows", rows.size()}};
      r.artifacts.push_back({name + ".csv", metrics::disclosure_csv(rows)});
      expect_eq(r, expect, "rows", rows.size());
      return r;
    };
  }

  invalid(path(base, "kind"), "unknown kind '" + kind + "'");
}

// Parses and validates the whole document before running anything, so a bad
// entry never leaves partial outputs behind.
inline std::vector<std::function<ScenarioResult()>> load(const json& doc) {
  if (!doc.is_object()) detail::invalid("$", "document must be an object");
  const json* list = detail::find(doc, "scenarios");
  if (!list || !list->is_array()) detail::invalid("$.scenarios", "must be an array");
  std::vector<std::function<ScenarioResult()>> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const std::string base = "$.scenarios[" + std::to_string(i) + "]";
    out.push_back(prepare((*list)[i], base));
    const std::string name = (*list)[i]["name"].get<std::string>();
    if (!names.insert(name).second) detail::invalid(base + ".name", "duplicate scenario name '" + name + "'");
  }
  return out;
}

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, e.what());
  }
}

inline json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::parse, "cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

struct RunSummary {
  std::vector<ScenarioResult> results;
  bool all_passed() const {
    return std::ranges::all_of(results, [](const ScenarioResult& r) { return r.passed; });
  }
};

inline RunSummary run(const json& doc) {
  RunSummary s;
  for (const auto& job : load(doc)) s.results.push_back(job());
  return s;
}

}  // namespace ctxpriv::scenario

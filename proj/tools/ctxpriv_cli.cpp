#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxpriv/metrics.hpp"
#include "ctxpriv/output.hpp"
#include "ctxpriv/phantom.hpp"
#include "ctxpriv/pipeline.hpp"
#include "ctxpriv/ppda.hpp"
#include "ctxpriv/scenario.hpp"

using namespace ctxpriv;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 an expectation failed, 2 bad input.
constexpr int kExitFailed = 1;
constexpr int kExitInput = 2;

// "3..12" or "3,6,12".
std::vector<std::size_t> parse_sizes(const std::string& spec) {
  std::vector<std::size_t> out;
  const auto dots = spec.find("..");
  try {
    if (dots != std::string::npos) {
      const auto lo = std::stoul(spec.substr(0, dots));
      const auto hi = std::stoul(spec.substr(dots + 2));
      if (hi < lo) throw Error(Errc::parse, "empty size range");
      for (auto n = lo; n <= hi; ++n) out.push_back(n);
      return out;
    }
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = std::min(spec.find(',', pos), spec.size());
      out.push_back(std::stoul(spec.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  } catch (const std::logic_error&) {
    throw Error(Errc::parse, "bad size list '" + spec + "'");
  }
  return out;
}

void finish(const std::string& command, const json& config, const json& result,
            const std::vector<output::Artifact>& artifacts) {
  output::write_with_summary(output::out_dir(), command, command, config, result, artifacts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-privacy simulator for sensor networks"};
  app.require_subcommand(1);

  // plan-zone
  double pr = 0.0;
  int hops = 0;
  auto* plan = app.add_subcommand("plan-zone", "Smallest flooding zone for a trace-back probability");
  plan->add_option("--pr", pr, "Acceptable trace-back probability")->required();
  plan->add_option("--hops", hops, "Random-walk hops H")->required();

  // simulate-hunt
  std::vector<std::string> grids{"30x30"};
  std::vector<std::string> strategies{"flood", "phantom:10"};
  int trials = 100, budget = 500;
  std::uint64_t seed = 1;
  auto* sim = app.add_subcommand("simulate-hunt", "Monte-Carlo back-tracing campaign");
  sim->add_option("--grid", grids, "Grid WxH (repeatable)");
  sim->add_option("--strategy", strategies, "flood | phantom:H | phantom-directed:H | twoway:L (repeatable)");
  sim->add_option("--trials", trials, "Trials per cell");
  sim->add_option("--budget", budget, "Messages per trial");
  sim->add_option("--seed", seed, "Master seed");

  // aggregate
  std::uint64_t x = 0, y = 0, z = 0, modulus = kDefaultModulus, agg_seed = 0;
  auto* agg = app.add_subcommand("aggregate", "One three-party aggregation round");
  agg->add_option("--x", x, "Reading at S1")->required();
  agg->add_option("--y", y, "Reading at S2")->required();
  agg->add_option("--z", z, "Value at the aggregator");
  agg->add_option("--modulus", modulus, "Prime field modulus");
  agg->add_option("--seed", agg_seed, "Master seed");

  // bench
  std::string sizes = "3..12";
  std::string pairs = "1,8";
  int reps = 30;
  auto* bench = app.add_subcommand("bench", "Aggregation timing (medians)");
  bench->add_option("--sizes", sizes, "Cluster sizes, 3..12 or 3,6,12");
  bench->add_option("--pairs", pairs, "Pair counts for the multi-pair run");
  bench->add_option("--reps", reps, "Timed repetitions (>= 30)");

  // disclosure-curve
  std::string b_grid = "0:1:0.05";
  std::vector<std::string> dists{"sppda=sppda", "cpda=uniform:3:5"};
  std::vector<std::string> models{"all-links", "any-link"};
  auto* curve = app.add_subcommand("disclosure-curve", "Disclosure probability against link-break probability");
  curve->add_option("--b-grid", b_grid, "lo:hi:step");
  curve->add_option("--dist", dists, "name=spec with spec sppda | uniform:LO:HI | weights:P_C:w1,w2,... (repeatable)");
  curve->add_option("--model", models, "all-links | any-link (repeatable)");

  // run-pipeline
  std::string pipeline_file;
  auto* pipe = app.add_subcommand("run-pipeline", "Run one pipeline configuration (JSON)");
  pipe->add_option("config", pipeline_file, "Pipeline config file")->required();

  // run-scenarios
  std::string scenario_file;
  auto* scen = app.add_subcommand("run-scenarios", "Run a scenario document");
  scen->add_option("file", scenario_file, "Scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) {
      const auto p = phantom::min_zone_nodes(pr, hops);
      const std::string csv = "pr,hops,min_nodes,broadcast_count\n" + metrics::fmt_double(pr, 6) + ',' +
                              std::to_string(hops) + ',' + std::to_string(p.min_nodes) + ',' +
                              std::to_string(p.broadcast_count) + '\n';
      std::cout << "min_nodes=" << p.min_nodes << " C(N,H)=" << p.broadcast_count << "\n";
      finish("plan-zone", {{"pr", pr}, {"hops", hops}},
             {{"min_nodes", p.min_nodes}, {"broadcast_count", p.broadcast_count}}, {{"plan-zone.csv", csv}});
    } else if (*sim) {
      metrics::HuntCampaign c;
      for (const auto& g : grids) c.grids.push_back(metrics::parse_grid(g));
      for (const auto& s : strategies) c.strategies.push_back(metrics::parse_strategy(s));
      c.trials = trials;
      c.message_budget = budget;
      c.seed = seed;
      const auto res = metrics::montecarlo_hunt(c);
      json cells = json::array();
      for (const auto& cell : res.cells) {
        cells.push_back({{"strategy", cell.strategy}, {"walk_hops", cell.walk_hops}, {"grid", std::to_string(cell.grid_w) + "x" + std::to_string(cell.grid_h)},
                         {"median", cell.median}, {"captured", cell.captured}});
        std::cout << cell.grid_w << "x" << cell.grid_h << " " << cell.strategy << " h=" << cell.walk_hops
                  << " median=" << cell.median << " captured=" << cell.captured << "/" << cell.trials << "\n";
      }
      finish("simulate-hunt", {{"grids", grids}, {"strategies", strategies}, {"trials", trials}, {"budget", budget}, {"seed", seed}},
             {{"cells", cells}},
             {{"simulate-hunt.trials.csv", metrics::trials_csv(res.trials)}, {"simulate-hunt.csv", metrics::cells_csv(res.cells)}});
    } else if (*agg) {
      ppda::SppdaOptions opt;
      opt.modulus = modulus;
      SimRng rng(agg_seed, "aggregate");
      const auto round = ppda::run_sppda({x}, {y}, {z}, rng, opt);
      std::cout << "pair_sum=" << round.result.pair_sum.value << " total=" << round.result.total.value << "\n";
      const std::string csv = "total,pair_sum\n" + std::to_string(round.result.total.value) + ',' +
                              std::to_string(round.result.pair_sum.value) + '\n';
      finish("aggregate", {{"x", x}, {"y", y}, {"z", z}, {"modulus", modulus}, {"seed", agg_seed}},
             {{"total", round.result.total.value}, {"pair_sum", round.result.pair_sum.value}}, {{"aggregate.csv", csv}});
    } else if (*bench) {
      const auto size_list = parse_sizes(sizes);
      const auto pair_list = parse_sizes(pairs);
      auto rows = metrics::bench_aggregation(size_list, reps);
      const auto pair_rows = metrics::bench_pipeline_pairs(pair_list, reps);
      rows.insert(rows.end(), pair_rows.begin(), pair_rows.end());
      const std::string csv = metrics::timing_csv(rows);
      std::cout << csv;
      finish("bench", {{"sizes", sizes}, {"pairs", pairs}, {"reps", reps}}, {{"rows", rows.size()}}, {{"bench.csv", csv}});
    } else if (*curve) {
      const auto grid = metrics::parse_b_grid(b_grid);
      std::vector<metrics::Scheme> schemes;
      for (const auto& d : dists) {
        const auto eq = d.find('=');
        const std::string name = eq == std::string::npos ? d : d.substr(0, eq);
        schemes.push_back({name, metrics::parse_dist(eq == std::string::npos ? d : d.substr(eq + 1))});
      }
      std::vector<metrics::DisclosureModel> model_list;
      for (const auto& m : models) model_list.push_back(metrics::parse_model(m));
      const auto rows = metrics::disclosure_curve(grid, schemes, model_list);
      const std::string csv = metrics::disclosure_csv(rows);
      std::cout << csv;
      finish("disclosure-curve", {{"b_grid", b_grid}, {"dists", dists}, {"models", models}}, {{"rows", rows.size()}},
             {{"disclosure-curve.csv", csv}});
    } else if (*pipe) {
      const json doc = scenario::read_json_file(pipeline_file);
      const auto cfg = scenario::parse_pipeline_config(doc, "$");
      const auto report = pipeline::run_pipeline(cfg);
      const std::string csv = pipeline::messages_csv(report);
      std::cout << csv;
      json hg = json::array();
      for (const auto& m : report.messages) hg.push_back(m.hg_value ? json(*m.hg_value) : json(nullptr));
      finish("run-pipeline", doc, {{"hg_values", hg}, {"af_holds_ss_key", report.af_holds_ss_key}},
             {{"run-pipeline.csv", csv}, {"run-pipeline.report.json", pipeline::to_json(report).dump(2) + "\n"}});
    } else if (*scen) {
      const json doc = scenario::read_json_file(scenario_file);
      const auto summary = scenario::run(doc);
      if (summary.results.empty()) {
        std::cout << "no scenarios\n";
        return 0;
      }
      std::vector<output::Artifact> artifacts;
      json results = json::array();
      for (const auto& r : summary.results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.kind << ")\n";
        for (const auto& f : r.failures) std::cout << "  " << f << "\n";
        artifacts.insert(artifacts.end(), r.artifacts.begin(), r.artifacts.end());
        results.push_back({{"name", r.name}, {"kind", r.kind}, {"passed", r.passed}, {"failures", r.failures}, {"result", r.result}});
      }
      finish("run-scenarios", doc, {{"scenarios", results}, {"all_passed", summary.all_passed()}}, artifacts);
      return summary.all_passed() ? 0 : kExitFailed;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}

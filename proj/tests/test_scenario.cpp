#include <string>

#include "ctxpriv/scenario.hpp"
#include "test_support.hpp"

using namespace ctxpriv;
using nlohmann::json;

namespace {

std::string validation_message(const json& doc) {
  try {
    scenario::load(doc);
  } catch (const Error& e) {
    if (e.code() == Errc::validation) return e.what();
    return std::string("wrong code: ") + e.what();
  }
  return "no error";
}

json one(json s) { return {{"scenarios", json::array({std::move(s)})}}; }

}  // namespace

TEST_CASE("empty scenario list succeeds with no outputs", "[scenario]") {
  const auto res = scenario::run(json{{"scenarios", json::array()}});
  CHECK(res.results.empty());
  CHECK(res.all_passed());
}

TEST_CASE("validation errors name the offending field", "[scenario]") {
  CHECK_THAT(validation_message(one({{"name", "z"}, {"kind", "plan-zone"}, {"pr", 0}, {"hops", 3}})),
             Catch::Matchers::ContainsSubstring("$.scenarios[0].pr"));
  CHECK_THAT(validation_message(one({{"name", "z"}, {"kind", "plan-zone"}, {"pr", 0.1}, {"hops", 0}})),
             Catch::Matchers::ContainsSubstring(".hops"));
  CHECK_THAT(validation_message(one({{"name", "z"}, {"kind", "plan-zone"}, {"hops", 3}})),
             Catch::Matchers::ContainsSubstring(".pr: required"));
  CHECK_THAT(validation_message(one({{"name", "z"}, {"kind", "warp"}})), Catch::Matchers::ContainsSubstring(".kind"));
  CHECK_THAT(validation_message(one({{"name", "bad name"}, {"kind", "plan-zone"}})),
             Catch::Matchers::ContainsSubstring(".name"));
  CHECK_THAT(validation_message(one({{"name", "a"}, {"kind", "aggregate"}, {"x", 1}, {"y", 2}, {"seeds", {1, 1, 2}}})),
             Catch::Matchers::ContainsSubstring(".seeds"));
  CHECK_THAT(validation_message(one({{"name", "a"}, {"kind", "aggregate"}, {"x", -1}, {"y", 2}})),
             Catch::Matchers::ContainsSubstring(".x"));
  CHECK_THAT(validation_message(one({{"name", "a"}, {"kind", "aggregate"}, {"x", 1}, {"y", 2}, {"modulus", 1000}})),
             Catch::Matchers::ContainsSubstring(".modulus"));
  CHECK_THAT(validation_message(one({{"name", "h"}, {"kind", "hunt"}, {"grid", "3"}, {"strategies", {"flood"}}})),
             Catch::Matchers::ContainsSubstring(".grid"));
  CHECK_THAT(validation_message(one({{"name", "h"}, {"kind", "hunt"}, {"grid", "3x3"}, {"strategies", {"walk"}}})),
             Catch::Matchers::ContainsSubstring(".strategies"));
  CHECK_THAT(validation_message(one({{"name", "p"}, {"kind", "pipeline"}, {"grid", "4x4"}, {"level", "max"}})),
             Catch::Matchers::ContainsSubstring(".level"));
  CHECK_THAT(validation_message(one({{"name", "p"}, {"kind", "pipeline"}, {"grid", "4x4"}, {"level", "full"}, {"sink", 99}})),
             Catch::Matchers::ContainsSubstring(".sink"));
  CHECK_THAT(validation_message(one({{"name", "p"}, {"kind", "pipeline"}, {"level", "full"}, {"readings", {{"x1", 3}}}})),
             Catch::Matchers::ContainsSubstring(".readings"));
  CHECK_THAT(validation_message(one({{"name", "d"}, {"kind", "disclosure"}, {"dists", {{"c", "uniform:1:5"}}}})),
             Catch::Matchers::ContainsSubstring(".dists.c"));
  CHECK_THAT(validation_message(json{{"scenarios", 3}}), Catch::Matchers::ContainsSubstring("$.scenarios"));

  const json dup{{"scenarios", json::array({{{"name", "a"}, {"kind", "plan-zone"}, {"pr", 0.1}, {"hops", 2}},
                                             {{"name", "a"}, {"kind", "plan-zone"}, {"pr", 0.1}, {"hops", 2}}})}};
  CHECK_THAT(validation_message(dup), Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("malformed JSON is a parse error", "[scenario]") {
  REQUIRE_ERRC(scenario::parse_text("{\"scenarios\": ["), Errc::parse);
  REQUIRE_ERRC(scenario::read_json_file("/nonexistent/file.json"), Errc::parse);
}

TEST_CASE("expectations are checked", "[scenario]") {
  const auto ok = scenario::run(one({{"name", "z"}, {"kind", "plan-zone"}, {"pr", 0.01}, {"hops", 3}, {"expect", {{"min_nodes", 10}}}}));
  REQUIRE(ok.results.size() == 1);
  CHECK(ok.all_passed());
  CHECK(ok.results[0].artifacts[0].content == "pr,hops,min_nodes,broadcast_count\n0.010000,3,10,120\n");

  const auto bad = scenario::run(one({{"name", "z"}, {"kind", "plan-zone"}, {"pr", 0.01}, {"hops", 4}, {"expect", {{"min_nodes", 8}}}}));
  CHECK_FALSE(bad.all_passed());
  REQUIRE(bad.results[0].failures.size() == 1);
  CHECK_THAT(bad.results[0].failures[0], Catch::Matchers::ContainsSubstring("min_nodes"));
}

TEST_CASE("bundled reference scenarios pass", "[scenario]") {
  const auto doc = scenario::read_json_file(std::string(CTXPRIV_SCENARIO_DIR) + "/reference.json");
  const auto res = scenario::run(doc);
  REQUIRE(res.results.size() >= 2);
  for (const auto& r : res.results) {
    INFO(r.name);
    for (const auto& f : r.failures) INFO(f);
    CHECK(r.passed);
  }
  const auto& agg = res.results[0];
  REQUIRE(agg.name == "worked-aggregate");
  CHECK(agg.result["pair_sum"] == 12);
  CHECK(agg.result["f"] == json({225, 675, 1365}));
}

TEST_CASE("pipeline config parsing", "[scenario]") {
  const json cfg{{"grid", "5x4"},     {"sink", 3},     {"level", "anonymity"}, {"anonymity", "twoway:4"},
                 {"sources", {7, 12}}, {"rounds", 2},  {"seed", 9},            {"readings", {{"7", 70}, {"12", 120}}}};
  const auto c = scenario::parse_pipeline_config(cfg, "$");
  CHECK(c.grid_w == 5);
  CHECK(c.grid_h == 4);
  CHECK(c.sink == NodeId{3u});
  CHECK(c.level == pipeline::PrivacyLevel::AnonymityOnly);
  CHECK(c.anonymity.kind == phantom::Strategy::Kind::TwoWay);
  CHECK(c.sources.size() == 2);
  CHECK(c.readings.at(NodeId{12u}) == 120);
  const auto r = pipeline::run_pipeline(c);
  CHECK(r.messages.size() == 4);
}

#include <cmath>
#include <fstream>

#include "adec/error.hpp"
#include "adec/metrics/metrics.hpp"
#include "adec/metrics/network.hpp"
#include "doctest.h"

using namespace adec;
using namespace adec::metrics;
using nlohmann::json;

namespace {

const std::string kFix = ADEC_FIXTURES;

json expected_report() {
  std::ifstream in(kFix + "/traces/expected_report.json");
  return json::parse(in);
}

const Trace& by_task(const std::vector<Trace>& ts, const std::string& id) {
  for (const auto& t : ts) {
    if (t.header.at("task_id") == id) return t;
  }
  FAIL("no trace " << id);
  return ts.front();
}

}  // namespace

TEST_CASE("c_total on hand-built traces") {
  const auto ts = load_trace_dir(kFix + "/traces");
  REQUIRE(ts.size() == 10);
  CHECK(c_total(by_task(ts, "t01")) == 12);
  CHECK(c_total(by_task(ts, "t02")) == 12 + 340);
  // the untransmitted context of the final failure does not count
  CHECK(c_total(by_task(ts, "t03")) == 20 + 210 + 185);
  CHECK(c_total(by_task(ts, "t04")) == 9);

  const auto want = expected_report().at("per_trace");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CAPTURE(i);
    CHECK(c_total(ts[i]) == want[i].at("c_total").get<long long>());
    CHECK(cloud_calls(ts[i]) == want[i].at("calls").get<long long>());
    CHECK(cloud_tokens(ts[i]) == want[i].at("tokens").get<long long>());
    CHECK(pch(ts[i]) == (want[i].at("pch") == 1));
  }
}

TEST_CASE("aggregate matches the spreadsheet oracle") {
  const auto ts = load_trace_dir(kFix + "/traces");
  const auto r = aggregate(ts);
  const auto want = expected_report();
  CHECK(r.tasks == want.at("tasks"));
  CHECK(r.c_total_tokens == want.at("c_total_tokens"));
  CHECK(r.uplink_bytes == want.at("uplink_bytes"));
  CHECK(r.elements_baseline == want.at("elements_baseline"));
  CHECK(r.elements_ours == want.at("elements_ours"));
  for (const char* k : {"sr", "mc", "mt", "uplink_kb", "rr", "pch_rate", "replan_rate", "avg_steps", "shr"}) {
    CAPTURE(k);
    CHECK(to_json(r).at(k).get<double>() == doctest::Approx(want.at(k).get<double>()).epsilon(1e-12));
  }
  CHECK(r.rce == 1.0);
}

TEST_CASE("aggregate small cases") {
  auto one = [](int calls, long long tokens) {
    Trace t;
    t.header = {{"schema", "adec-trace/1"}, {"kind", "header"}, {"instruction_tokens", 5}};
    for (int i = 0; i < calls; ++i) {
      t.records.push_back({{"kind", i == 0 ? "plan" : "replan"},
                           {"backend_calls", json::array({{{"location", "cloud"},
                                                           {"prompt_tokens", tokens},
                                                           {"completion_tokens", 0},
                                                           {"payload_bytes", 100}}})}});
    }
    t.summary = {{"kind", "summary"}, {"success", true}, {"steps", 3}};
    return t;
  };
  auto r = aggregate({one(1, 1400)});
  CHECK(r.mc == 1.0);
  CHECK(r.mt == 1400.0);
  r = aggregate({one(1, 1000), one(2, 1000)});
  CHECK(r.mc == 1.5);
  CHECK(r.replan_rate == 0.5);
  CHECK(r.uplink_bytes == 300);
  CHECK_FALSE(r.shr.has_value());
  CHECK(to_json(r).at("shr") == "n/a");

  auto other = one(1, 10);
  other.header["schema"] = "adec-trace/0";
  CHECK_THROWS_AS(aggregate({one(1, 10), other}), AccountingError);
  CHECK_THROWS_AS(aggregate({}), AccountingError);

  r = aggregate({one(1, 1800)}, RceBaseline{2000, false});
  CHECK(r.rce == doctest::Approx(0.9));
}

TEST_CASE("truncated traces are accounting errors") {
  std::vector<json> lines = {{{"schema", "adec-trace/1"}, {"kind", "header"}, {"instruction_tokens", 3}},
                             {{"schema", "adec-trace/1"}, {"kind", "plan"}}};
  CHECK_THROWS_AS(parse_trace(lines), AccountingError);
  CHECK_THROWS_AS(parse_trace({lines[1]}), AccountingError);
  lines.push_back({{"schema", "adec-trace/1"}, {"kind", "summary"}});
  CHECK(c_total(parse_trace(lines)) == 3);
}

TEST_CASE("rce anchors") {
  CHECK(std::abs(rce(15000, true, 2000, false) - 9.0) <= 1e-9);
  CHECK(std::abs(rce(1900, false, 2000, false) - 0.95) <= 1e-9);
  CHECK(rce(2000, false, 2000, false) == 1.0);
  CHECK(rce(3000, true, 3000, true) == 1.0);
  for (double c : {0.5, 3.0, 1e4}) CHECK(rce(15000 * c, true, 2000 * c, false) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK_THROWS_AS(rce(10, false, 0, false), ContractViolation);
}

TEST_CASE("reduction rate") {
  CHECK(std::abs(reduction_rate(1000, 207) - 0.793) <= 1e-9);
  for (long long x : {1LL, 7LL, 1000LL}) {
    CHECK(reduction_rate(x, x) == 0.0);
    CHECK(reduction_rate(x, 0) == 1.0);
  }
  std::vector<std::string> w;
  CHECK(reduction_rate(100, 150, &w) == doctest::Approx(-0.5));
  CHECK(w.size() == 1);
  CHECK_THROWS_AS(reduction_rate(0, 0), ContractViolation);
}

TEST_CASE("latency model") {
  const auto wifi = find_profile("WiFi");
  const auto g2 = find_profile("2G");
  CHECK(latency(wifi, 1.44, 0) == doctest::Approx(2.88));
  // hand computation: 2.88 + 15000 / 1e7 and 2.88 + 15000 / 5e4
  CHECK(latency(wifi, 1.44, 15000) == doctest::Approx(2.8815));
  CHECK(std::abs(latency(wifi, 1.44, 15000) - 2.88) <= 0.01);
  CHECK(latency(g2, 1.44, 15000) == doctest::Approx(3.18));
  CHECK(std::abs(latency(g2, 1.44, 15000) - 3.03) <= 0.2);
  CHECK(latency(wifi, 1.0, 0, "visual") == 4.0);
  CHECK_THROWS_AS(find_profile("5G"), ConfigError);

  NetworkProfile bad{"x", 0.0, {}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.bandwidth_bytes_per_s = INFINITY;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto methods = load_methods_file(kFix + "/methods.json");
  REQUIRE(methods.size() == 6);
  const auto ladder = default_profiles();
  REQUIRE(ladder.size() == 4);
  for (const auto& m : methods) {
    CAPTURE(m.name);
    for (std::size_t i = 1; i < ladder.size(); ++i) {
      CHECK(ladder[i].bandwidth_bytes_per_s < ladder[i - 1].bandwidth_bytes_per_s);
      CHECK(latency(ladder[i].bandwidth_bytes_per_s, m.mc, m.per_call_s, m.uplink_bytes) >
            latency(ladder[i - 1].bandwidth_bytes_per_s, m.mc, m.per_call_s, m.uplink_bytes));
    }
    // more uplink, more latency
    CHECK(latency(1e6, m.mc, m.per_call_s, m.uplink_bytes + 1) > latency(1e6, m.mc, m.per_call_s, m.uplink_bytes));
  }
  CHECK_THROWS_AS(load_methods(json{{"methods", json::array({{{"name", "x"}}})}}), ParseError);
}

TEST_CASE("pch and shr") {
  const auto ts = load_trace_dir(kFix + "/traces");
  CHECK(pch(by_task(ts, "t05")));
  CHECK_FALSE(pch(by_task(ts, "t10")));  // success seen, then only termination
  CHECK_FALSE(pch(by_task(ts, "t01")));

  // truncating at the first success step removes the hazard
  auto cut = by_task(ts, "t05");
  for (std::size_t i = 0; i < cut.records.size(); ++i) {
    if (cut.records[i].value("success_before", false)) {
      cut.records.resize(i);
      break;
    }
  }
  CHECK_FALSE(pch(cut));

  const auto wrong = shr_counts(by_task(ts, "t06"));
  CHECK(wrong.tied == 1);
  CHECK(wrong.hallucinated == 1);
  const auto right = shr_counts(by_task(ts, "t07"));
  CHECK(right.labeled == 2);
  CHECK(right.tied == 1);  // 5e-10 apart counts as tied; the second decision is not
  CHECK(right.hallucinated == 0);
  CHECK(shr_counts(by_task(ts, "t08")).tied == 0);  // null scores are -inf
  CHECK(shr({by_task(ts, "t06"), by_task(ts, "t07")}) == 0.5);
  CHECK_FALSE(shr({by_task(ts, "t01")}).has_value());
}

TEST_CASE("protocol helpers") {
  const auto ts = load_trace_dir(kFix + "/traces");
  for (const auto& t : ts) {
    CHECK(termination_count(t) == 1);
    CHECK(stray_cloud_bytes(t) == 0);
  }
  auto bad = by_task(ts, "t01");
  bad.records[1]["backend_calls"][0]["location"] = "cloud";
  CHECK(stray_cloud_bytes(bad) > 0);
}

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adec/cli/cli.hpp"
#include "adec/cli/config.hpp"
#include "adec/metrics/metrics.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adec;

namespace {

const std::string kFix = ADEC_FIXTURES;
const std::string kMain = kFix + "/suites/main.tasks.json";

struct Out {
  int code = -1;
  std::string out, err;
};

Out adec_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "adec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  return {code, o.str(), e.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("adec_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

json first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string l;
  std::getline(is, l);
  return json::parse(l);
}

// csv text -> rows of cells
std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    rows.emplace_back();
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) rows.back().push_back(cell);
  }
  return rows;
}

}  // namespace

TEST_CASE("run: golden task exits 0 and writes its trace") {
  const auto dir = scratch("run");
  const auto r = adec_cli({"run", "--tasks", kMain, "--task", "add_alice", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("add_alice: success") == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  REQUIRE(fs::exists(dir / "add_alice.trace.jsonl"));
  const auto t = metrics::load_trace(dir / "add_alice.trace.jsonl");
  CHECK(metrics::success(t));
  CHECK(metrics::cloud_calls(t) == 1);
}

TEST_CASE("run: configuration errors exit 2") {
  const auto dir = scratch("run_err");
  CHECK(adec_cli({"run", "--tasks", kMain, "--world", (dir / "missing.json").string(), "--out", dir.string()}).code == 2);
  CHECK(adec_cli({"run", "--tasks", (dir / "missing.tasks.json").string()}).code == 2);
  CHECK(adec_cli({"run", "--tasks", kMain, "--task", "nope"}).code == 2);
  CHECK(adec_cli({"run", "--tasks", kMain, "--tau", "1.5"}).code == 2);
  CHECK(adec_cli({"run", "--tasks", kMain, "--tau", "abc"}).code == 2);
  CHECK(adec_cli({"run", "--tasks", kMain, "--backend", "local"}).code == 2);
  CHECK(adec_cli({"run", "--tasks", kMain, "--ablate", "no_wings"}).code == 2);
  CHECK(adec_cli({"frobnicate"}).code == 2);
  CHECK(adec_cli({}).code == 2);
  CHECK(adec_cli({"--help"}).code == 0);
}

TEST_CASE("run: remote without a key fails before any step") {
  const auto dir = scratch("remote");
  ::unsetenv("ADEC_API_KEY");
  const auto r = adec_cli({"run", "--backend", "remote", "--tasks", kMain, "--task", "add_alice", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("ADEC_API_KEY") != std::string::npos);
  CHECK(fs::is_empty(dir));
}

TEST_CASE("bench: tasks x seeds traces, report, determinism across jobs") {
  const auto a = scratch("bench_a"), b = scratch("bench_b");
  REQUIRE(adec_cli({"bench", "--tasks", kMain, "--out", a.string()}).code == 0);
  REQUIRE(adec_cli({"bench", "--tasks", kMain, "--out", b.string(), "--jobs", "4"}).code == 0);
  int n = 0;
  for (const auto& e : fs::directory_iterator(a / "traces")) {
    ++n;
    CHECK(slurp(e.path()) == slurp(b / "traces" / e.path().filename()));
  }
  CHECK(n == 12 * 3);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "report.csv") == slurp(b / "report.csv"));

  const auto doc = json::parse(slurp(a / "report.json"));
  CHECK(doc["schema"] == "adec-report/1");
  CHECK(doc["seeds"] == json::array({0, 1, 2}));
  CHECK(doc["per_task"].size() == 36);
  CHECK(doc["report"]["tasks"] == 36);
  // protocol bound: at most 1 + R cloud calls per task on average and per task
  CHECK(doc["report"]["mc"].get<double>() <= 1.0 + doc["config"]["replan_rounds"].get<int>());
  for (const auto& row : doc["per_task"]) CHECK(row["cloud_calls"].get<int>() <= 2);
}

TEST_CASE("bench: explicit seeds") {
  const auto d = scratch("seeds");
  REQUIRE(adec_cli({"bench", "--tasks", kMain, "--seeds", "5,7", "--out", d.string()}).code == 0);
  CHECK(fs::exists(d / "traces" / "add_alice.seed5.trace.jsonl"));
  CHECK(fs::exists(d / "traces" / "add_alice.seed7.trace.jsonl"));
  CHECK(!fs::exists(d / "traces" / "add_alice.seed0.trace.jsonl"));
  CHECK(adec_cli({"bench", "--tasks", kMain, "--seeds", "1,x"}).code == 2);
}

TEST_CASE("ablate: alpha sweep gives five rows plus full, SHR column") {
  const auto d = scratch("alpha");
  const auto r = adec_cli({"ablate", "--tasks", kFix + "/suites/duplicates.tasks.json", "--sweep", "alpha=0,0.1,0.2,0.5,1.0",
                      "--out", d.string()});
  REQUIRE(r.code == 0);
  const auto rows = csv(slurp(d / "ablate.csv"));
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == std::vector<std::string>{"label", "SR", "steps", "MT", "MC", "replan_rate", "PCH", "SHR", "RCE"});
  CHECK(rows[1][0] == "full");
  const std::vector<std::string> labels = {"alpha=0", "alpha=0.1", "alpha=0.2", "alpha=0.5", "alpha=1"};
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(rows[i + 2][0] == labels[i]);
  CHECK(std::stod(rows[2][7]) > std::stod(rows[4][7]));
  CHECK(fs::exists(d / "alpha=0" / "report.json"));
}

TEST_CASE("ablate: contradictory or missing rows exit 2 before running") {
  const auto d = scratch("contra");
  CHECK(adec_cli({"ablate", "--tasks", kMain, "--ablate", "no_executor,no_orchestrator", "--out", d.string()}).code == 2);
  CHECK(fs::is_empty(d));
  CHECK(adec_cli({"ablate", "--tasks", kMain, "--out", d.string()}).code == 2);
  CHECK(adec_cli({"ablate", "--tasks", kMain, "--sweep", "beta=1"}).code == 2);
  CHECK(adec_cli({"ablate", "--tasks", kMain, "--sweep", "tau=0,0.5"}).code == 2);
}

TEST_CASE("ablate: no_hit raises PCH on the over-eager QA suite") {
  const auto d = scratch("nohit");
  REQUIRE(adec_cli({"ablate", "--tasks", kFix + "/suites/qa.tasks.json", "--ablate", "no_hit", "--out", d.string()}).code == 0);
  const auto rows = csv(slurp(d / "ablate.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][6] == "0");
  CHECK(std::stod(rows[2][6]) > 0.0);
  CHECK(std::stod(rows[2][1]) < std::stod(rows[1][1]));
}

TEST_CASE("netscan: overrides, methods, profile filter, missing inputs") {
  const auto d = scratch("net");
  auto r = adec_cli({"netscan", "--mc", "1.44", "--per-call", "2.0", "--uplink-bytes", "15000", "--out", d.string()});
  REQUIRE(r.code == 0);
  auto rows = csv(slurp(d / "netscan.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[1][1] == "WiFi");
  // 1.44 * 2.0 + 15000 / 10e6
  CHECK(std::stod(rows[1][3]) == doctest::Approx(2.8815).epsilon(1e-9));
  for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][3]) > std::stod(rows[i - 1][3]));

  r = adec_cli({"netscan", "--methods", kFix + "/methods.json", "--net", "2G", "--out", d.string()});
  REQUIRE(r.code == 0);
  rows = csv(r.out);
  CHECK(rows.size() == 1 + 6);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == "2G");

  CHECK(adec_cli({"netscan", "--out", d.string()}).code == 2);
  CHECK(adec_cli({"netscan", "--mc", "1.44"}).code == 2);
  CHECK(adec_cli({"netscan", "--mc", "1.44", "--uplink-bytes", "1", "--net", "5G"}).code == 2);
}

TEST_CASE("netscan from a bench report; report command reproduces the bench report") {
  const auto d = scratch("rep");
  REQUIRE(adec_cli({"bench", "--tasks", kMain, "--seeds", "0", "--out", d.string()}).code == 0);
  const auto doc = json::parse(slurp(d / "report.json"));
  auto r = adec_cli({"netscan", "--report", (d / "report.json").string(), "--net", "WiFi", "--out", d.string()});
  REQUIRE(r.code == 0);
  const auto rows = csv(r.out);
  REQUIRE(rows.size() == 2);
  const double want = doc["report"]["mc"].get<double>() * 2.0 +
                      doc["report"]["uplink_bytes_per_task"].get<double>() / 10e6;
  CHECK(std::stod(rows[1][3]) == doctest::Approx(want).epsilon(1e-4));

  const auto again = scratch("rep2");
  REQUIRE(adec_cli({"report", "--traces", (d / "traces").string(), "--out", again.string()}).code == 0);
  CHECK(slurp(again / "report.csv") == slurp(d / "report.csv"));
  CHECK(json::parse(slurp(again / "report.json"))["report"] == doc["report"]);
  CHECK(adec_cli({"report", "--traces", (d / "nope").string()}).code == 2);
}

TEST_CASE("config file: file over defaults, flags over file, paths relative to the file") {
  const auto d = scratch("cfg");
  fs::create_directories(d / "conf");
  fs::copy_file(kMain, d / "main.tasks.json");
  fs::create_directories(d / "worlds");
  fs::copy_file(kFix + "/worlds/device.world.json", d / "worlds" / "device.world.json");
  {
    std::ofstream os(d / "conf" / "adec.ini");
    os << "[run]\ntasks = ../main.tasks.json\nworld = ../worlds/device.world.json\ntask = add_alice\nout = ../out\n"
          "[pilot]\ntau = 0.6\nt_max = 20\n[grounding]\nalpha = 0.3\n";
  }
  const auto ini = (d / "conf" / "adec.ini").string();
  REQUIRE(adec_cli({"run", "--config", ini}).code == 0);
  auto cfg = first_line(d / "out" / "add_alice.trace.jsonl")["config"];
  CHECK(cfg["tau"] == 0.6);
  CHECK(cfg["t_max"] == 20);
  CHECK(cfg["alpha"] == 0.3);
  CHECK(cfg["t_replan"] == 8);  // untouched default

  REQUIRE(adec_cli({"run", "--config", ini, "--tau", "0.7", "--out", (d / "out2").string()}).code == 0);
  cfg = first_line(d / "out2" / "add_alice.trace.jsonl")["config"];
  CHECK(cfg["tau"] == 0.7);
  CHECK(cfg["alpha"] == 0.3);

  {
    std::ofstream os(d / "conf" / "bad.ini");
    os << "[pilot]\ntaux = 0.6\n";
  }
  CHECK(adec_cli({"run", "--config", (d / "conf" / "bad.ini").string(), "--tasks", kMain}).code == 2);
  CHECK(adec_cli({"run", "--config", (d / "conf" / "absent.ini").string()}).code == 2);
}

TEST_CASE("settings table: every flag maps to a unique section key") {
  std::set<std::string> flags, keys;
  for (const auto& s : cli::settings()) {
    CHECK(flags.insert(s.flag).second);
    CHECK(keys.insert(s.ini_key).second);
    CHECK(s.ini_key.find('.') != std::string::npos);
  }
  for (const char* f : {"world", "tasks", "backend", "seed", "jobs", "tau", "alpha", "t-replan", "t-max", "ablate",
                        "net", "out"}) {
    CHECK(flags.count(f) == 1);
  }
}

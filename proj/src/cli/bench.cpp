#include "adec/cli/bench.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "adec/backends/oracle.hpp"
#include "adec/backends/remote.hpp"
#include "adec/error.hpp"
#include "adec/pilot/trace.hpp"

namespace adec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

LoadedSuite load_suite(const RunConfig& cfg) {
  if (cfg.tasks.empty()) throw ConfigError("--tasks is required");
  if (!fs::is_regular_file(cfg.tasks)) throw ConfigError("task suite not found: " + cfg.tasks.string());
  LoadedSuite ls{sim::load_task_suite_file(cfg.tasks), {}};
  if (!cfg.world.empty()) {
    ls.world = cfg.world;
  } else if (ls.suite.world_path) {
    ls.world = *ls.suite.world_path;
  } else {
    throw ConfigError("the suite names no world; pass --world");
  }
  if (!fs::is_regular_file(ls.world)) throw ConfigError("world not found: " + ls.world.string());
  if (!cfg.task.empty()) {
    bool found = false;
    for (const auto& t : ls.suite.tasks) found = found || t.task_id == cfg.task;
    if (!found) throw ConfigError("no task \"" + cfg.task + "\" in " + cfg.tasks.string());
  }
  // parse once up front so a bad world is a config error, not N job failures
  (void)sim::load_world_file(ls.world, 0);
  return ls;
}

namespace {

std::string backend_name(BackendKind k) { return k == BackendKind::oracle ? "oracle" : "remote"; }

JobOutput run_one(const RunConfig& cfg, const pilot::PilotConfig& pcfg, const LoadedSuite& ls, const Job& job,
                  const backends::RemoteConfig* remote) {
  const auto& task = ls.suite.tasks.at(job.task);
  auto world = sim::load_world_file(ls.world, job.seed);
  sim::prepare_world(world, task);
  auto set = remote ? backends::make_remote_backends(*remote) : backends::make_oracle_backends();
  auto result = pilot::run_task(task, world, {set.designer.get(), set.orchestrator.get(), set.executor.get()}, pcfg);
  pilot::TraceContext ctx{ls.world.filename().string(), ls.suite.name, job.seed, backend_name(cfg.backend),
                          pilot::to_json(pcfg)};
  JobOutput out{task.task_id, job.seed, pilot::trace_lines(task, result, ctx), false};
  out.backend_error = result.termination.reason == "backend_error";
  return out;
}

}  // namespace

std::vector<JobOutput> run_jobs(const RunConfig& cfg, const pilot::PilotConfig& pcfg, const LoadedSuite& ls,
                                const std::vector<Job>& jobs) {
  pcfg.validate();
  std::optional<backends::RemoteConfig> remote;
  if (cfg.backend == BackendKind::remote) remote = backends::resolve_remote_config({});

  std::vector<JobOutput> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out[i] = run_one(cfg, pcfg, ls, jobs[i], remote ? &*remote : nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.jobs, 1)), jobs.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void write_lines(const fs::path& path, const std::vector<json>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  for (const auto& l : lines) os << l.dump() << '\n';
}

json per_task_json(const std::vector<metrics::Trace>& traces) {
  auto rows = json::array();
  for (const auto& t : traces) {
    rows.push_back({{"task_id", t.header.value("task_id", "")},
                    {"seed", t.header.value("seed", 0)},
                    {"success", metrics::success(t)},
                    {"steps", metrics::steps(t)},
                    {"cloud_calls", metrics::cloud_calls(t)},
                    {"replans", metrics::replans(t)},
                    {"c_total", metrics::c_total(t)},
                    {"pch", metrics::pch(t)},
                    {"termination", t.summary.value("termination", json::object()).value("reason", "")},
                    {"error", t.summary.value("error", json())}});
  }
  return rows;
}

json report_document(const std::string& suite, const std::string& backend, const std::vector<std::uint64_t>& seeds,
                     const json& config, const metrics::CostReport& report,
                     const std::vector<metrics::Trace>& traces) {
  return {{"schema", "adec-report/1"}, {"suite", suite},  {"backend", backend},
          {"seeds", seeds},            {"config", config}, {"report", metrics::to_json(report)},
          {"per_task", per_task_json(traces)}};
}

void write_report(const fs::path& out, const json& doc, const metrics::CostReport& report) {
  fs::create_directories(out);
  {
    std::ofstream os(out / "report.json", std::ios::binary);
    if (!os) throw Error("cannot write " + (out / "report.json").string());
    os << doc.dump(2) << '\n';
  }
  std::ofstream os(out / "report.csv", std::ios::binary);
  if (!os) throw Error("cannot write " + (out / "report.csv").string());
  os << metrics::csv_header() << '\n' << metrics::csv_row(report) << '\n';
}

BenchOutput bench(const RunConfig& cfg, const pilot::PilotConfig& pcfg, const LoadedSuite& ls, const fs::path& out) {
  if (cfg.seeds.empty()) throw ConfigError("no seeds");
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < ls.suite.tasks.size(); ++i) {
    if (!cfg.task.empty() && ls.suite.tasks[i].task_id != cfg.task) continue;
    for (auto s : cfg.seeds) jobs.push_back({i, s});
  }
  BenchOutput b;
  b.jobs = run_jobs(cfg, pcfg, ls, jobs);
  for (const auto& j : b.jobs) {
    write_lines(out / "traces" / (j.task_id + ".seed" + std::to_string(j.seed) + ".trace.jsonl"), j.lines);
    b.traces.push_back(metrics::parse_trace(j.lines));
    b.backend_error = b.backend_error || j.backend_error;
  }
  b.report = metrics::aggregate(b.traces);
  b.report_json = report_document(ls.suite.name, backend_name(cfg.backend), cfg.seeds, pilot::to_json(pcfg), b.report,
                                  b.traces);
  write_report(out, b.report_json, b.report);
  return b;
}

}  // namespace adec::cli

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adec/cli/config.hpp"
#include "adec/metrics/metrics.hpp"
#include "adec/sim/task.hpp"
#include "json.hpp"

namespace adec::cli {

struct LoadedSuite {
  sim::TaskSuite suite;
  std::filesystem::path world;
};

// ConfigError when a path is missing or the suite names no world and
// cfg.world is empty. ParseError on malformed documents.
LoadedSuite load_suite(const RunConfig& cfg);

struct Job {
  std::size_t task = 0;  // index into the suite
  std::uint64_t seed = 0;
};

struct JobOutput {
  std::string task_id;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> lines;  // the trace as written
  bool backend_error = false;
};

// Runs every job (in parallel up to cfg.jobs); output order matches `jobs`.
// Remote configuration is resolved before the first step.
std::vector<JobOutput> run_jobs(const RunConfig& cfg, const pilot::PilotConfig& pcfg, const LoadedSuite& ls,
                                const std::vector<Job>& jobs);

void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

struct BenchOutput {
  std::vector<JobOutput> jobs;
  std::vector<metrics::Trace> traces;
  metrics::CostReport report;
  nlohmann::json report_json;
  bool backend_error = false;
};

// every task x cfg.seeds; traces under out/traces, report.json and report.csv in out
BenchOutput bench(const RunConfig& cfg, const pilot::PilotConfig& pcfg, const LoadedSuite& ls,
                  const std::filesystem::path& out);

// per-trace rows of report.json
nlohmann::json per_task_json(const std::vector<metrics::Trace>& traces);

nlohmann::json report_document(const std::string& suite, const std::string& backend,
                               const std::vector<std::uint64_t>& seeds, const nlohmann::json& config,
                               const metrics::CostReport& report, const std::vector<metrics::Trace>& traces);

void write_report(const std::filesystem::path& out, const nlohmann::json& doc, const metrics::CostReport& report);

}  // namespace adec::cli

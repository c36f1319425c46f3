#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "adec/pilot/pilot.hpp"
#include "json.hpp"

namespace adec::pilot {

inline constexpr const char* kTraceSchema = "adec-trace/1";

// Run context written into the header line.
struct TraceContext {
  std::string world;
  std::string suite;
  std::uint64_t seed = 0;
  std::string backend = "oracle";
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json to_json(const Termination& t);
nlohmann::json to_json(const StepRecord& r);

// header, one line per StepRecord, summary; every line carries the schema.
std::vector<nlohmann::json> trace_lines(const sim::TaskSpec& task, const TaskResult& result, const TraceContext& ctx);
void write_trace(std::ostream& os, const sim::TaskSpec& task, const TaskResult& result, const TraceContext& ctx);
void write_trace_file(const std::filesystem::path& path, const sim::TaskSpec& task, const TaskResult& result,
                      const TraceContext& ctx);

// Parses JSONL; ParseError on bad JSON or a foreign schema.
std::vector<nlohmann::json> read_trace_lines(std::istream& is);
std::vector<nlohmann::json> read_trace_file(const std::filesystem::path& path);

}  // namespace adec::pilot

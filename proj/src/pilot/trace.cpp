#include "adec/pilot/trace.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "adec/error.hpp"

namespace adec::pilot {

using nlohmann::json;

namespace {

json opt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json grounding_json(const grounding::GroundingResult& g) {
  auto rows = json::array();
  for (const auto& c : g.per_candidate) rows.push_back(grounding::to_json(c));
  return {{"node_index", g.node_index}, {"objective", g.objective}, {"per_candidate", rows}};
}

}  // namespace

json to_json(const Termination& t) {
  return {{"priority", opt(t.priority)}, {"reason", t.reason}, {"payload", t.payload}, {"step", t.step}};
}

json to_json(const StepRecord& r) {
  json j = {{"schema", kTraceSchema}, {"kind", r.kind}, {"step", r.step}, {"milestone_index", r.milestone_index},
            {"plan_revision", r.plan_revision}};
  auto al = json::array();
  for (const auto& [k, s] : r.alignments) al.push_back({{"milestone", k}, {"score", s}});
  j["alignments"] = al;
  j["s_value"] = opt(r.s_value);
  j["meta"] = r.meta ? backends::to_json(*r.meta) : json(nullptr);
  j["grounding"] = r.grounding ? grounding_json(*r.grounding) : json(nullptr);
  j["ftact"] = opt(r.ftact);
  j["action"] = r.action ? sim::to_json(*r.action) : json(nullptr);
  j["outcome_ok"] = r.outcome_ok;
  j["message"] = r.message;
  auto ev = json::array();
  for (const auto& e : r.events) ev.push_back(sim::to_json(e));
  j["events"] = ev;
  auto calls = json::array();
  for (const auto& c : r.backend_calls) calls.push_back(backends::to_json(c));
  j["backend_calls"] = calls;
  j["state_summary"] = r.state_summary;
  j["screen"] = r.screen;
  j["success_before"] = r.success_before;
  j["tree_size"] = opt(r.tree_size);
  j["ground_truth_index"] = opt(r.ground_truth_index);
  j["target"] = r.target;
  j["failure"] = r.failure ? backends::to_json(*r.failure) : json(nullptr);
  j["failure_transmitted"] = r.failure_transmitted;
  j["failure_tokens"] = r.failure_tokens;
  j["termination"] = r.termination ? to_json(*r.termination) : json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

std::vector<json> trace_lines(const sim::TaskSpec& task, const TaskResult& result, const TraceContext& ctx) {
  std::vector<json> lines;
  lines.push_back({{"schema", kTraceSchema},
                   {"kind", "header"},
                   {"task_id", task.task_id},
                   {"category", std::string(sim::to_string(task.category))},
                   {"instruction", task.instruction},
                   {"instruction_tokens", result.instruction_tokens},
                   {"labeled", !task.ground_truth_targets.empty()},
                   {"world", ctx.world},
                   {"suite", ctx.suite},
                   {"seed", ctx.seed},
                   {"backend", ctx.backend},
                   {"config", ctx.config}});
  int replans = 0;
  long long cloud_calls = 0;
  for (const auto& r : result.trace) {
    lines.push_back(to_json(r));
    if (r.kind == "replan") ++replans;
    for (const auto& c : r.backend_calls) cloud_calls += c.location == backends::Location::cloud;
  }
  lines.push_back({{"schema", kTraceSchema},
                   {"kind", "summary"},
                   {"task_id", task.task_id},
                   {"success", result.success},
                   {"termination", to_json(result.termination)},
                   {"steps", result.state.step},
                   {"replans", replans},
                   {"failures", result.state.failures},
                   {"cloud_calls", cloud_calls},
                   {"error", opt(result.error)}});
  return lines;
}

void write_trace(std::ostream& os, const sim::TaskSpec& task, const TaskResult& result, const TraceContext& ctx) {
  for (const auto& l : trace_lines(task, result, ctx)) os << l.dump() << '\n';
}

void write_trace_file(const std::filesystem::path& path, const sim::TaskSpec& task, const TaskResult& result,
                      const TraceContext& ctx) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_trace(os, task, result, ctx);
}

std::vector<json> read_trace_lines(std::istream& is) {
  std::vector<json> out;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("/line/" + std::to_string(n), e.what());
    }
    if (!j.is_object() || j.value("schema", "") != kTraceSchema) {
      throw ParseError("/line/" + std::to_string(n), "expected schema " + std::string(kTraceSchema));
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<json> read_trace_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return read_trace_lines(is);
}

}  // namespace adec::pilot

#include "adec/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "adec/error.hpp"

namespace adec::metrics {

using nlohmann::json;

namespace {

const json kEmpty = json::array();

const json& calls_of(const json& rec) {
  const auto it = rec.find("backend_calls");
  return it != rec.end() && it->is_array() ? *it : kEmpty;
}

bool is_cloud(const json& call) { return call.value("location", "") == "cloud"; }

template <class F>
long long sum_cloud(const Trace& t, F f) {
  long long n = 0;
  for (const auto& rec : t.records) {
    for (const auto& c : calls_of(rec)) {
      if (is_cloud(c)) n += f(c);
    }
  }
  return n;
}

// null stands for -inf (JSON has no infinities)
double num(const json& j) {
  return j.is_number() ? j.get<double>() : -std::numeric_limits<double>::infinity();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

Trace parse_trace(const std::vector<json>& lines) {
  Trace t;
  bool head = false, tail = false;
  for (const auto& l : lines) {
    const auto kind = l.value("kind", "");
    if (kind == "header") {
      if (head) throw AccountingError("trace has two header lines");
      t.header = l;
      head = true;
    } else if (kind == "summary") {
      if (tail) throw AccountingError("trace has two summary lines");
      t.summary = l;
      tail = true;
    } else {
      if (!head || tail) throw AccountingError("step record outside header/summary");
      t.records.push_back(l);
    }
  }
  if (!head) throw AccountingError("truncated trace: no header line");
  if (!tail) throw AccountingError("truncated trace: no summary line");
  return t;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<json> lines;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(n), e.what());
    }
  }
  try {
    return parse_trace(lines);
  } catch (const AccountingError& e) {
    throw AccountingError(path.string() + ": " + e.what());
  }
}

std::vector<Trace> load_trace_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 12 && name.substr(name.size() - 12) == ".trace.jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Trace> out;
  for (const auto& f : files) out.push_back(load_trace(f));
  return out;
}

long long c_total(const Trace& t) {
  long long n = t.header.value("instruction_tokens", 0LL);
  for (const auto& rec : t.records) {
    if (rec.value("failure_transmitted", false)) n += rec.value("failure_tokens", 0LL);
  }
  return n;
}

long long cloud_calls(const Trace& t) {
  return sum_cloud(t, [](const json&) { return 1LL; });
}

long long cloud_tokens(const Trace& t) {
  return sum_cloud(t, [](const json& c) { return c.value("prompt_tokens", 0LL) + c.value("completion_tokens", 0LL); });
}

long long uplink_bytes(const Trace& t) {
  return sum_cloud(t, [](const json& c) { return c.value("payload_bytes", 0LL); });
}

long long stray_cloud_bytes(const Trace& t) {
  long long n = 0;
  for (const auto& rec : t.records) {
    const auto kind = rec.value("kind", "");
    if (kind == "plan" || kind == "replan") continue;
    for (const auto& c : calls_of(rec)) {
      if (is_cloud(c)) n += std::max(1LL, c.value("payload_bytes", 0LL));
    }
  }
  return n;
}

int termination_count(const Trace& t) {
  int n = 0;
  for (const auto& rec : t.records) n += rec.value("kind", "") == "terminate";
  return n;
}

int replans(const Trace& t) {
  int n = 0;
  for (const auto& rec : t.records) n += rec.value("kind", "") == "replan";
  return n;
}

bool success(const Trace& t) { return t.summary.value("success", false); }

int steps(const Trace& t) { return t.summary.value("steps", 0); }

ElementCounts uploaded_elements(const Trace& t) {
  ElementCounts e;
  for (const auto& rec : t.records) {
    const auto it = rec.find("tree_size");
    if (it == rec.end() || !it->is_number_integer()) continue;
    e.baseline += it->get<long long>();
    for (const auto& c : calls_of(rec)) e.ours += c.value("uploaded_elements", 0LL);
  }
  return e;
}

double rce(double mt_method, bool image_method, double mt_baseline, bool image_baseline, double mu) {
  if (!(mt_baseline > 0.0)) throw ContractViolation("rce needs a positive baseline token count");
  const double num = mt_method * (image_method ? mu : 1.0);
  const double den = mt_baseline * (image_baseline ? mu : 1.0);
  return num / den;
}

double reduction_rate(long long e_baseline, long long e_ours, std::vector<std::string>* warnings) {
  if (e_baseline <= 0) throw ContractViolation("reduction rate needs a positive baseline element count");
  const double rr = static_cast<double>(e_baseline - e_ours) / static_cast<double>(e_baseline);
  if (rr < 0.0 && warnings) {
    warnings->push_back("more elements uploaded than the baseline (" + std::to_string(e_ours) + " > " +
                        std::to_string(e_baseline) + ")");
  }
  return rr;
}

bool pch(const Trace& t) {
  bool held = false;
  for (const auto& rec : t.records) {
    held = held || rec.value("success_before", false);
    if (!held) continue;
    const auto kind = rec.value("kind", "");
    if (kind != "act") continue;
    const auto it = rec.find("action");
    if (it == rec.end() || !it->is_object()) continue;
    if (it->value("action_type", "") != "terminate") return true;
  }
  return false;
}

ShrCounts shr_counts(const Trace& t) {
  ShrCounts c;
  for (const auto& rec : t.records) {
    const auto gt = rec.find("ground_truth_index");
    const auto g = rec.find("grounding");
    if (gt == rec.end() || !gt->is_number_integer() || g == rec.end() || !g->is_object()) continue;
    ++c.labeled;
    const int truth = gt->get<int>();
    const auto& rows = g->at("per_candidate");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) best = std::max(best, num(r.at("log_prob")));
    int at_best = 0;
    bool truth_at_best = false;
    for (const auto& r : rows) {
      if (std::abs(num(r.at("log_prob")) - best) <= kTieEpsilon) {
        ++at_best;
        truth_at_best = truth_at_best || r.at("index").get<int>() == truth;
      }
    }
    if (at_best < 2 || !truth_at_best) continue;
    ++c.tied;
    if (g->at("node_index").get<int>() != truth) ++c.hallucinated;
  }
  return c;
}

std::optional<double> shr(const std::vector<Trace>& traces) {
  ShrCounts total;
  for (const auto& t : traces) {
    const auto c = shr_counts(t);
    total.tied += c.tied;
    total.hallucinated += c.hallucinated;
  }
  if (total.tied == 0) return std::nullopt;
  return static_cast<double>(total.hallucinated) / static_cast<double>(total.tied);
}

CostReport aggregate(const std::vector<Trace>& traces, const std::optional<RceBaseline>& baseline, bool image_streaming) {
  if (traces.empty()) throw AccountingError("aggregate needs at least one trace");
  std::set<std::string> schemas;
  for (const auto& t : traces) schemas.insert(t.header.value("schema", ""));
  if (schemas.size() != 1) throw AccountingError("traces mix schema versions");

  CostReport r;
  r.tasks = static_cast<int>(traces.size());
  long long calls = 0, tokens = 0, stepsum = 0, replan_tasks = 0, replan_sum = 0, ok = 0, hazards = 0;
  for (const auto& t : traces) {
    r.c_total_tokens += c_total(t);
    calls += cloud_calls(t);
    tokens += cloud_tokens(t);
    r.uplink_bytes += uplink_bytes(t);
    const auto e = uploaded_elements(t);
    r.elements_baseline += e.baseline;
    r.elements_ours += e.ours;
    stepsum += steps(t);
    const int rp = replans(t);
    replan_sum += rp;
    replan_tasks += rp > 0;
    ok += success(t);
    hazards += pch(t);
  }
  const double n = r.tasks;
  r.sr = static_cast<double>(ok) / n;
  r.mc = static_cast<double>(calls) / n;
  r.mt = static_cast<double>(tokens) / n;
  r.uplink_kb = static_cast<double>(r.uplink_bytes) / 1000.0;
  r.uplink_bytes_per_task = static_cast<double>(r.uplink_bytes) / n;
  r.avg_steps = static_cast<double>(stepsum) / n;
  r.replan_rate = static_cast<double>(replan_tasks) / n;
  r.avg_replans = static_cast<double>(replan_sum) / n;
  r.pch_rate = static_cast<double>(hazards) / n;
  r.shr = shr(traces);
  if (r.elements_baseline > 0) r.rr = reduction_rate(r.elements_baseline, r.elements_ours, &r.warnings);
  if (baseline) r.rce = rce(r.mt, image_streaming, baseline->mt, baseline->image_streaming);
  return r;
}

json to_json(const CostReport& r) {
  return {{"tasks", r.tasks},
          {"sr", r.sr},
          {"c_total_tokens", r.c_total_tokens},
          {"mc", r.mc},
          {"mt", r.mt},
          {"uplink_bytes", r.uplink_bytes},
          {"uplink_kb", r.uplink_kb},
          {"uplink_bytes_per_task", r.uplink_bytes_per_task},
          {"rce", r.rce},
          {"rr", r.rr},
          {"elements_baseline", r.elements_baseline},
          {"elements_ours", r.elements_ours},
          {"pch_rate", r.pch_rate},
          {"shr", r.shr ? json(*r.shr) : json("n/a")},
          {"replan_rate", r.replan_rate},
          {"avg_replans", r.avg_replans},
          {"avg_steps", r.avg_steps},
          {"warnings", r.warnings}};
}

std::string csv_header() {
  return "tasks,sr,c_total_tokens,mc,mt,uplink_kb,rce,rr,pch_rate,shr,replan_rate,avg_steps";
}

std::string csv_row(const CostReport& r) {
  std::ostringstream os;
  os << r.tasks << ',' << fmt(r.sr) << ',' << r.c_total_tokens << ',' << fmt(r.mc) << ',' << fmt(r.mt) << ','
     << fmt(r.uplink_kb) << ',' << fmt(r.rce) << ',' << fmt(r.rr) << ',' << fmt(r.pch_rate) << ','
     << (r.shr ? fmt(*r.shr) : "n/a") << ',' << fmt(r.replan_rate) << ',' << fmt(r.avg_steps);
  return os.str();
}

}  // namespace adec::metrics

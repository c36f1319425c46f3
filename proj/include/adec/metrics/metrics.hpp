#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace adec::metrics {

inline constexpr double kImagePenalty = 1.2;  // mu
inline constexpr double kTieEpsilon = 1e-9;

// One parsed adec-trace JSONL file.
struct Trace {
  nlohmann::json header;
  std::vector<nlohmann::json> records;
  nlohmann::json summary;
};

// AccountingError when the header or summary is missing (truncated file).
Trace parse_trace(const std::vector<nlohmann::json>& lines);
Trace load_trace(const std::filesystem::path& path);
// Every *.trace.jsonl under dir, in file-name order.
std::vector<Trace> load_trace_dir(const std::filesystem::path& dir);

// |L_cmd| + sum of transmitted |H_fail|.
long long c_total(const Trace& t);

long long cloud_calls(const Trace& t);
long long cloud_tokens(const Trace& t);  // prompt + completion of cloud calls
long long uplink_bytes(const Trace& t);  // request bytes of cloud calls
// Cloud-bound bytes outside plan/replan records. The protocol keeps this at 0.
long long stray_cloud_bytes(const Trace& t);
int termination_count(const Trace& t);
int replans(const Trace& t);
bool success(const Trace& t);
int steps(const Trace& t);

// Elements leaving the renderer on the grounding steps of a trace:
// `baseline` counts the full hierarchy a screen-uploading agent would send,
// `ours` the elements actually serialized into requests on the same steps.
struct ElementCounts {
  long long baseline = 0;
  long long ours = 0;
};
ElementCounts uploaded_elements(const Trace& t);

double rce(double mt_method, bool image_method, double mt_baseline, bool image_baseline, double mu = kImagePenalty);

// (e_base - e_ours) / e_base. A negative value is returned as is and noted in warnings.
double reduction_rate(long long e_baseline, long long e_ours, std::vector<std::string>* warnings = nullptr);

// a non-terminate action ran at or after a step where the task already held
bool pch(const Trace& t);

// Labeled grounding decisions whose best semantic score is shared by several
// candidates, and how many of those picked the wrong node.
struct ShrCounts {
  long long tied = 0;
  long long hallucinated = 0;
  long long labeled = 0;
};
ShrCounts shr_counts(const Trace& t);
// nullopt when no decision was labeled and tied (not applicable)
std::optional<double> shr(const std::vector<Trace>& traces);

struct CostReport {
  int tasks = 0;
  double sr = 0.0;
  long long c_total_tokens = 0;
  double mc = 0.0;
  double mt = 0.0;
  long long uplink_bytes = 0;          // total
  double uplink_kb = 0.0;              // total / 1000
  double uplink_bytes_per_task = 0.0;
  double rce = 1.0;
  double rr = 0.0;
  long long elements_baseline = 0;
  long long elements_ours = 0;
  double pch_rate = 0.0;
  std::optional<double> shr;
  double replan_rate = 0.0;            // fraction of tasks that replanned
  double avg_replans = 0.0;
  double avg_steps = 0.0;
  std::vector<std::string> warnings;
};

struct RceBaseline {
  double mt = 0.0;
  bool image_streaming = false;
};

// Per-task means for MC, MT, steps and replan rate; totals for bytes and tokens.
// Mixed schema versions raise AccountingError. Without a baseline rce is 1.
CostReport aggregate(const std::vector<Trace>& traces, const std::optional<RceBaseline>& baseline = std::nullopt,
                     bool image_streaming = false);

nlohmann::json to_json(const CostReport& r);
std::string csv_header();
std::string csv_row(const CostReport& r);

}  // namespace adec::metrics

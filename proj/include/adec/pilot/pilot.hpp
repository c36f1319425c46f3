#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adec/backends/interfaces.hpp"
#include "adec/backends/tokens.hpp"
#include "adec/grounding/grounding.hpp"
#include "adec/sim/task.hpp"
#include "adec/sim/world.hpp"
#include "json.hpp"

namespace adec::pilot {

enum class Ablation { no_executor, no_orchestrator, no_expectation, no_hit };
std::string_view to_string(Ablation a);
Ablation parse_ablation(std::string_view s);  // ConfigError on unknown names

struct PilotConfig {
  double tau = 0.85;
  double tau_qa = 0.9;
  int t_replan = 8;
  int t_max = 30;
  int replan_rounds = 1;  // R
  int inner_retries = 3;  // consecutive F_tact re-suggestions before giving up on the milestone
  bool hit_enabled = true;
  std::set<Ablation> ablation;
  grounding::GroundingConfig grounding;
  std::string success_token = "TASK_COMPLETE";
  int history_window = 5;  // recent actions shown to the orchestrator

  bool has(Ablation a) const { return ablation.count(a) > 0; }
  bool hit_active() const { return hit_enabled && !has(Ablation::no_hit); }
  void validate() const;  // ConfigError
};

nlohmann::json to_json(const PilotConfig& c);

enum class Phase { planning, executing, final_milestone, terminated };
std::string_view to_string(Phase p);

// How the run ended. priority is 1 or 2 for HIT terminations and 3 for the
// step limit (enforced with or without HIT); empty otherwise.
struct Termination {
  std::optional<int> priority;
  // hit_event | hit_plan_depleted | step_limit | explicit | replan_exhausted |
  // designer_error | backend_error | world_error
  std::string reason;
  std::string payload;
  int step = 0;
};

// One pilot iteration. `kind`: plan | act | ftact | observe | replan | fail | terminate.
// "observe" holds backend calls of an iteration that ended in termination
// before any action.
struct StepRecord {
  std::string kind;
  int step = 0;
  int milestone_index = -1;
  int plan_revision = 0;
  std::vector<std::pair<int, double>> alignments;  // (milestone index, S_t) in evaluation order
  std::optional<double> s_value;
  std::optional<backends::MetaInstruction> meta;
  std::optional<grounding::GroundingResult> grounding;
  std::optional<std::string> ftact;  // F_tact message
  std::optional<sim::Action> action;
  bool outcome_ok = false;
  std::string message;
  std::vector<sim::SystemEvent> events;
  std::vector<backends::BackendCallRecord> backend_calls;
  std::string state_summary;  // Q_t
  std::string screen;
  bool success_before = false;     // task predicate held before this step's action
  std::optional<int> tree_size;    // full hierarchy size at grounding time
  std::optional<int> ground_truth_index;
  std::string target;              // semantic target named by the meta-instruction
  std::optional<backends::FailureContext> failure;
  bool failure_transmitted = false;
  long long failure_tokens = 0;
  std::optional<Termination> termination;
  std::vector<std::string> warnings;
};

struct PilotState {
  backends::Plan plan;
  int step = 0;
  int milestone_steps = 0;
  Phase phase = Phase::planning;
  std::optional<Termination> termination;
  std::vector<int> failures;  // milestone indices with f_k = true
};

struct TaskResult {
  std::string task_id;
  bool success = false;
  std::vector<StepRecord> trace;
  Termination termination;
  PilotState state;
  long long instruction_tokens = 0;
  std::optional<std::string> error;
};

// Inputs of the termination cascade at one evaluation point.
struct HitInputs {
  bool final_phase_at_action = false;       // the last action ran during the final milestone
  std::vector<sim::SystemEvent> events;     // emitted by that action
  bool plan_depleted = false;               // cursor reached K
  sim::TaskCategory category = sim::TaskCategory::operation;
  std::optional<std::string> answer;        // answer_payload for QA
  int step = 0;
};

std::optional<Termination> hit_check(const HitInputs& in, const PilotConfig& cfg);

// H_fail from the last <= t_replan records of the failing milestone.
backends::FailureContext synthesize_failure_context(const backends::Milestone& failed,
                                                    const std::vector<StepRecord>& window, int t_replan,
                                                    const std::string& reason);

struct Backends {
  backends::Designer* designer = nullptr;
  backends::Orchestrator* orchestrator = nullptr;
  backends::ExecutorScorer* executor = nullptr;
};

struct RunOptions {
  backends::TokenCounter tokens;  // |L_cmd|, |H_fail|
};

TaskResult run_task(const sim::TaskSpec& task, sim::World& world, const Backends& backends, const PilotConfig& cfg,
                    const RunOptions& options = {});

}  // namespace adec::pilot

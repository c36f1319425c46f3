#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adec/backends/types.hpp"
#include "adec/sim/task.hpp"
#include "adec/sim/world.hpp"
#include "json.hpp"

namespace adec::backends {

// --- designer (cloud) -------------------------------------------------------

struct DesignRequest {
  std::string instruction;                 // L_cmd
  sim::TaskCategory category = sim::TaskCategory::operation;
  nlohmann::json metadata = nlohmann::json::object();  // C_m
  std::optional<FailureContext> failure;   // set on replan
  std::optional<Plan> previous;            // the plan that failed
};

struct DesignResult {
  Plan plan;
  BackendCallRecord record;
};

class Designer {
 public:
  virtual ~Designer() = default;
  virtual DesignResult plan(const DesignRequest& request) = 0;
};

// --- orchestrator (edge, visual) -------------------------------------------

struct AlignRequest {
  sim::VisualState visual;
  Milestone milestone;
  sim::TaskCategory category = sim::TaskCategory::operation;
  bool final_milestone = false;
  std::vector<std::string> history;
};

struct Alignment {
  double score = 0.0;  // S_t
  MetaStatus status = MetaStatus::ongoing;
  std::optional<std::string> answer;
  std::vector<BackendCallRecord> records;
  // A backend that answers align and suggest in one round trip leaves its
  // suggestion here; suggest() may reuse it.
  std::optional<MetaInstruction> proposal;
  std::vector<std::string> warnings;
};

struct SuggestRequest {
  sim::VisualState visual;
  Milestone milestone;
  double score = 0.0;                        // S_t from the preceding align
  std::optional<std::string> feedback;       // F_tact or a failed action's message
  std::vector<std::string> history;
  std::optional<MetaInstruction> previous;   // last suggestion for this milestone
  std::optional<MetaInstruction> cached;     // Alignment::proposal
};

struct SuggestResult {
  std::optional<MetaInstruction> meta;  // empty: the backend produced nothing usable
  std::vector<BackendCallRecord> records;
  std::vector<std::string> warnings;
};

// Used only when HIT is off: the orchestrator itself must decide to stop.
struct FinalizeRequest {
  sim::VisualState visual;
  Milestone milestone;
  sim::TaskCategory category = sim::TaskCategory::operation;
  int post_steps = 0;  // steps already taken since the plan ran out
  std::vector<std::string> history;
  nlohmann::json script = nlohmann::json::object();  // task oracle knobs
};

struct FinalizeResult {
  MetaInstruction meta;  // finished/answer_ready: stop; ongoing: act on meta.text
  std::vector<BackendCallRecord> records;
};

class Orchestrator {
 public:
  virtual ~Orchestrator() = default;
  virtual Alignment align(const AlignRequest& request) = 0;
  virtual SuggestResult suggest(const SuggestRequest& request) = 0;
  virtual FinalizeResult finalize(const FinalizeRequest& request) = 0;
};

// --- executor scorer (edge, textual) ----------------------------------------

struct ScoreRequest {
  MetaInstruction meta;
  Milestone milestone;
  const sim::UiTree* tree = nullptr;
  std::vector<int> candidates;  // U_t+, index order
};

struct ScoreSet {
  std::vector<double> log_probs;  // parallel to candidates
  bool abstain = false;           // no candidate fits at all
  std::string message;
  std::vector<BackendCallRecord> records;
};

class ExecutorScorer {
 public:
  virtual ~ExecutorScorer() = default;
  virtual ScoreSet score(const ScoreRequest& request) = 0;
};

struct BackendSet {
  std::shared_ptr<Designer> designer;
  std::shared_ptr<Orchestrator> orchestrator;
  std::shared_ptr<ExecutorScorer> executor;
};

// Keyword dispatcher: does the instruction read as a question?
bool is_question(const std::string& instruction,
                 const std::vector<std::string>& markers = {"who", "what", "when", "where", "how", "which", "?"});

}  // namespace adec::backends

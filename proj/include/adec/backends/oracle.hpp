#pragma once

#include "adec/backends/interfaces.hpp"
#include "adec/backends/tokens.hpp"

namespace adec::backends {

struct OracleOptions {
  TokenCounter tokens;
  double designer_latency_s = 2.0;  // text-modality cloud call
  std::vector<std::string> question_markers = {"who", "what", "when", "where", "how", "which", "?"};
};

// Plans by shortest path over the C_m workflow graph. Still renders the real
// prompt so token and byte accounting matches what a remote call would send.
class OracleDesigner : public Designer {
 public:
  explicit OracleDesigner(OracleOptions options = {}) : options_(std::move(options)) {}
  DesignResult plan(const DesignRequest& request) override;

 private:
  OracleOptions options_;
};

// Rule-based stand-in for the visual model; alignment is the feature fraction
// of the compiled expectation.
class OracleOrchestrator : public Orchestrator {
 public:
  explicit OracleOrchestrator(OracleOptions options = {}) : options_(std::move(options)) {}
  Alignment align(const AlignRequest& request) override;
  SuggestResult suggest(const SuggestRequest& request) override;
  FinalizeResult finalize(const FinalizeRequest& request) override;

 private:
  BackendCallRecord edge_record(const std::string& prompt, const std::string& completion) const;
  OracleOptions options_;
};

// Lexical similarity scorer, normalized over the candidates.
class OracleExecutor : public ExecutorScorer {
 public:
  explicit OracleExecutor(OracleOptions options = {}) : options_(std::move(options)) {}
  ScoreSet score(const ScoreRequest& request) override;

 private:
  OracleOptions options_;
};

BackendSet make_oracle_backends(const OracleOptions& options = {});

// Jaccard overlap of content tokens; exposed for tests.
double lexical_similarity(std::string_view a, std::string_view b);

// The readable one-line-per-node view the executor prompt carries.
std::string describe_candidates(const sim::UiTree& tree, const std::vector<int>& candidates);

// Compact plan text and trace text for the replan prompt.
std::string plan_text(const Plan& plan);
std::string trace_text(const FailureContext& failure);

// Prompt assembly shared by the oracle and remote backends, so both report
// the same payload for the same request.
struct DesignerPrompt {
  std::string system;  // C_m
  std::string user;    // rendered designer / designer_qa / replan template
};
DesignerPrompt designer_prompt(const DesignRequest& request, const std::vector<std::string>& question_markers);
std::string orchestrator_prompt(const Milestone& milestone, const std::vector<std::string>& history);
std::string executor_prompt(const ScoreRequest& request);
std::string history_text(const std::vector<std::string>& history);

}  // namespace adec::backends

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adec/backends/interfaces.hpp"
#include "adec/sim/action.hpp"
#include "adec/sim/ui_tree.hpp"
#include "json.hpp"

namespace adec::grounding {

struct GroundingConfig {
  enum class TieBreak { lowest_index };
  double alpha = 0.2;
  double score_floor = std::log(0.05);
  TieBreak tie_break = TieBreak::lowest_index;
};

struct CandidateScore {
  int index = -1;
  double log_prob = 0.0;
  double r_struct = 0.0;
  double objective = 0.0;
  bool operator==(const CandidateScore&) const = default;
};

// node_index is -1 for verbs that need no node (open_app, scroll, back, home).
struct GroundingResult {
  int node_index = -1;
  double objective = 0.0;
  sim::Action action;
  std::vector<CandidateScore> per_candidate;
  std::vector<backends::BackendCallRecord> records;
};

// F_tact: grounding refused to act.
struct TacticalFailure {
  std::string message;
  std::vector<CandidateScore> per_candidate;
  std::vector<backends::BackendCallRecord> records;
};

using GroundingOutcome = std::variant<GroundingResult, TacticalFailure>;

// U_t+: interactable nodes in index order.
std::vector<int> prune_candidates(const sim::UiTree& tree);

// Squared distance between normalized points; 0 when there is no reference.
double r_struct(sim::Point node_centroid, std::optional<sim::Point> p_ref);

GroundingOutcome ground(const backends::MetaInstruction& meta, const backends::Milestone& milestone,
                        const sim::UiTree& tree, backends::ExecutorScorer& scorer, const GroundingConfig& cfg);

// Exhaustive reference implementation; refuses more than 64 candidates.
GroundingOutcome brute_force_ground(const backends::MetaInstruction& meta, const backends::Milestone& milestone,
                                    const sim::UiTree& tree, backends::ExecutorScorer& scorer,
                                    const GroundingConfig& cfg);
constexpr std::size_t kBruteForceLimit = 64;

// Executor-less variant: click the interactable node nearest p_ref.
GroundingOutcome ground_by_coordinate(const backends::MetaInstruction& meta, const sim::UiTree& tree);

nlohmann::json to_json(const CandidateScore& c);

}  // namespace adec::grounding

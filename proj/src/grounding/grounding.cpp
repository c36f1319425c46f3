#include "adec/grounding/grounding.hpp"

#include <algorithm>
#include <sstream>

#include "adec/backends/intent.hpp"
#include "adec/error.hpp"

namespace adec::grounding {

using backends::Intent;

namespace {

bool in_unit_square(sim::Point p) { return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0; }

// Verb table. Node verbs get their node; the rest ignore the tree.
sim::Action assemble(const Intent& in, const sim::UiNode* node) {
  switch (in.verb) {
    case Intent::Verb::open_app: return sim::Action::open_app(in.app);
    case Intent::Verb::scroll: return sim::Action::scroll(in.direction);
    case Intent::Verb::back: return sim::Action::navigate_back();
    case Intent::Verb::home: return sim::Action::navigate_home();
    case Intent::Verb::long_press: return sim::Action::long_press(node->index);
    case Intent::Verb::swipe: return sim::Action::swipe(node->index, in.direction);
    case Intent::Verb::input:
      if (node->editable && !in.text.empty()) return sim::Action::input_text(node->index, in.text);
      return sim::Action::click(node->index);
    case Intent::Verb::click: break;
  }
  return sim::Action::click(node->index);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Scored {
  std::vector<CandidateScore> rows;
  std::vector<backends::BackendCallRecord> records;
  std::optional<std::string> failure;
};

// Shared front half: pruning, scoring, objective per candidate.
Scored evaluate(const backends::MetaInstruction& meta, const backends::Milestone& milestone, const sim::UiTree& tree,
                backends::ExecutorScorer& scorer, const GroundingConfig& cfg, const std::vector<int>& cands) {
  Scored out;
  if (cands.empty()) {
    out.failure = "no interactable element on screen";
    return out;
  }
  backends::ScoreRequest req{meta, milestone, &tree, cands};
  auto set = scorer.score(req);
  out.records = std::move(set.records);
  if (set.abstain) {
    out.failure = set.message.empty() ? "executor abstained" : set.message;
    return out;
  }
  if (set.log_probs.size() != cands.size()) {
    out.failure = "executor returned " + std::to_string(set.log_probs.size()) + " scores for " +
                  std::to_string(cands.size()) + " candidates";
    return out;
  }
  out.rows.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double r = r_struct(tree.normalized_centroid(cands[i]), meta.p_ref);
    out.rows.push_back({cands[i], set.log_probs[i], r, set.log_probs[i] - cfg.alpha * r});
  }
  return out;
}

GroundingOutcome finish(const Intent& in, const sim::UiTree& tree, const GroundingConfig& cfg, Scored s,
                        std::size_t winner) {
  const auto& best = s.rows[winner];
  if (!(best.objective >= cfg.score_floor)) {
    const std::string what = in.target.empty() ? std::string("the instruction") : "'" + in.target + "'";
    return TacticalFailure{"no node matched " + what + " (best objective " + fmt(best.objective) + " below floor " +
                               fmt(cfg.score_floor) + ")",
                           std::move(s.rows), std::move(s.records)};
  }
  GroundingResult r;
  r.node_index = best.index;
  r.objective = best.objective;
  r.action = assemble(in, &tree.at(best.index));
  r.per_candidate = std::move(s.rows);
  r.records = std::move(s.records);
  return r;
}

std::optional<GroundingOutcome> nodeless(const backends::MetaInstruction& meta, const Intent& in) {
  if (meta.status != backends::MetaStatus::ongoing) throw ContractViolation("grounding a terminal meta-instruction");
  if (in.needs_node()) return std::nullopt;
  GroundingResult r;
  r.action = assemble(in, nullptr);
  return r;
}

}  // namespace

std::vector<int> prune_candidates(const sim::UiTree& tree) {
  std::vector<int> out;
  for (const auto& n : tree.nodes()) {
    if (n.interactable) out.push_back(n.index);
  }
  return out;
}

double r_struct(sim::Point node, std::optional<sim::Point> p_ref) {
  if (!p_ref) return 0.0;
  if (!in_unit_square(node) || !in_unit_square(*p_ref)) throw ContractViolation("r_struct expects normalized points");
  const double dx = node.x - p_ref->x;
  const double dy = node.y - p_ref->y;
  return dx * dx + dy * dy;
}

GroundingOutcome ground(const backends::MetaInstruction& meta, const backends::Milestone& milestone,
                        const sim::UiTree& tree, backends::ExecutorScorer& scorer, const GroundingConfig& cfg) {
  const auto in = backends::parse_intent(meta.text);
  if (auto r = nodeless(meta, in)) return *r;
  auto s = evaluate(meta, milestone, tree, scorer, cfg, prune_candidates(tree));
  if (s.failure) return TacticalFailure{*s.failure, std::move(s.rows), std::move(s.records)};

  std::size_t best = 0;
  for (std::size_t i = 1; i < s.rows.size(); ++i) {
    if (s.rows[i].objective > s.rows[best].objective) best = i;  // strict: earlier index keeps ties
  }
  return finish(in, tree, cfg, std::move(s), best);
}

GroundingOutcome brute_force_ground(const backends::MetaInstruction& meta, const backends::Milestone& milestone,
                                    const sim::UiTree& tree, backends::ExecutorScorer& scorer,
                                    const GroundingConfig& cfg) {
  const auto in = backends::parse_intent(meta.text);
  if (auto r = nodeless(meta, in)) return *r;
  const auto cands = prune_candidates(tree);
  if (cands.size() > kBruteForceLimit) {
    throw ContractViolation("brute_force_ground refuses " + std::to_string(cands.size()) + " candidates");
  }
  auto s = evaluate(meta, milestone, tree, scorer, cfg, cands);
  if (s.failure) return TacticalFailure{*s.failure, std::move(s.rows), std::move(s.records)};

  // every candidate against every other: the winner beats all later ones and
  // is not beaten by any earlier one
  std::size_t winner = s.rows.size();
  for (std::size_t i = 0; i < s.rows.size() && winner == s.rows.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < s.rows.size() && ok; ++j) {
      if (j == i) continue;
      ok = j < i ? s.rows[i].objective > s.rows[j].objective : s.rows[i].objective >= s.rows[j].objective;
    }
    if (ok) winner = i;
  }
  if (winner == s.rows.size()) winner = 0;  // NaN everywhere; the floor check rejects it
  return finish(in, tree, cfg, std::move(s), winner);
}

GroundingOutcome ground_by_coordinate(const backends::MetaInstruction& meta, const sim::UiTree& tree) {
  const auto in = backends::parse_intent(meta.text);
  if (auto r = nodeless(meta, in)) return *r;
  if (!meta.p_ref) return TacticalFailure{"no spatial reference to click", {}, {}};
  const auto cands = prune_candidates(tree);
  if (cands.empty()) return TacticalFailure{"no interactable element on screen", {}, {}};
  std::vector<CandidateScore> rows;
  std::size_t best = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double r = r_struct(tree.normalized_centroid(cands[i]), meta.p_ref);
    rows.push_back({cands[i], 0.0, r, -r});
    if (rows[i].objective > rows[best].objective) best = i;
  }
  GroundingResult out;
  out.node_index = rows[best].index;
  out.objective = rows[best].objective;
  out.action = assemble(in, &tree.at(out.node_index));
  out.per_candidate = std::move(rows);
  return out;
}

nlohmann::json to_json(const CandidateScore& c) {
  return {{"index", c.index}, {"log_prob", c.log_prob}, {"r_struct", c.r_struct}, {"objective", c.objective}};
}

}  // namespace adec::grounding

#include "adec/pilot/pilot.hpp"

#include <algorithm>
#include <deque>

#include "adec/backends/intent.hpp"
#include "adec/error.hpp"

namespace adec::pilot {

using backends::MetaStatus;
using nlohmann::json;

namespace {

const char* const kAblationNames[] = {"no_executor", "no_orchestrator", "no_expectation", "no_hit"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

bool success_signal(const sim::SystemEvent& e) {
  return e.kind == sim::EventKind::toast || e.kind == sim::EventKind::notification;
}

// Mutable bookkeeping of one run that is not part of PilotState proper.
struct Loop {
  std::optional<std::string> feedback;
  std::optional<backends::MetaInstruction> previous;
  int consecutive_ftact = 0;
  bool exhausted = false;  // orchestrator or inner loop gave up on the milestone
  std::string exhausted_reason;
  std::vector<std::size_t> window;  // trace indices of act/ftact records for the active milestone
  std::deque<std::string> history;
  std::vector<sim::SystemEvent> last_events;
  bool final_at_action = false;
  std::optional<std::string> answer;
  int post_steps = 0;

  void reset_milestone() {
    feedback.reset();
    previous.reset();
    consecutive_ftact = 0;
    exhausted = false;
    exhausted_reason.clear();
    window.clear();
  }
};

Phase phase_of(const backends::Plan& p) {
  if (p.exhausted()) return Phase::executing;
  return p.final_phase() ? Phase::final_milestone : Phase::executing;
}

std::vector<std::string> as_vector(const std::deque<std::string>& d) { return {d.begin(), d.end()}; }

}  // namespace

std::string_view to_string(Ablation a) { return kAblationNames[static_cast<int>(a)]; }

Ablation parse_ablation(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kAblationNames[i]) return static_cast<Ablation>(i);
  }
  throw ConfigError("unknown ablation \"" + std::string(s) + "\"");
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::planning: return "planning";
    case Phase::executing: return "executing";
    case Phase::final_milestone: return "final_milestone";
    case Phase::terminated: return "terminated";
  }
  return "?";
}

void PilotConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
  if (!(tau_qa > 0.0 && tau_qa <= 1.0)) throw ConfigError("tau_qa must be in (0, 1]");
  if (t_replan < 1) throw ConfigError("t_replan must be at least 1");
  if (t_replan > t_max) throw ConfigError("t_replan must not exceed t_max");
  if (replan_rounds < 0) throw ConfigError("replan rounds must be non-negative");
  if (inner_retries < 0) throw ConfigError("inner_retries must be non-negative");
  if (grounding.alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (has(Ablation::no_executor) && has(Ablation::no_orchestrator)) {
    throw ConfigError("no_executor and no_orchestrator cannot be combined");
  }
}

json to_json(const PilotConfig& c) {
  auto abl = json::array();
  for (auto a : c.ablation) abl.push_back(std::string(to_string(a)));
  return {{"tau", c.tau},
          {"tau_qa", c.tau_qa},
          {"t_replan", c.t_replan},
          {"t_max", c.t_max},
          {"replan_rounds", c.replan_rounds},
          {"inner_retries", c.inner_retries},
          {"hit_enabled", c.hit_enabled},
          {"ablation", abl},
          {"alpha", c.grounding.alpha},
          {"score_floor", c.grounding.score_floor}};
}

std::optional<Termination> hit_check(const HitInputs& in, const PilotConfig& cfg) {
  const bool qa = in.category == sim::TaskCategory::question_answer;
  const std::string payload = qa ? in.answer.value_or("") : cfg.success_token;
  if (in.final_phase_at_action && std::any_of(in.events.begin(), in.events.end(), success_signal)) {
    return Termination{1, "hit_event", payload, in.step};
  }
  if (in.plan_depleted) return Termination{2, "hit_plan_depleted", payload, in.step};
  if (in.step >= cfg.t_max) return Termination{3, "step_limit", "", in.step};
  return std::nullopt;
}

backends::FailureContext synthesize_failure_context(const backends::Milestone& failed,
                                                    const std::vector<StepRecord>& window, int t_replan,
                                                    const std::string& reason) {
  backends::FailureContext f;
  f.failed_milestone = failed;
  f.reason = reason;
  const std::size_t keep = std::min(window.size(), static_cast<std::size_t>(std::max(t_replan, 0)));
  for (std::size_t i = window.size() - keep; i < window.size(); ++i) {
    f.trajectory.push_back({window[i].state_summary, window[i].action});
  }
  return f;
}

TaskResult run_task(const sim::TaskSpec& task, sim::World& world, const Backends& be, const PilotConfig& cfg,
                    const RunOptions& options) {
  cfg.validate();
  if (!be.designer || (!be.orchestrator && !cfg.has(Ablation::no_orchestrator)) ||
      (!be.executor && !cfg.has(Ablation::no_executor))) {
    throw ConfigError("pilot is missing a backend");
  }
  const bool qa = task.category == sim::TaskCategory::question_answer;
  TaskResult res;
  res.task_id = task.task_id;
  res.instruction_tokens = options.tokens.count(task.instruction);
  auto& st = res.state;
  auto& trace = res.trace;
  Loop loop;

  auto finish = [&](Termination term) {
    StepRecord rec;
    rec.kind = "terminate";
    rec.step = st.step;
    rec.milestone_index = st.plan.cursor;
    rec.plan_revision = st.plan.revision;
    term.step = st.step;
    const auto action = sim::Action::terminate(term.payload);
    if (!world.terminated()) {
      try {
        world.apply_action(action);
        rec.action = action;
        rec.outcome_ok = true;
      } catch (const WorldError& e) {
        rec.message = e.what();
      }
    }
    rec.termination = term;
    trace.push_back(std::move(rec));
    const bool protocol_end = term.reason == "hit_event" || term.reason == "hit_plan_depleted" || term.reason == "explicit";
    res.success = protocol_end && sim::check_success(world, task, term.payload);
    res.termination = term;
    st.termination = term;
    st.phase = Phase::terminated;
  };

  // --- strategic projection -------------------------------------------------
  {
    StepRecord rec;
    rec.kind = "plan";
    try {
      auto d = be.designer->plan({task.instruction, task.category, task.app_metadata, std::nullopt, std::nullopt});
      rec.backend_calls.push_back(d.record);
      st.plan = std::move(d.plan);
      rec.plan_revision = st.plan.revision;
      rec.outcome_ok = true;
      trace.push_back(std::move(rec));
    } catch (const BackendError& e) {
      rec.message = e.what();
      res.error = e.what();
      trace.push_back(std::move(rec));
      finish({std::nullopt, "designer_error", "", 0});
      return res;
    }
  }
  st.phase = phase_of(st.plan);

  while (true) {
    const int t = st.step + 1;
    StepRecord rec;
    rec.step = t;
    rec.plan_revision = st.plan.revision;
    sim::Observation obs;
    try {
      world.begin_step(t);
      obs = world.observe();
    } catch (const Error& e) {
      res.error = e.what();
      finish({std::nullopt, "world_error", "", st.step});
      return res;
    }
    rec.screen = obs.visual.screen_id;
    rec.state_summary = sim::summarize(obs.visual);
    rec.success_before = qa ? sim::answer_visible(obs.visual, task) : sim::check_success(world, task, std::nullopt);

    // --- alignment gate ---------------------------------------------------------
    backends::Alignment last;
    try {
      if (!cfg.has(Ablation::no_orchestrator)) {
        while (!st.plan.exhausted()) {
          const int k = st.plan.cursor;
          const bool final_k = st.plan.final_phase();
          auto m = st.plan.active();
          if (cfg.has(Ablation::no_expectation)) m.expectation.clear();
          auto al = be.orchestrator->align({obs.visual, m, task.category, final_k, as_vector(loop.history)});
          for (auto& r : al.records) rec.backend_calls.push_back(r);
          for (auto& w : al.warnings) rec.warnings.push_back(w);
          rec.alignments.emplace_back(k, al.score);
          rec.s_value = al.score;
          const double gate = (qa && final_k) ? cfg.tau_qa : cfg.tau;
          if (al.score >= gate) {
            if (qa && final_k) loop.answer = al.answer;
            ++st.plan.cursor;
            st.milestone_steps = 0;
            loop.reset_milestone();
            continue;
          }
          last = std::move(al);
          break;
        }
      } else if (!st.plan.exhausted()) {
        rec.s_value = 0.0;  // blind execution: nothing certifies progress
        rec.alignments.emplace_back(st.plan.cursor, 0.0);
      }
    } catch (const BackendError& e) {
      rec.kind = "fail";
      rec.message = e.what();
      trace.push_back(std::move(rec));
      res.error = e.what();
      finish({std::nullopt, "backend_error", "", st.step});
      return res;
    }
    st.phase = phase_of(st.plan);
    rec.milestone_index = st.plan.cursor;

    // --- termination cascade ------------------------------------------------------
    HitInputs hit{loop.final_at_action, loop.last_events, st.plan.exhausted(), task.category, loop.answer, st.step};
    loop.last_events.clear();
    loop.final_at_action = false;
    std::optional<Termination> term;
    if (cfg.hit_active()) {
      term = hit_check(hit, cfg);
    } else if (st.step >= cfg.t_max) {
      term = Termination{3, "step_limit", "", st.step};
    }
    if (term) {
      if (!rec.backend_calls.empty() || !rec.alignments.empty()) {
        rec.kind = "observe";
        trace.push_back(std::move(rec));
      }
      finish(*term);
      return res;
    }

    // --- outer loop: budget circuit breaker ------------------------------------
    if (!st.plan.exhausted() && (st.milestone_steps >= cfg.t_replan || loop.exhausted)) {
      const int k = st.plan.cursor;
      st.failures.push_back(k);
      std::vector<StepRecord> window;
      for (auto i : loop.window) window.push_back(trace[i]);
      const std::string reason =
          loop.exhausted ? loop.exhausted_reason : "milestone not reached within " + std::to_string(cfg.t_replan) + " steps";
      auto ctx = synthesize_failure_context(st.plan.active(), window, cfg.t_replan, reason);
      rec.failure_tokens = options.tokens.count(backends::serialize(ctx));
      rec.failure = ctx;
      rec.step = st.step;
      if (st.plan.revision < cfg.replan_rounds) {
        rec.kind = "replan";
        try {
          auto d = be.designer->plan({task.instruction, task.category, task.app_metadata, ctx, st.plan});
          rec.backend_calls.push_back(d.record);
          rec.failure_transmitted = true;
          st.plan = std::move(d.plan);
          st.plan.cursor = 0;
          rec.plan_revision = st.plan.revision;
          rec.outcome_ok = true;
        } catch (const BackendError& e) {
          rec.failure_transmitted = true;  // the payload left the device even though the reply was unusable
          rec.message = e.what();
          trace.push_back(std::move(rec));
          res.error = e.what();
          finish({std::nullopt, "designer_error", "", st.step});
          return res;
        }
        trace.push_back(std::move(rec));
        st.milestone_steps = 0;
        loop.reset_milestone();
        loop.answer.reset();
        st.phase = phase_of(st.plan);
        continue;
      }
      rec.kind = "fail";
      rec.message = "replan budget exhausted";
      trace.push_back(std::move(rec));
      finish({std::nullopt, "replan_exhausted", "", st.step});
      return res;
    }

    // --- meta-instruction -------------------------------------------------------
    std::optional<backends::MetaInstruction> meta;
    backends::Milestone milestone = st.plan.exhausted() ? st.plan.milestones.back() : st.plan.active();
    try {
      if (cfg.has(Ablation::no_orchestrator)) {
        backends::MetaInstruction m;
        m.text = milestone.instruction;
        meta = m;
      } else if (st.plan.exhausted()) {
        // HIT off: only the orchestrator's own verdict ends the run
        auto fr = be.orchestrator->finalize({obs.visual, milestone, task.category, loop.post_steps,
                                             as_vector(loop.history), task.oracle});
        for (auto& r : fr.records) rec.backend_calls.push_back(r);
        if (fr.meta.status != MetaStatus::ongoing) {
          rec.kind = "observe";
          trace.push_back(std::move(rec));
          finish({std::nullopt, "explicit", fr.meta.answer.value_or(qa ? "" : cfg.success_token), st.step});
          return res;
        }
        meta = fr.meta;
      } else {
        if (cfg.has(Ablation::no_expectation)) milestone.expectation.clear();
        backends::SuggestRequest sreq{obs.visual, milestone,     last.score, loop.feedback, as_vector(loop.history),
                                      loop.previous, last.proposal};
        auto sr = be.orchestrator->suggest(sreq);
        for (auto& r : sr.records) rec.backend_calls.push_back(r);
        for (auto& w : sr.warnings) rec.warnings.push_back(w);
        if (sr.meta && !sr.meta->text.empty()) meta = sr.meta;
      }
    } catch (const BackendError& e) {
      rec.kind = "fail";
      rec.message = e.what();
      trace.push_back(std::move(rec));
      res.error = e.what();
      finish({std::nullopt, "backend_error", "", st.step});
      return res;
    }

    st.step = t;
    if (!st.plan.exhausted()) ++st.milestone_steps;
    if (st.plan.exhausted()) ++loop.post_steps;

    if (!meta) {
      rec.kind = "ftact";
      rec.ftact = "orchestrator produced no suggestion";
      loop.exhausted = true;
      loop.exhausted_reason = "orchestrator exhausted";
      loop.window.push_back(trace.size());
      trace.push_back(std::move(rec));
      continue;
    }
    meta->status = MetaStatus::ongoing;
    rec.meta = meta;
    loop.previous = meta;
    const auto intent = backends::parse_intent(meta->text);
    rec.target = intent.target;

    // --- grounding ------------------------------------------------------------------
    grounding::GroundingOutcome outcome;
    try {
      outcome = cfg.has(Ablation::no_executor)
                    ? grounding::ground_by_coordinate(*meta, obs.tree)
                    : grounding::ground(*meta, milestone, obs.tree, *be.executor, cfg.grounding);
    } catch (const BackendError& e) {
      outcome = grounding::TacticalFailure{std::string("executor error: ") + e.what(), {}, {}};
    }
    if (intent.needs_node()) {
      rec.tree_size = static_cast<int>(obs.tree.size());
      for (const auto& gt : task.ground_truth_targets) {
        if (gt.screen != rec.screen || !iequals(gt.target, intent.target)) continue;
        const int idx = obs.tree.find_by_resource_id(gt.node_id);
        if (idx >= 0) rec.ground_truth_index = idx;
        break;
      }
    }

    if (auto* fail = std::get_if<grounding::TacticalFailure>(&outcome)) {
      rec.kind = "ftact";
      rec.ftact = fail->message;
      for (auto& r : fail->records) rec.backend_calls.push_back(r);
      rec.grounding = grounding::GroundingResult{-1, 0.0, {}, fail->per_candidate, {}};
      loop.feedback = fail->message;
      if (++loop.consecutive_ftact > cfg.inner_retries) {
        loop.exhausted = true;
        loop.exhausted_reason = "inner loop exhausted: " + fail->message;
      }
      loop.history.push_back("F_tact: " + fail->message);
    } else {
      auto& g = std::get<grounding::GroundingResult>(outcome);
      for (auto& r : g.records) rec.backend_calls.push_back(r);
      g.records.clear();
      rec.kind = "act";
      rec.action = g.action;
      rec.grounding = g;
      const bool final_now = st.phase == Phase::final_milestone;
      try {
        auto out = world.apply_action(g.action);
        rec.outcome_ok = out.ok;
        rec.message = out.message;
        rec.events = out.events;
        loop.last_events = out.events;
        loop.final_at_action = final_now;
      } catch (const Error& e) {
        rec.message = e.what();
        loop.window.push_back(trace.size());
        trace.push_back(std::move(rec));
        res.error = e.what();
        finish({std::nullopt, "world_error", "", st.step});
        return res;
      }
      if (rec.outcome_ok) {
        loop.feedback.reset();
        loop.consecutive_ftact = 0;
      } else {
        loop.feedback = rec.message.empty() ? "action had no effect" : rec.message;
      }
      loop.history.push_back(sim::describe(g.action));
    }
    while (static_cast<int>(loop.history.size()) > cfg.history_window) loop.history.pop_front();
    loop.window.push_back(trace.size());
    trace.push_back(std::move(rec));
  }
}

}  // namespace adec::pilot

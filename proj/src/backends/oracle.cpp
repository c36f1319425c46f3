#include "adec/backends/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <regex>
#include <set>

#include "adec/backends/expectation.hpp"
#include "adec/backends/intent.hpp"
#include "adec/backends/prompts.hpp"
#include "adec/backends/response.hpp"
#include "adec/error.hpp"

namespace adec::backends {

using nlohmann::json;

namespace {

constexpr const char* kHomeExpectation = "The home screen is visible.";

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string substitute(std::string s, const std::map<std::string, std::string>& params) {
  for (const auto& [k, v] : params) {
    const std::string key = "{" + k + "}";
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + v.size())) s.replace(pos, key.size(), v);
  }
  return s;
}

// Shortest milestone chain from "home" to the goal state of the first
// capability that matches the instruction.
std::vector<Milestone> workflow_plan(const json& meta, const std::string& instruction) {
  std::map<std::string, std::string> params;
  std::string goal;
  for (const auto& app : meta.value("apps", json::array())) {
    for (const auto& cap : app.value("capabilities", json::array())) {
      if (cap.contains("pattern")) {
        std::smatch m;
        const std::regex re(cap["pattern"].get<std::string>(), std::regex::icase);
        if (!std::regex_search(instruction, m, re)) continue;
        const auto bind = cap.value("bind", json::array());
        for (std::size_t i = 0; i < bind.size() && i + 1 < m.size(); ++i) params[bind[i].get<std::string>()] = m[i + 1].str();
      } else {
        const auto words = cap.value("keywords", json::array());
        if (words.empty()) continue;
        const auto low = lower(instruction);
        const bool all = std::all_of(words.begin(), words.end(), [&](const json& w) {
          return low.find(lower(w.get<std::string>())) != std::string::npos;
        });
        if (!all) continue;
      }
      goal = cap.value("goal", "");
      break;
    }
    if (!goal.empty()) break;
  }
  if (goal.empty()) throw PlanningInfeasible("no capability in the application metadata matches the instruction");

  std::map<std::string, std::string> expectations = {{"home", kHomeExpectation}};
  for (const auto& s : meta.value("states", json::array())) {
    expectations[s.at("id").get<std::string>()] = s.at("expectation").get<std::string>();
  }
  const auto edges = meta.value("edges", json::array());

  std::map<std::string, int> via;  // state -> edge index that reached it
  std::deque<std::string> queue{"home"};
  via["home"] = -1;
  while (!queue.empty() && !via.count(goal)) {
    const auto cur = queue.front();
    queue.pop_front();
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto from = edges[i].at("from").get<std::string>();
      const auto to = edges[i].at("to").get<std::string>();
      if (from != cur || via.count(to)) continue;
      via[to] = static_cast<int>(i);
      queue.push_back(to);
    }
  }
  if (!via.count(goal)) throw PlanningInfeasible("no workflow path from home to \"" + goal + "\"");

  std::vector<Milestone> out;
  for (std::string s = goal; via[s] >= 0;) {
    const auto& e = edges[static_cast<std::size_t>(via[s])];
    const auto to = e.at("to").get<std::string>();
    auto exp = e.contains("expectation") ? e["expectation"].get<std::string>() : expectations[to];
    out.push_back({substitute(e.at("instruction").get<std::string>(), params), substitute(exp, params)});
    s = e.at("from").get<std::string>();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string pixel_ref(const sim::Rect& r) {
  const auto c = r.centroid();
  return "[" + std::to_string(static_cast<int>(std::lround(c.x))) + ", " +
         std::to_string(static_cast<int>(std::lround(c.y))) + "]";
}

std::string element_name(const sim::VisualElement& e) { return e.text.empty() ? e.label : e.text; }

MetaInstruction make_meta(const std::string& text, const sim::VisualState& v, const sim::Rect* target) {
  MetaInstruction m;
  m.text = text;
  m.raw_observation = sim::summarize(v);
  if (target) m.p_ref = parse_spatial_reference(pixel_ref(*target), v.pixel_size);
  return m;
}

const std::set<std::string>& confirm_group() {
  static const std::set<std::string> g = {"save", "done", "ok", "confirm", "apply", "submit"};
  return g;
}

bool in_confirm_group(const std::string& phrase) {
  for (const auto& t : content_tokens(phrase)) {
    if (confirm_group().count(t)) return true;
  }
  return false;
}

std::string strip_period(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
  return s;
}

std::optional<std::string> first_quoted(const std::string& s) {
  static const std::regex re(R"('([^']+)')");
  std::smatch m;
  if (std::regex_search(s, m, re)) return m[1].str();
  return std::nullopt;
}

}  // namespace

bool is_question(const std::string& instruction, const std::vector<std::string>& markers) {
  const auto low = lower(instruction);
  for (const auto& mk : markers) {
    if (mk == "?") {
      if (low.find('?') != std::string::npos) return true;
      continue;
    }
    static const std::regex word_re(R"([a-z']+)");
    for (auto it = std::sregex_iterator(low.begin(), low.end(), word_re); it != std::sregex_iterator(); ++it) {
      if (it->str() == mk) return true;
    }
  }
  return false;
}

double lexical_similarity(std::string_view a, std::string_view b) {
  const auto ta = content_tokens(a);
  const auto tb = content_tokens(b);
  if (ta.empty() || tb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : ta) inter += static_cast<std::size_t>(std::count(tb.begin(), tb.end(), t));
  const std::size_t uni = ta.size() + tb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::string describe_candidates(const sim::UiTree& tree, const std::vector<int>& candidates) {
  std::string s;
  for (int i : candidates) {
    const auto& n = tree.at(i);
    s += "[" + std::to_string(i) + "] " + n.class_name;
    if (!n.text.empty()) s += " \"" + n.text + "\"";
    if (!n.content_desc.empty()) s += " desc=\"" + n.content_desc + "\"";
    if (n.editable) s += " editable";
    s += " bounds=" + sim::to_json(n.bounds).dump() + "\n";
  }
  return s;
}

std::string plan_text(const Plan& plan) {
  auto arr = json::array();
  for (const auto& m : plan.milestones) arr.push_back(to_json(m));
  return arr.dump(2);
}

std::string trace_text(const FailureContext& failure) {
  std::string s = "[Failed Milestone] " + failure.failed_milestone.instruction + " / " +
                  failure.failed_milestone.expectation + "\n";
  for (const auto& e : failure.trajectory) {
    s += "[Orchestrator Thought] " + e.summary + "\n";
    s += "[Action] " + (e.action ? sim::describe(*e.action) : std::string("none (tactical failure)")) + "\n";
  }
  s += "[Reason] " + failure.reason;
  return s;
}

std::string history_text(const std::vector<std::string>& history) {
  if (history.empty()) return "(none)";
  std::string s;
  for (const auto& h : history) s += "- " + h + "\n";
  s.pop_back();
  return s;
}

DesignerPrompt designer_prompt(const DesignRequest& req, const std::vector<std::string>& markers) {
  DesignerPrompt p;
  p.system = "application metadata:\n" + req.metadata.dump();
  if (req.failure) {
    const Plan previous = req.previous.value_or(Plan{});
    p.user = render_prompt("replan", {{"goal", req.instruction},
                                      {"old_plan", plan_text(previous)},
                                      {"trace", trace_text(*req.failure)}});
  } else {
    const bool qa = req.category == sim::TaskCategory::question_answer || is_question(req.instruction, markers);
    p.user = render_prompt(qa ? "designer_qa" : "designer", {{"task_instruction", req.instruction}});
  }
  return p;
}

std::string orchestrator_prompt(const Milestone& m, const std::vector<std::string>& history) {
  if (m.expectation.empty()) {
    return render_prompt("orchestrator_no_expectation", {{"sub_goal", m.instruction}, {"history", history_text(history)}});
  }
  return render_prompt("orchestrator",
                       {{"sub_goal", m.instruction}, {"expectation", m.expectation}, {"history", history_text(history)}});
}

std::string executor_prompt(const ScoreRequest& req) {
  std::string p_ref = "none";
  if (req.meta.p_ref && req.tree) {
    const auto px = req.tree->screen();
    p_ref = "[" + std::to_string(static_cast<int>(std::lround(req.meta.p_ref->x * px.width))) + ", " +
            std::to_string(static_cast<int>(std::lround(req.meta.p_ref->y * px.height))) + "]";
  }
  return render_prompt("executor", {{"sub_goal", req.milestone.instruction},
                                    {"hint_text", req.meta.text},
                                    {"p_ref", p_ref},
                                    {"ui_tree", req.tree ? describe_candidates(*req.tree, req.candidates) : ""}});
}

// --- designer ---------------------------------------------------------------

DesignResult OracleDesigner::plan(const DesignRequest& req) {
  if (req.instruction.empty()) throw DesignerError("empty task instruction");

  const auto [system, user] = designer_prompt(req, options_.question_markers);

  auto milestones = workflow_plan(req.metadata, req.instruction);
  if (req.failure) milestones.insert(milestones.begin(), Milestone{"Navigate Home.", kHomeExpectation});
  validate_plan(milestones);

  auto completion = json::array();
  for (const auto& m : milestones) completion.push_back(to_json(m));
  const std::string reply = completion.dump();

  DesignResult out;
  out.plan.milestones = std::move(milestones);
  out.plan.cursor = 0;
  out.plan.revision = req.failure ? (req.previous ? req.previous->revision + 1 : 1) : 0;
  auto& r = out.record;
  r.role = Role::designer;
  r.location = Location::cloud;
  r.prompt_tokens = options_.tokens.count(system) + options_.tokens.count(user);
  r.completion_tokens = options_.tokens.count(reply);
  r.payload_bytes = static_cast<long long>(system.size() + user.size());
  r.latency_s = options_.designer_latency_s;
  r.uploaded_elements = 0;
  return out;
}

// --- orchestrator -------------------------------------------------------------

BackendCallRecord OracleOrchestrator::edge_record(const std::string& prompt, const std::string& completion) const {
  BackendCallRecord r;
  r.role = Role::orchestrator;
  r.location = Location::edge;
  r.prompt_tokens = options_.tokens.count(prompt);
  r.completion_tokens = options_.tokens.count(completion);
  r.payload_bytes = static_cast<long long>(prompt.size());
  return r;
}

Alignment OracleOrchestrator::align(const AlignRequest& req) {
  Alignment out;
  const auto compiled = compile_expectation(req.milestone.expectation);
  const auto match = match_expectation(compiled, req.visual);
  out.score = match.score;
  out.answer = match.answer;
  if (match.score >= 1.0) {
    out.status = (req.category == sim::TaskCategory::question_answer && req.final_milestone && match.answer)
                     ? MetaStatus::answer_ready
                     : MetaStatus::finished;
  }
  const std::string prompt = orchestrator_prompt(req.milestone, req.history);
  const json reply = {{"observation", sim::summarize(req.visual)},
                      {"status", out.status == MetaStatus::ongoing ? "ONGOING" : "FINISHED"},
                      {"finished_probability", out.score}};
  out.records.push_back(edge_record(prompt, reply.dump()));
  return out;
}

SuggestResult OracleOrchestrator::suggest(const SuggestRequest& req) {
  if (!req.feedback && req.score >= 1.0) {
    throw ContractViolation("suggest called for a milestone that is already satisfied");
  }
  const auto& v = req.visual;
  std::vector<MetaInstruction> options;

  if (req.feedback) {
    for (const auto& e : v.elements) {
      if (e.in_dialog && e.clickable) options.push_back(make_meta("tap '" + element_name(e) + "'", v, &e.bounds));
    }
    std::string failed = first_quoted(*req.feedback).value_or("");
    if (failed.empty() && req.previous) failed = parse_intent(req.previous->text).target;
    if (in_confirm_group(failed)) {
      for (const auto& e : v.elements) {
        const auto name = element_name(e);
        if (!e.clickable || e.in_dialog || lower(name) == lower(failed)) continue;
        if (confirm_group().count(lower(name))) options.push_back(make_meta("tap '" + name + "'", v, &e.bounds));
      }
    }
    if (v.can_scroll_down) options.push_back(make_meta("scroll down", v, nullptr));
    options.push_back(make_meta("navigate_back", v, nullptr));
  } else {
    const auto compiled = compile_expectation(req.milestone.expectation);
    const auto match = match_expectation(compiled, v);
    for (std::size_t i = 0; i < compiled.features.size() && options.empty(); ++i) {
      if (match.matched[i]) continue;
      const auto& f = compiled.features[i];
      if (f.kind == Feature::Kind::home) options.push_back(make_meta("navigate_home", v, nullptr));
    }
    for (std::size_t i = 0; i < compiled.features.size() && options.empty(); ++i) {
      if (match.matched[i]) continue;
      const auto& f = compiled.features[i];
      if (f.kind == Feature::Kind::app && lower(v.app_name) != lower(f.label)) {
        options.push_back(make_meta("open_app " + f.label, v, nullptr));
      }
    }
    for (std::size_t i = 0; i < compiled.features.size() && options.empty(); ++i) {
      if (match.matched[i]) continue;
      const auto& f = compiled.features[i];
      if (f.kind != Feature::Kind::field && f.kind != Feature::Kind::widget) continue;
      for (const auto& e : v.elements) {
        const bool field = f.kind == Feature::Kind::field && e.widget.rfind("field:", 0) == 0;
        const bool toggle = f.kind == Feature::Kind::widget && e.widget.rfind("toggle:", 0) == 0;
        if (!field && !toggle) continue;
        if (lower(e.label) != lower(f.label) && lower(e.text) != lower(f.label)) continue;
        options.push_back(field ? make_meta("type '" + f.value + "' into '" + f.label + "'", v, &e.bounds)
                                : make_meta("tap '" + f.label + "'", v, &e.bounds));
        break;
      }
    }
    if (options.empty()) {
      const auto goal = content_tokens(req.milestone.instruction);
      const auto expect = content_tokens(req.milestone.expectation);
      // own text and label rank first; sibling context only breaks ties
      const auto overlap = [&](const std::string& text) {
        int score = 0;
        for (const auto& t : content_tokens(text)) {
          if (std::find(goal.begin(), goal.end(), t) != goal.end()) score += 2;
          if (std::find(expect.begin(), expect.end(), t) != expect.end()) score += 1;
        }
        return score;
      };
      const sim::VisualElement* best = nullptr;
      std::pair<int, int> best_score{0, 0};
      for (const auto& e : v.elements) {
        if (!e.clickable || e.widget.rfind("field:", 0) == 0) continue;
        const std::pair<int, int> score{overlap(e.text + " " + e.label), overlap(e.context)};
        if (score.first > 0 && score > best_score) {
          best_score = score;
          best = &e;
        }
      }
      if (best) options.push_back(make_meta("tap '" + element_name(*best) + "'", v, &best->bounds));
    }
    if (options.empty()) options.push_back(make_meta("tap '" + strip_period(req.milestone.instruction) + "'", v, nullptr));
  }

  SuggestResult out;
  for (auto& o : options) {
    if (req.feedback && req.previous && o.text == req.previous->text) continue;
    out.meta = std::move(o);
    break;
  }
  const std::string prompt = orchestrator_prompt(req.milestone, req.history);
  out.records.push_back(edge_record(prompt, out.meta ? to_json(*out.meta).dump() : std::string("{}")));
  return out;
}

FinalizeResult OracleOrchestrator::finalize(const FinalizeRequest& req) {
  FinalizeResult out;
  const auto script = req.script.value("finalize", std::string("default"));
  const bool qa = req.category == sim::TaskCategory::question_answer;
  const auto match = match_expectation(compile_expectation(req.milestone.expectation), req.visual);

  if (script == "over_eager" && req.post_steps == 0) {
    if (qa) {
      out.meta = make_meta("navigate_back", req.visual, nullptr);
    } else {
      const sim::VisualElement* last = nullptr;
      for (const auto& e : req.visual.elements) {
        if (e.clickable && !e.in_dialog) last = &e;
      }
      out.meta = last ? make_meta("tap '" + element_name(*last) + "'", req.visual, &last->bounds)
                      : make_meta("navigate_back", req.visual, nullptr);
    }
  } else if (script == "over_eager") {
    out.meta = make_meta("", req.visual, nullptr);
    out.meta.status = MetaStatus::finished;
  } else {
    out.meta = make_meta("", req.visual, nullptr);
    if (qa && match.answer) {
      out.meta.status = MetaStatus::answer_ready;
      out.meta.answer = match.answer;
    } else {
      out.meta.status = MetaStatus::finished;
    }
  }
  const std::string prompt = orchestrator_prompt(req.milestone, req.history);
  out.records.push_back(edge_record(prompt, to_json(out.meta).dump()));
  return out;
}

// --- executor -----------------------------------------------------------------

ScoreSet OracleExecutor::score(const ScoreRequest& req) {
  ScoreSet out;
  const auto n = req.candidates.size();
  if (n == 0 || !req.tree) {
    out.abstain = true;
    out.message = "no interactable candidates";
    return out;
  }
  const auto target = parse_intent(req.meta.text).target;
  std::vector<double> sims(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = req.tree->at(req.candidates[i]);
    sims[i] = lexical_similarity(target, node.text + " " + node.content_desc);
    total += sims[i];
  }
  out.log_probs.resize(n);
  if (total <= 0.0) {
    for (auto& lp : out.log_probs) lp = -std::log(static_cast<double>(n));
    if (!content_tokens(target).empty()) {
      out.abstain = true;
      out.message = "no node matched '" + target + "'";
    }
  } else {
    // small additive smoothing keeps every log finite
    constexpr double eps = 1e-9;
    const double z = total + eps * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out.log_probs[i] = std::log((sims[i] + eps) / z);
  }

  const std::string prompt = executor_prompt(req);
  const auto best = static_cast<std::size_t>(
      std::max_element(out.log_probs.begin(), out.log_probs.end()) - out.log_probs.begin());
  const std::string reply = sim::to_json(sim::Action::click(req.candidates[best])).dump();
  BackendCallRecord r;
  r.role = Role::executor;
  r.location = Location::edge;
  r.prompt_tokens = options_.tokens.count(prompt);
  r.completion_tokens = options_.tokens.count(reply);
  r.payload_bytes = static_cast<long long>(prompt.size());
  r.uploaded_elements = static_cast<long long>(n);
  out.records.push_back(r);
  return out;
}

BackendSet make_oracle_backends(const OracleOptions& options) {
  return {std::make_shared<OracleDesigner>(options), std::make_shared<OracleOrchestrator>(options),
          std::make_shared<OracleExecutor>(options)};
}

}  // namespace adec::backends

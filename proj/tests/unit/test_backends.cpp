#include <cmath>
#include <numeric>

#include "adec/backends/expectation.hpp"
#include "adec/backends/intent.hpp"
#include "adec/backends/oracle.hpp"
#include "adec/backends/prompts.hpp"
#include "adec/backends/response.hpp"
#include "adec/backends/tokens.hpp"
#include "adec/error.hpp"
#include "adec/sim/world.hpp"
#include "doctest.h"

using namespace adec;
using namespace adec::backends;
using nlohmann::json;

namespace {

sim::World contacts() { return sim::load_world_file(std::string(ADEC_FIXTURES) + "/worlds/contacts.world.json"); }

int node(const sim::UiTree& t, const std::string& id) {
  const int i = t.find_by_resource_id(id);
  REQUIRE(i >= 0);
  return i;
}

json small_metadata() {
  return json::parse(R"({
    "apps": [{"name": "Contacts", "capabilities": [
      {"name": "add", "pattern": "add (?:a )?contact (?:named )?'?([A-Za-z]+)'?", "bind": ["name"], "goal": "saved"},
      {"name": "unreachable", "keywords": ["teleport"], "goal": "moon"}]}],
    "states": [
      {"id": "list", "expectation": "The Contacts app main list is visible."},
      {"id": "form", "expectation": "The Name field shows ''."},
      {"id": "named", "expectation": "The Name field shows '{name}'."},
      {"id": "saved", "expectation": "The contact details show '{name}'."},
      {"id": "moon", "expectation": "Nothing."}],
    "edges": [
      {"from": "home", "to": "list", "instruction": "Open the Contacts app."},
      {"from": "list", "to": "form", "instruction": "Start a new contact."},
      {"from": "nowhere", "to": "moon", "instruction": "Unreachable branch."},
      {"from": "form", "to": "named", "instruction": "Enter the name {name}."},
      {"from": "named", "to": "saved", "instruction": "Store the contact."}]
  })");
}

}  // namespace

TEST_CASE("token counter modes") {
  TokenCounter bytes;
  CHECK(bytes.count("") == 0);
  CHECK(bytes.count("abcd") == 1);
  CHECK(bytes.count("abcde") == 2);
  TokenCounter ws(TokenCounter::Mode::whitespace);
  CHECK(ws.count("  one two\tthree\n") == 3);
}

TEST_CASE("prompt templates are complete and round-trip") {
  const auto ids = template_ids();
  CHECK(ids.size() == 6);
  const std::string designer(template_text("designer"));
  CHECK(designer.find("semantic milestones") != std::string::npos);
  CHECK(designer.find(R"({"instruction": "Open the Contacts app.", "expectation": "The Contacts app main list is visible."})") !=
        std::string::npos);
  CHECK(placeholders("designer") == std::vector<std::string>{"task_instruction"});
  CHECK_THROWS_AS(template_text("nope"), TemplateError);
  CHECK_THROWS_AS(render_prompt("designer", {}), TemplateError);

  for (const auto& id : ids) {
    Bindings b;
    int k = 0;
    for (const auto& p : placeholders(id)) b[p] = "value " + std::to_string(k++) + " for " + p;
    const auto text = render_prompt(id, b);
    CHECK(text.find("{task_instruction}") == std::string::npos);
    CHECK(extract_bindings(id, text) == b);
  }
}

TEST_CASE("json extraction tolerates prose and fences") {
  CHECK(extract_json("Sure! ```json\n[{\"a\": 1}]\n```") == json::parse(R"([{"a":1}])"));
  CHECK(extract_json("note [not json] then {\"k\": \"v [x]\"}") == json::parse(R"({"k":"v [x]"})"));
  CHECK_THROWS_AS(extract_json("nothing here"), ResponseParseError);
}

TEST_CASE("plan parsing and validation") {
  const auto plan = parse_plan(R"(Plan: {"plan": [{"instruction": "Open the Contacts app.", "expectation": "The Contacts app main list is visible."}]})");
  REQUIRE(plan.size() == 1);
  CHECK(plan[0].instruction == "Open the Contacts app.");
  CHECK_THROWS_AS(parse_plan("[]"), DesignerError);
  CHECK_THROWS_AS(parse_plan("no json"), ResponseParseError);

  CHECK_THROWS_AS(validate_plan({{"Tap at [540, 1200].", "The list is visible."}}), DesignerError);
  CHECK_THROWS_AS(validate_plan({{"Click element 4.", "The list is visible."}}), DesignerError);
  CHECK_THROWS_AS(validate_plan({{"Save.", "Tap the save button."}}), DesignerError);
  CHECK_THROWS_AS(validate_plan({{"", "x"}}), DesignerError);
  CHECK_NOTHROW(validate_plan({{"Save the contact.", "The contact details are visible."}}));
}

TEST_CASE("orchestrator and executor replies") {
  const auto r = parse_orchestrator(R"({"observation": "list", "status": "finished", "finished_probability": 0.7})");
  CHECK(r.status == "FINISHED");
  REQUIRE(r.finished_probability);
  CHECK(*r.finished_probability == doctest::Approx(0.7));
  CHECK_THROWS_AS(parse_orchestrator(R"({"status": "MAYBE"})"), ResponseParseError);

  CHECK(parse_executor(R"(```{"action_type": "click", "index": 3}```)") == sim::Action::click(3));
  CHECK_THROWS_AS(parse_executor(R"({"action_type": "fly"})"), ResponseParseError);
}

TEST_CASE("spatial reference normalization") {
  const auto p = parse_spatial_reference("tap near [540, 1200] please", {1080, 2400});
  REQUIRE(p);
  CHECK(p->x == doctest::Approx(0.5));
  CHECK(p->y == doctest::Approx(0.5));
  std::string warn;
  const auto q = parse_spatial_reference("[2000, -5]", {1080, 2400}, &warn);
  REQUIRE(q);
  CHECK(q->x == 1.0);
  CHECK(q->y == 0.0);
  CHECK_FALSE(warn.empty());
  CHECK_FALSE(parse_spatial_reference("no point", {1080, 2400}));
}

TEST_CASE("intent parsing") {
  CHECK(parse_intent("open_app Contacts").verb == Intent::Verb::open_app);
  CHECK(parse_intent("Open the Clock app.").app == "Clock");
  const auto in = parse_intent("type 'Alice' into 'Name'");
  CHECK(in.verb == Intent::Verb::input);
  CHECK(in.text == "Alice");
  CHECK(in.target == "Name");
  CHECK(parse_intent("tap 'Save'").target == "Save");
  CHECK(parse_intent("scroll up").direction == sim::Direction::up);
  CHECK(parse_intent("navigate_back").verb == Intent::Verb::back);
  CHECK(parse_intent("go home").verb == Intent::Verb::home);
  CHECK(parse_intent("The big green thing").target == "The big green thing");
}

TEST_CASE("expectation features against the contacts world") {
  auto w = contacts();
  auto obs = w.observe();
  const auto e = compile_expectation("The Contacts app main list is visible.");
  REQUIRE(e.features.size() == 1);
  CHECK(e.features[0].kind == Feature::Kind::app);
  CHECK(match_expectation(e, obs.visual).score == 1.0);

  const auto two = compile_expectation("The Contacts app shows 'Bob' and no longer shows 'Zed'.");
  CHECK(match_expectation(two, obs.visual).score == 1.0);
  const auto half = compile_expectation("The Contacts app shows 'Zed'.");
  CHECK(match_expectation(half, obs.visual).score == doctest::Approx(0.5));
  CHECK(match_expectation(compile_expectation("Something vague."), obs.visual).score == 0.5);

  w.apply_action(sim::Action::click(node(obs.tree, "add_contact")));
  obs = w.observe();
  w.apply_action(sim::Action::input_text(node(obs.tree, "name_field"), "Alice"));
  obs = w.observe();
  CHECK(match_expectation(compile_expectation("The Name field shows 'Alice'."), obs.visual).score == 1.0);
  CHECK(match_expectation(compile_expectation("The Name field shows 'Bob'."), obs.visual).score == 0.0);

  CHECK(content_tokens("Tap the contact's Save fields, class") == std::vector<std::string>{"contact", "save", "field", "class"});
}

TEST_CASE("question dispatcher") {
  CHECK(is_question("What is Bob's phone number?"));
  CHECK(is_question("Find out which alarm is set"));
  CHECK_FALSE(is_question("Add a contact named Alice"));
}

TEST_CASE("oracle designer plans over the workflow graph") {
  OracleDesigner d;
  DesignRequest req{"Add a contact named Alice", sim::TaskCategory::operation, small_metadata(), {}, {}};
  const auto out = d.plan(req);
  REQUIRE(out.plan.size() == 4);
  CHECK(out.plan.milestones[0].instruction == "Open the Contacts app.");
  CHECK(out.plan.milestones[1].instruction == "Start a new contact.");
  CHECK(out.plan.milestones[2].instruction == "Enter the name Alice.");
  CHECK(out.plan.milestones[3].expectation == "The contact details show 'Alice'.");
  CHECK(out.plan.revision == 0);

  // byte accounting recomputed from the rendered prompt
  const std::string system = "application metadata:\n" + small_metadata().dump();
  const std::string user = render_prompt("designer", {{"task_instruction", req.instruction}});
  CHECK(out.record.payload_bytes == static_cast<long long>(system.size() + user.size()));
  CHECK(out.record.prompt_tokens == static_cast<long long>((system.size() + 3) / 4 + (user.size() + 3) / 4));
  CHECK(out.record.location == Location::cloud);
  CHECK(out.record.latency_s == 2.0);

  CHECK_THROWS_AS(d.plan({"Teleport to the moon", sim::TaskCategory::operation, small_metadata(), {}, {}}),
                  PlanningInfeasible);
  CHECK_THROWS_AS(d.plan({"Unrelated", sim::TaskCategory::operation, small_metadata(), {}, {}}),
                  PlanningInfeasible);
  CHECK_THROWS_AS(d.plan({"", sim::TaskCategory::operation, small_metadata(), {}, {}}), DesignerError);

  FailureContext f{out.plan.milestones[1], {{"contacts_list | Contacts", std::nullopt}}, "repeated tactical failure"};
  DesignRequest again = req;
  again.failure = f;
  again.previous = out.plan;
  const auto re = d.plan(again);
  CHECK(re.plan.revision == 1);
  CHECK(re.plan.milestones.front().instruction == "Navigate Home.");
  CHECK(re.plan.size() == 5);
  const std::string replan_user = render_prompt(
      "replan", {{"goal", req.instruction}, {"old_plan", plan_text(out.plan)}, {"trace", trace_text(f)}});
  CHECK(re.record.payload_bytes == static_cast<long long>(system.size() + replan_user.size()));
}

TEST_CASE("failure context serialization carries text only") {
  FailureContext f{{"Store the contact.", "The details show 'Alice'."},
                   {{"contact_add | Name", sim::Action::click(4)}, {"contact_add | Name", std::nullopt}},
                   "no node matched 'Save'"};
  const auto s = serialize(f);
  const auto j = json::parse(s);
  CHECK(j["trajectory"].size() == 2);
  CHECK(j["trajectory"][0]["a"] == "click(4)");
  CHECK(j["trajectory"][1]["a"].is_null());
  CHECK(s.find("bounds") == std::string::npos);
  CHECK(trace_text(f).find("[Orchestrator Thought] contact_add | Name") != std::string::npos);
}

TEST_CASE("oracle executor distribution") {
  auto w = contacts();
  w.apply_action(sim::Action::click(w.observe().tree.find_by_resource_id("add_contact")));
  const auto obs = w.observe();
  std::vector<int> cands;
  for (const auto& n : obs.tree.nodes()) {
    if (n.interactable) cands.push_back(n.index);
  }
  REQUIRE(cands.size() >= 3);

  OracleExecutor ex;
  ScoreRequest req;
  req.tree = &obs.tree;
  req.candidates = cands;
  req.meta.text = "tap 'Save'";
  const auto s = ex.score(req);
  REQUIRE(s.log_probs.size() == cands.size());
  double total = 0.0;
  for (double lp : s.log_probs) {
    CHECK(std::isfinite(lp));
    total += std::exp(lp);
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  const auto best = std::max_element(s.log_probs.begin(), s.log_probs.end()) - s.log_probs.begin();
  CHECK(cands[static_cast<std::size_t>(best)] == obs.tree.find_by_resource_id("save"));
  CHECK_FALSE(s.abstain);
  REQUIRE(s.records.size() == 1);
  CHECK(s.records[0].uploaded_elements == static_cast<long long>(cands.size()));
  CHECK(s.records[0].location == Location::edge);

  req.meta.text = "tap 'Frobnicate'";
  const auto none = ex.score(req);
  CHECK(none.abstain);
  CHECK(none.message.find("Frobnicate") != std::string::npos);

  req.meta.text = "";
  const auto flat = ex.score(req);
  CHECK_FALSE(flat.abstain);
  for (double lp : flat.log_probs) CHECK(lp == doctest::Approx(-std::log(static_cast<double>(cands.size()))));
}

TEST_CASE("oracle orchestrator rules") {
  auto w = contacts();
  auto obs = w.observe();
  OracleOrchestrator orch;

  AlignRequest a{obs.visual, {"Open the Contacts app.", "The Contacts app main list is visible."},
                 sim::TaskCategory::operation, false, {}};
  const auto al = orch.align(a);
  CHECK(al.score == 1.0);
  CHECK(al.status == MetaStatus::finished);
  CHECK(al.records.size() == 1);
  CHECK(al.records[0].location == Location::edge);

  SuggestRequest s;
  s.visual = obs.visual;
  s.milestone = a.milestone;
  s.score = 1.0;
  CHECK_THROWS_AS(orch.suggest(s), ContractViolation);

  // missing app feature: open it
  s.visual.app_name = "Launcher";
  s.score = 0.0;
  auto out = orch.suggest(s);
  REQUIRE(out.meta);
  CHECK(out.meta->text == "open_app Contacts");

  // lexical choice carries a pixel reference
  auto w2 = contacts();
  obs = w2.observe();
  s.visual = obs.visual;
  s.milestone = {"Create a new contact.", "The Name field shows ''."};
  out = orch.suggest(s);
  REQUIRE(out.meta);
  CHECK(out.meta->text == "tap 'Create contact'");
  REQUIRE(out.meta->p_ref);
  const auto c = obs.tree.normalized_centroid(node(obs.tree, "add_contact"));
  CHECK(out.meta->p_ref->x == doctest::Approx(c.x).epsilon(1e-3));
  CHECK(out.meta->p_ref->y == doctest::Approx(c.y).epsilon(1e-3));

  // feedback mode never repeats the previous suggestion
  s.feedback = "no node matched 'Create contact'";
  s.previous = out.meta;
  out = orch.suggest(s);
  REQUIRE(out.meta);
  CHECK(out.meta->text != "tap 'Create contact'");
}

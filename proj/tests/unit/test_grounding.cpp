#include <cmath>
#include <random>

#include "adec/backends/oracle.hpp"
#include "adec/error.hpp"
#include "adec/grounding/grounding.hpp"
#include "adec/sim/world.hpp"
#include "doctest.h"

using namespace adec;
using namespace adec::grounding;
using backends::MetaInstruction;
using backends::Milestone;

namespace {

// Returns fixed log-probabilities per node index.
class ScriptedScorer : public backends::ExecutorScorer {
 public:
  explicit ScriptedScorer(std::vector<double> by_index, double offset = 0.0)
      : by_index_(std::move(by_index)), offset_(offset) {}
  backends::ScoreSet score(const backends::ScoreRequest& req) override {
    backends::ScoreSet s;
    for (int i : req.candidates) s.log_probs.push_back(by_index_.at(static_cast<std::size_t>(i)) + offset_);
    return s;
  }

 private:
  std::vector<double> by_index_;
  double offset_;
};

sim::NodeDraft leaf(std::string id, std::string text, sim::Rect r, bool interactable, bool editable = false) {
  sim::NodeDraft d;
  d.resource_id = std::move(id);
  d.class_name = editable ? "EditText" : "Button";
  d.text = std::move(text);
  d.bounds = r;
  d.interactable = interactable;
  d.editable = editable;
  return d;
}

sim::UiTree tree_of(std::vector<sim::NodeDraft> kids) {
  sim::NodeDraft root;
  root.resource_id = "root";
  root.class_name = "FrameLayout";
  root.bounds = {0, 0, 1080, 2400};
  root.children = std::move(kids);
  return sim::UiTree({root}, {1080, 2400});
}

MetaInstruction meta(std::string text, std::optional<sim::Point> p_ref = std::nullopt) {
  MetaInstruction m;
  m.text = std::move(text);
  m.p_ref = p_ref;
  return m;
}

GroundingResult ok(const GroundingOutcome& o) {
  REQUIRE(std::holds_alternative<GroundingResult>(o));
  return std::get<GroundingResult>(o);
}

TacticalFailure fail(const GroundingOutcome& o) {
  REQUIRE(std::holds_alternative<TacticalFailure>(o));
  return std::get<TacticalFailure>(o);
}

// two Save buttons: one top-left, one bottom-right
sim::UiTree duplicate_save_tree() {
  return tree_of({leaf("title", "Edit", {0, 0, 1080, 200}, false),
                  leaf("save_a", "Save", {0, 200, 200, 300}, true),
                  leaf("cancel", "Cancel", {400, 1000, 600, 1100}, true),
                  leaf("save_b", "Save", {880, 2200, 1080, 2300}, true)});
}

}  // namespace

TEST_CASE("pruning keeps interactable nodes in index order") {
  const auto t = tree_of({leaf("a", "A", {0, 0, 10, 10}, false), leaf("b", "B", {0, 10, 10, 20}, true),
                          leaf("c", "C", {0, 20, 10, 30}, false), leaf("d", "D", {0, 30, 10, 40}, true)});
  REQUIRE(t.size() == 5);
  CHECK(prune_candidates(t) == std::vector<int>{2, 4});
  CHECK(prune_candidates(tree_of({leaf("a", "A", {0, 0, 10, 10}, false)})).empty());

  auto w = sim::load_world_file(std::string(ADEC_FIXTURES) + "/worlds/contacts.world.json");
  // fixture flags: 4 contact rows, search, more options, create contact
  CHECK(prune_candidates(w.observe().tree).size() == 7);
}

TEST_CASE("r_struct values") {
  CHECK(r_struct({0.3, 0.7}, sim::Point{0.3, 0.7}) == 0.0);
  CHECK(r_struct({0, 0}, sim::Point{1, 1}) == doctest::Approx(2.0));
  CHECK(r_struct({0.5, 0.5}, sim::Point{0.1, 0.2}) == doctest::Approx(0.25));
  CHECK(r_struct({0.9, 0.1}, std::nullopt) == 0.0);
  CHECK_THROWS_AS(r_struct({1.5, 0}, sim::Point{0, 0}), ContractViolation);
}

TEST_CASE("unique match grounds to a click") {
  auto w = sim::load_world_file(std::string(ADEC_FIXTURES) + "/worlds/contacts.world.json");
  auto obs = w.observe();
  w.apply_action(sim::Action::click(obs.tree.find_by_resource_id("add_contact")));
  obs = w.observe();
  backends::OracleExecutor ex;
  const auto& r = ok(ground(meta("tap 'Save'"), {}, obs.tree, ex, {}));
  CHECK(r.node_index == obs.tree.find_by_resource_id("save"));
  CHECK(r.action == sim::Action::click(r.node_index));
  CHECK(r.per_candidate.size() == prune_candidates(obs.tree).size());

  const auto& typed = ok(ground(meta("type 'Alice' into 'Name'"), {}, obs.tree, ex, {}));
  CHECK(typed.action == sim::Action::input_text(obs.tree.find_by_resource_id("name_field"), "Alice"));

  const auto& app = ok(ground(meta("open_app Clock"), {}, obs.tree, ex, {}));
  CHECK(app.node_index == -1);
  CHECK(app.action == sim::Action::open_app("Clock"));

  const auto& f = fail(ground(meta("tap 'Frobnicate'"), {}, obs.tree, ex, {}));
  CHECK(f.message.find("'Frobnicate'") != std::string::npos);

  auto done = meta("");
  done.status = backends::MetaStatus::finished;
  CHECK_THROWS_AS(ground(done, {}, obs.tree, ex, {}), ContractViolation);
}

TEST_CASE("duplicates resolved by the spatial term") {
  const auto t = duplicate_save_tree();
  const int a = t.find_by_resource_id("save_a");
  const int b = t.find_by_resource_id("save_b");
  const sim::Point p_ref{1000.0 / 1080.0, 2250.0 / 2400.0};
  backends::OracleExecutor ex;

  // hand computation: centroids (100,250) and (980,2250)
  const double ra = std::pow(100.0 / 1080 - p_ref.x, 2) + std::pow(250.0 / 2400 - p_ref.y, 2);
  const double rb = std::pow(980.0 / 1080 - p_ref.x, 2) + std::pow(2250.0 / 2400 - p_ref.y, 2);
  REQUIRE(rb < ra);

  for (double alpha : {0.05, 0.2, 1.0}) {
    GroundingConfig cfg;
    cfg.alpha = alpha;
    const auto& r = ok(ground(meta("tap 'Save'", p_ref), {}, t, ex, cfg));
    CHECK(r.node_index == b);
    const auto& row_a = r.per_candidate[0];
    const auto& row_b = r.per_candidate[2];
    CHECK(row_a.log_prob == doctest::Approx(row_b.log_prob));
    CHECK(row_a.r_struct == doctest::Approx(ra));
    CHECK(row_b.r_struct == doctest::Approx(rb));
    CHECK(r.objective == doctest::Approx(row_b.log_prob - alpha * rb));
  }
  GroundingConfig zero;
  zero.alpha = 0.0;
  CHECK(ok(ground(meta("tap 'Save'", p_ref), {}, t, ex, zero)).node_index == a);
  CHECK(ok(ground(meta("tap 'Save'"), {}, t, ex, {})).node_index == a);
}

TEST_CASE("failure paths") {
  backends::OracleExecutor ex;
  const auto none = tree_of({leaf("a", "A", {0, 0, 10, 10}, false)});
  CHECK(fail(ground(meta("tap 'A'"), {}, none, ex, {})).message == "no interactable element on screen");
  CHECK(fail(brute_force_ground(meta("tap 'A'"), {}, none, ex, {})).message == "no interactable element on screen");

  // best probability 0.04 < 0.05 floor
  const auto t = duplicate_save_tree();
  ScriptedScorer low({0, std::log(0.01), std::log(0.01), std::log(0.01), std::log(0.04)});
  CHECK(fail(ground(meta("tap 'Save'"), {}, t, low, {})).message.find("below floor") != std::string::npos);
  ScriptedScorer edge({0, std::log(0.01), std::log(0.01), std::log(0.01), std::log(0.05)});
  CHECK(ok(ground(meta("tap 'Save'"), {}, t, edge, {})).node_index == 4);
}

TEST_CASE("single candidate wins for any alpha") {
  const auto t = tree_of({leaf("only", "Only", {0, 0, 100, 100}, true)});
  ScriptedScorer s({0, 0.0});
  for (double alpha : {0.0, 0.2, 5.0}) {
    GroundingConfig cfg;
    cfg.alpha = alpha;
    cfg.score_floor = -1e9;
    CHECK(ok(brute_force_ground(meta("tap 'Only'", sim::Point{1, 1}), {}, t, s, cfg)).node_index == 1);
  }
}

TEST_CASE("brute force refuses oversized candidate sets") {
  std::vector<sim::NodeDraft> kids;
  for (int i = 0; i < 65; ++i) kids.push_back(leaf("n" + std::to_string(i), "x", {0, i * 10, 100, i * 10 + 10}, true));
  const auto t = tree_of(kids);
  ScriptedScorer s(std::vector<double>(t.size(), -1.0));
  CHECK_THROWS_AS(brute_force_ground(meta("tap 'x'"), {}, t, s, {}), ContractViolation);
  CHECK(ok(ground(meta("tap 'x'"), {}, t, s, {})).node_index == 1);
}

TEST_CASE("equivalence, shift invariance and neutrality on random trees") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> count(1, 40);
  std::uniform_int_distribution<int> coord(0, 1000);
  std::uniform_int_distribution<int> level(0, 5);
  for (int trial = 0; trial < 120; ++trial) {
    std::vector<sim::NodeDraft> kids;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      const int x = coord(rng), y = coord(rng) * 2;
      kids.push_back(leaf("n" + std::to_string(i), "t", {x, y, x + 80, y + 100}, rng() % 4 != 0));
    }
    const auto t = tree_of(kids);
    std::vector<double> lp(t.size());
    for (auto& v : lp) v = -0.25 * level(rng);  // coarse levels force ties
    ScriptedScorer s(lp), shifted(lp, -0.7);
    const sim::Point p{coord(rng) / 1000.0, coord(rng) / 1000.0};
    GroundingConfig cfg;
    cfg.score_floor = -1e9;
    const auto fast = ground(meta("tap 't'", p), {}, t, s, cfg);
    const auto slow = brute_force_ground(meta("tap 't'", p), {}, t, s, cfg);
    REQUIRE(fast.index() == slow.index());
    if (!std::holds_alternative<GroundingResult>(fast)) continue;
    const auto& f = std::get<GroundingResult>(fast);
    const auto& b = std::get<GroundingResult>(slow);
    CHECK(f.node_index == b.node_index);
    CHECK(std::abs(f.objective - b.objective) <= 1e-12);
    CHECK(ok(ground(meta("tap 't'", p), {}, t, shifted, cfg)).node_index == f.node_index);

    // without p_ref alpha is irrelevant
    GroundingConfig big = cfg;
    big.alpha = 3.0;
    CHECK(ok(ground(meta("tap 't'"), {}, t, s, cfg)).node_index == ok(ground(meta("tap 't'"), {}, t, s, big)).node_index);
  }
}

#include "adec/sim/task.hpp"

#include <fstream>
#include <set>

#include "adec/error.hpp"
#include "adec/sim/json_util.hpp"

namespace adec::sim {

using nlohmann::json;
namespace ju = json_util;

std::string_view to_string(TaskCategory c) {
  return c == TaskCategory::operation ? "operation" : "question_answer";
}

namespace {

TaskSpec parse_task(const json& j, const std::string& path, const json& default_metadata) {
  TaskSpec t;
  t.task_id = ju::require_string(j, "task_id", path);
  if (t.task_id.empty()) throw ParseError(path + "/task_id", "must be non-empty");
  t.instruction = ju::require_string(j, "instruction", path);
  if (t.instruction.empty()) throw ParseError(path + "/instruction", "must be non-empty");

  const auto cat = ju::optional_string(j, "category", path, "operation");
  if (cat == "operation") {
    t.category = TaskCategory::operation;
  } else if (cat == "question_answer" || cat == "qa") {
    t.category = TaskCategory::question_answer;
  } else {
    throw ParseError(path + "/category", "expected \"operation\" or \"question_answer\"");
  }

  t.app_metadata = j.contains("app_metadata") ? j["app_metadata"] : default_metadata;
  if (!t.app_metadata.is_object()) throw ParseError(path + "/app_metadata", "expected an object");

  t.success = predicate_from_json(ju::require(j, "success", path), path + "/success");
  if (t.category == TaskCategory::question_answer && !t.success.uses_answer()) {
    throw ParseError(path + "/success", "question_answer tasks need an answer predicate");
  }
  if (t.category == TaskCategory::operation && t.success.uses_answer()) {
    throw ParseError(path + "/success", "operation tasks need a world-state predicate");
  }

  if (j.contains("ground_truth_targets")) {
    const auto& arr = ju::require_array(j, "ground_truth_targets", path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto p = path + "/ground_truth_targets/" + std::to_string(i);
      t.ground_truth_targets.push_back({ju::require_string(arr[i], "screen", p),
                                        ju::require_string(arr[i], "target", p),
                                        ju::require_string(arr[i], "node_id", p)});
    }
  }
  if (j.contains("perturbations")) {
    const auto& arr = ju::require_array(j, "perturbations", path);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      t.perturbations.push_back(perturbation_from_json(arr[i], path + "/perturbations/" + std::to_string(i)));
    }
  }
  if (j.contains("start_screen")) t.start_screen = ju::require_string(j, "start_screen", path);
  if (j.contains("oracle")) {
    t.oracle = j["oracle"];
    if (!t.oracle.is_object()) throw ParseError(path + "/oracle", "expected an object");
  }
  return t;
}

void collect_answers(const Predicate& p, std::vector<std::string>& out) {
  if (p.kind == Predicate::Kind::answer) out.insert(out.end(), p.answers.begin(), p.answers.end());
  for (const auto& c : p.children) collect_answers(c, out);
}

}  // namespace

TaskSuite load_task_suite(const json& doc, const std::filesystem::path& base_dir) {
  ju::require_schema(doc, kTasksSchema);
  TaskSuite suite;
  suite.name = ju::optional_string(doc, "name", "", "suite");
  if (doc.contains("world")) {
    std::filesystem::path w = ju::require_string(doc, "world", "");
    suite.world_path = w.is_absolute() ? w : base_dir / w;
  }
  json default_metadata = doc.contains("app_metadata") ? doc["app_metadata"] : json::object();
  if (!default_metadata.is_object()) throw ParseError("/app_metadata", "expected an object");

  const auto& tasks = ju::require_array(doc, "tasks", "");
  if (tasks.empty()) throw ParseError("/tasks", "suite has no tasks");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto t = parse_task(tasks[i], "/tasks/" + std::to_string(i), default_metadata);
    if (!ids.insert(t.task_id).second) {
      throw ParseError("/tasks/" + std::to_string(i) + "/task_id", "duplicate task id \"" + t.task_id + "\"");
    }
    suite.tasks.push_back(std::move(t));
  }
  return suite;
}

TaskSuite load_task_suite_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open task suite");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
  return load_task_suite(doc, path.parent_path());
}

bool check_success(const World& world, const TaskSpec& task, const std::optional<std::string>& terminate_payload) {
  if (task.category == TaskCategory::question_answer && !terminate_payload) return false;
  PredicateContext ctx;
  ctx.var = [&](const std::string& k) { return world.var(k); };
  ctx.list = [&](const std::string& k) { return world.list(k); };
  ctx.screen = world.current_screen();
  if (task.category == TaskCategory::question_answer) ctx.answer = terminate_payload;
  return evaluate(task.success, ctx);
}

bool answer_visible(const VisualState& visual, const TaskSpec& task) {
  if (task.category != TaskCategory::question_answer) return false;
  std::vector<std::string> answers;
  collect_answers(task.success, answers);
  for (const auto& a : answers) {
    const auto want = normalize_answer(a);
    if (want.empty()) continue;
    for (const auto& t : visual.visible_texts) {
      if (normalize_answer(t).find(want) != std::string::npos) return true;
    }
  }
  return false;
}

void prepare_world(World& world, const TaskSpec& task) {
  if (task.start_screen) world.set_current_screen(*task.start_screen);
  for (const auto& p : task.perturbations) world.inject_perturbation(p);
}

}  // namespace adec::sim

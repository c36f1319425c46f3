#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adec/sim/predicate.hpp"
#include "adec/sim/world.hpp"
#include "json.hpp"

namespace adec::sim {

inline constexpr const char* kTasksSchema = "adec-tasks/1";

enum class TaskCategory { operation, question_answer };
std::string_view to_string(TaskCategory c);

// Labels the correct node for a grounding decision: on `screen`, when the
// meta-instruction targets `target`, the right node is `node_id`.
struct GroundTruthTarget {
  std::string screen;
  std::string target;
  std::string node_id;
};

struct TaskSpec {
  std::string task_id;
  std::string instruction;
  TaskCategory category = TaskCategory::operation;
  nlohmann::json app_metadata = nlohmann::json::object();
  Predicate success;
  std::vector<GroundTruthTarget> ground_truth_targets;
  std::vector<Perturbation> perturbations;
  std::optional<std::string> start_screen;
  // Knobs for the deterministic oracle backends (e.g. a scripted
  // finalize policy). Ignored by remote backends.
  nlohmann::json oracle = nlohmann::json::object();
};

struct TaskSuite {
  std::string name;
  std::optional<std::filesystem::path> world_path;  // resolved against the suite file
  std::vector<TaskSpec> tasks;
};

TaskSuite load_task_suite(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
TaskSuite load_task_suite_file(const std::filesystem::path& path);

// Pure function of the world's current state and the payload. QA tasks with
// no payload are simply unsuccessful.
bool check_success(const World& world, const TaskSpec& task,
                   const std::optional<std::string>& terminate_payload);

// QA tasks: whether the expected answer is currently on screen.
bool answer_visible(const VisualState& visual, const TaskSpec& task);

// Applies the task's start screen and schedules its perturbations.
void prepare_world(World& world, const TaskSpec& task);

}  // namespace adec::sim

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adec/sim/action.hpp"
#include "adec/sim/ui_tree.hpp"
#include "json.hpp"

namespace adec::backends {

// (g_k, E_k)
struct Milestone {
  std::string instruction;
  std::string expectation;
  bool operator==(const Milestone&) const = default;
};

struct Plan {
  std::vector<Milestone> milestones;
  int cursor = 0;
  int revision = 0;

  int size() const { return static_cast<int>(milestones.size()); }
  bool exhausted() const { return cursor >= size(); }
  const Milestone& active() const { return milestones.at(static_cast<std::size_t>(cursor)); }
  bool final_phase() const { return cursor == size() - 1; }
};

enum class MetaStatus { ongoing, finished, answer_ready };
std::string_view to_string(MetaStatus s);

struct MetaInstruction {
  std::string text;
  std::optional<sim::Point> p_ref;  // normalized to [0,1]^2
  std::string raw_observation;
  MetaStatus status = MetaStatus::ongoing;
  std::optional<std::string> answer;
};

struct TrajectoryEntry {
  std::string summary;                 // Q_t
  std::optional<sim::Action> action;   // empty for a step that only produced F_tact
};

// H_fail. Text only by construction: no VisualState or UiTree can be put in.
struct FailureContext {
  Milestone failed_milestone;
  std::vector<TrajectoryEntry> trajectory;
  std::string reason;
};

enum class Role { designer, orchestrator, executor };
enum class Location { cloud, edge };
std::string_view to_string(Role r);
std::string_view to_string(Location l);

struct BackendCallRecord {
  Role role = Role::designer;
  Location location = Location::edge;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long payload_bytes = 0;     // bytes of the request body content
  double latency_s = 0.0;          // modeled, not measured
  long long uploaded_elements = 0; // UI elements serialized into the request
};

nlohmann::json to_json(const Milestone& m);
nlohmann::json to_json(const Plan& p);
nlohmann::json to_json(const MetaInstruction& m);
nlohmann::json to_json(const FailureContext& f);
nlohmann::json to_json(const BackendCallRecord& r);
BackendCallRecord record_from_json(const nlohmann::json& j);

// Compact serialization; its size is what the cloud receives.
std::string serialize(const FailureContext& f);

// Lexical checks on designer output. Throws DesignerError.
void validate_plan(const std::vector<Milestone>& milestones);
const std::vector<std::string>& imperative_denylist();

}  // namespace adec::backends

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adec/backends/types.hpp"
#include "adec/sim/action.hpp"
#include "adec/sim/ui_tree.hpp"
#include "json.hpp"

namespace adec::backends {

// First parseable JSON object or array in `raw`; code fences and prose around
// it are skipped. Throws ResponseParseError when nothing parses.
nlohmann::json extract_json(std::string_view raw);

// Designer reply: a milestone array, bare or under "plan"/"milestones".
// ResponseParseError when no JSON, DesignerError when empty or invalid.
std::vector<Milestone> parse_plan(std::string_view raw);

struct OrchestratorReply {
  std::string observation;
  std::string status;  // upper-cased: FINISHED / ONGOING / ANSWER_READY
  std::string reasoning;
  std::string suggestion;
  std::string spatial_reference;
  std::optional<double> finished_probability;
  std::optional<std::string> answer;
};
OrchestratorReply parse_orchestrator(std::string_view raw);

sim::Action parse_executor(std::string_view raw);

// First "[x, y]" in text, normalized by the screen size and clamped to
// [0,1]^2. A clamp appends a note to *warning when given.
std::optional<sim::Point> parse_spatial_reference(std::string_view text, sim::Size pixel_size,
                                                  std::string* warning = nullptr);

}  // namespace adec::backends

#include "adec/backends/types.hpp"

#include <cctype>
#include <regex>

#include "adec/error.hpp"

namespace adec::backends {

using nlohmann::json;

std::string_view to_string(MetaStatus s) {
  switch (s) {
    case MetaStatus::ongoing:
      return "ongoing";
    case MetaStatus::finished:
      return "finished";
    case MetaStatus::answer_ready:
      return "answer_ready";
  }
  return "ongoing";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::designer:
      return "designer";
    case Role::orchestrator:
      return "orchestrator";
    case Role::executor:
      return "executor";
  }
  return "designer";
}

std::string_view to_string(Location l) { return l == Location::cloud ? "cloud" : "edge"; }

json to_json(const Milestone& m) { return {{"instruction", m.instruction}, {"expectation", m.expectation}}; }

json to_json(const Plan& p) {
  auto ms = json::array();
  for (const auto& m : p.milestones) ms.push_back(to_json(m));
  return {{"milestones", ms}, {"cursor", p.cursor}, {"revision", p.revision}};
}

json to_json(const MetaInstruction& m) {
  json j = {{"text", m.text}, {"status", std::string(to_string(m.status))}};
  j["p_ref"] = m.p_ref ? json::array({m.p_ref->x, m.p_ref->y}) : json(nullptr);
  if (!m.raw_observation.empty()) j["observation"] = m.raw_observation;
  if (m.answer) j["answer"] = *m.answer;
  return j;
}

json to_json(const FailureContext& f) {
  auto traj = json::array();
  for (const auto& e : f.trajectory) {
    traj.push_back({{"q", e.summary}, {"a", e.action ? json(sim::describe(*e.action)) : json(nullptr)}});
  }
  return {{"milestone", to_json(f.failed_milestone)}, {"trajectory", traj}, {"reason", f.reason}};
}

std::string serialize(const FailureContext& f) { return to_json(f).dump(); }

json to_json(const BackendCallRecord& r) {
  return {{"role", std::string(to_string(r.role))},
          {"location", std::string(to_string(r.location))},
          {"prompt_tokens", r.prompt_tokens},
          {"completion_tokens", r.completion_tokens},
          {"payload_bytes", r.payload_bytes},
          {"latency_s", r.latency_s},
          {"uploaded_elements", r.uploaded_elements}};
}

BackendCallRecord record_from_json(const json& j) {
  BackendCallRecord r;
  const auto role = j.at("role").get<std::string>();
  if (role == "designer") {
    r.role = Role::designer;
  } else if (role == "orchestrator") {
    r.role = Role::orchestrator;
  } else if (role == "executor") {
    r.role = Role::executor;
  } else {
    throw ParseError("/role", "unknown role \"" + role + "\"");
  }
  r.location = j.at("location").get<std::string>() == "cloud" ? Location::cloud : Location::edge;
  r.prompt_tokens = j.value("prompt_tokens", 0LL);
  r.completion_tokens = j.value("completion_tokens", 0LL);
  r.payload_bytes = j.value("payload_bytes", 0LL);
  r.latency_s = j.value("latency_s", 0.0);
  r.uploaded_elements = j.value("uploaded_elements", 0LL);
  return r;
}

const std::vector<std::string>& imperative_denylist() {
  static const std::vector<std::string> verbs = {"open",  "tap",    "click", "press", "type",     "enter",
                                                 "input", "scroll", "swipe", "select", "navigate", "go",
                                                 "launch", "fill",  "long",  "toggle", "turn",    "save"};
  return verbs;
}

void validate_plan(const std::vector<Milestone>& milestones) {
  if (milestones.empty()) throw DesignerError("designer returned an empty milestone list");
  static const std::regex coords(R"([\[(]\s*-?\d+\s*,\s*-?\d+\s*[\])])");
  static const std::regex index(R"(\b(index|node|element)\s*#?\s*\d+\b)", std::regex::icase);
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    const auto& m = milestones[i];
    const auto where = "milestone " + std::to_string(i) + ": ";
    if (m.instruction.empty() || m.expectation.empty()) {
      throw DesignerError(where + "instruction and expectation must be non-empty");
    }
    for (const auto* s : {&m.instruction, &m.expectation}) {
      if (std::regex_search(*s, coords)) throw DesignerError(where + "contains coordinates");
      if (std::regex_search(*s, index)) throw DesignerError(where + "references an element index");
    }
    std::string first;
    for (char c : m.expectation) {
      if (!std::isalpha(static_cast<unsigned char>(c))) break;
      first.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    for (const auto& v : imperative_denylist()) {
      if (first == v) throw DesignerError(where + "expectation describes an action (\"" + first + "\")");
    }
  }
}

}  // namespace adec::backends

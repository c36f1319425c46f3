#include "adec/backends/response.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "adec/error.hpp"

namespace adec::backends {

using nlohmann::json;

namespace {

// End (exclusive) of the bracketed value starting at `start`, honouring
// string literals, or npos when unbalanced.
std::size_t match_bracket(std::string_view s, std::size_t start) {
  std::vector<char> stack;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      stack.push_back(c == '{' ? '}' : ']');
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::string_view::npos;
      stack.pop_back();
      if (stack.empty()) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  return it->is_string() ? it->get<std::string>() : it->dump();
}

}  // namespace

json extract_json(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    const auto end = match_bracket(raw, i);
    if (end == std::string_view::npos) continue;
    try {
      return json::parse(raw.substr(i, end - i));
    } catch (const json::parse_error&) {
      // not JSON after all ("[x, y]" prose, placeholders); keep scanning
    }
  }
  throw ResponseParseError("no JSON value found in response");
}

std::vector<Milestone> parse_plan(std::string_view raw) {
  // A replan reply leads with "Reflection: ..." prose; the array follows "Plan:".
  std::string_view body = raw;
  if (const auto p = raw.find("Plan:"); p != std::string_view::npos) body = raw.substr(p);
  json j;
  try {
    j = extract_json(body);
  } catch (const ResponseParseError&) {
    j = extract_json(raw);
  }
  if (j.is_object()) {
    if (j.contains("plan")) {
      j = j["plan"];
    } else if (j.contains("milestones")) {
      j = j["milestones"];
    } else if (j.contains("instruction")) {
      j = json::array({j});
    }
  }
  if (!j.is_array()) throw DesignerError("designer reply is not a milestone list");
  std::vector<Milestone> out;
  for (const auto& m : j) {
    if (!m.is_object()) throw DesignerError("milestone entry is not an object");
    out.push_back({string_field(m, "instruction"), string_field(m, "expectation")});
  }
  validate_plan(out);
  return out;
}

OrchestratorReply parse_orchestrator(std::string_view raw) {
  const json j = extract_json(raw);
  if (!j.is_object()) throw ResponseParseError("orchestrator reply is not an object");
  OrchestratorReply r;
  r.observation = string_field(j, "observation");
  r.status = upper(string_field(j, "status"));
  r.reasoning = string_field(j, "reasoning");
  r.suggestion = string_field(j, "suggestion");
  r.spatial_reference = string_field(j, "spatial_reference");
  if (auto it = j.find("finished_probability"); it != j.end() && it->is_number()) {
    r.finished_probability = std::clamp(it->get<double>(), 0.0, 1.0);
  }
  if (auto it = j.find("answer"); it != j.end() && it->is_string()) r.answer = it->get<std::string>();
  if (r.status != "FINISHED" && r.status != "ONGOING" && r.status != "ANSWER_READY") {
    throw ResponseParseError("orchestrator status must be FINISHED or ONGOING, got \"" + r.status + "\"");
  }
  return r;
}

sim::Action parse_executor(std::string_view raw) {
  const json j = extract_json(raw);
  try {
    return sim::action_from_json(j);
  } catch (const ParseError& e) {
    throw ResponseParseError(std::string("executor reply: ") + e.what());
  }
}

std::optional<sim::Point> parse_spatial_reference(std::string_view text, sim::Size pixel_size, std::string* warning) {
  static const std::regex re(R"(\[\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\])");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, re)) return std::nullopt;
  const double x = std::stod(m[1].str());
  const double y = std::stod(m[2].str());
  const double w = pixel_size.width > 0 ? pixel_size.width : 1;
  const double h = pixel_size.height > 0 ? pixel_size.height : 1;
  sim::Point p{x / w, y / h};
  sim::Point clamped{std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
  if (clamped != p && warning) {
    if (!warning->empty()) *warning += "; ";
    *warning += "spatial reference [" + m[1].str() + ", " + m[2].str() + "] outside the screen, clamped";
  }
  return clamped;
}

}  // namespace adec::backends

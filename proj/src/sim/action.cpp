#include "adec/sim/action.hpp"

#include <array>
#include <utility>

#include "adec/error.hpp"

namespace adec::sim {
namespace {

constexpr std::array<std::pair<ActionType, std::string_view>, 9> kActionNames{{
    {ActionType::click, "click"},
    {ActionType::long_press, "long_press"},
    {ActionType::input_text, "input_text"},
    {ActionType::swipe, "swipe"},
    {ActionType::scroll, "scroll"},
    {ActionType::open_app, "open_app"},
    {ActionType::navigate_back, "navigate_back"},
    {ActionType::navigate_home, "navigate_home"},
    {ActionType::terminate, "terminate"},
}};

constexpr std::array<std::pair<Direction, std::string_view>, 4> kDirectionNames{{
    {Direction::up, "up"},
    {Direction::down, "down"},
    {Direction::left, "left"},
    {Direction::right, "right"},
}};

}  // namespace

std::string_view to_string(ActionType t) {
  for (const auto& [k, v] : kActionNames) {
    if (k == t) return v;
  }
  return "unknown";
}

std::string_view to_string(Direction d) {
  for (const auto& [k, v] : kDirectionNames) {
    if (k == d) return v;
  }
  return "unknown";
}

std::optional<ActionType> parse_action_type(std::string_view s) {
  for (const auto& [k, v] : kActionNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view s) {
  for (const auto& [k, v] : kDirectionNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

bool Action::targets_node() const {
  switch (type) {
    case ActionType::click:
    case ActionType::long_press:
    case ActionType::input_text:
    case ActionType::swipe:
      return true;
    default:
      return false;
  }
}

bool Action::operator==(const Action& other) const { return to_json(*this) == to_json(other); }

nlohmann::json to_json(const Action& a) {
  nlohmann::json j = {{"action_type", std::string(to_string(a.type))}};
  switch (a.type) {
    case ActionType::click:
    case ActionType::long_press:
      j["index"] = a.index;
      break;
    case ActionType::input_text:
      j["index"] = a.index;
      j["text"] = a.text;
      break;
    case ActionType::swipe:
      j["index"] = a.index;
      j["direction"] = std::string(to_string(a.direction));
      break;
    case ActionType::scroll:
      j["direction"] = std::string(to_string(a.direction));
      break;
    case ActionType::open_app:
      j["app_name"] = a.app_name;
      break;
    case ActionType::terminate:
      j["payload"] = a.text;
      break;
    case ActionType::navigate_back:
    case ActionType::navigate_home:
      break;
  }
  return j;
}

Action action_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("action_type") || !j["action_type"].is_string()) {
    throw ParseError("/action_type", "action object needs a string action_type");
  }
  const auto type = parse_action_type(j["action_type"].get<std::string>());
  if (!type) throw ParseError("/action_type", "unknown action type " + j["action_type"].dump());
  Action a;
  a.type = *type;
  auto index = [&] {
    if (!j.contains("index") || !j["index"].is_number_integer()) {
      throw ParseError("/index", "action needs an integer index");
    }
    return j["index"].get<int>();
  };
  auto direction = [&] {
    const auto d = j.contains("direction") && j["direction"].is_string()
                       ? parse_direction(j["direction"].get<std::string>())
                       : std::nullopt;
    if (!d) throw ParseError("/direction", "action needs a direction of up/down/left/right");
    return *d;
  };
  switch (a.type) {
    case ActionType::click:
    case ActionType::long_press:
      a.index = index();
      break;
    case ActionType::input_text:
      a.index = index();
      a.text = j.value("text", "");
      break;
    case ActionType::swipe:
      a.index = index();
      a.direction = direction();
      break;
    case ActionType::scroll:
      a.direction = direction();
      break;
    case ActionType::open_app:
      a.app_name = j.value("app_name", "");
      break;
    case ActionType::terminate:
      a.text = j.value("payload", "");
      break;
    case ActionType::navigate_back:
    case ActionType::navigate_home:
      break;
  }
  return a;
}

std::string describe(const Action& a) {
  std::string s(to_string(a.type));
  switch (a.type) {
    case ActionType::click:
    case ActionType::long_press:
      return s + "(" + std::to_string(a.index) + ")";
    case ActionType::input_text:
      return s + "(" + std::to_string(a.index) + ", \"" + a.text + "\")";
    case ActionType::swipe:
      return s + "(" + std::to_string(a.index) + ", " + std::string(to_string(a.direction)) + ")";
    case ActionType::scroll:
      return s + "(" + std::string(to_string(a.direction)) + ")";
    case ActionType::open_app:
      return s + "(" + a.app_name + ")";
    case ActionType::terminate:
      return s + "(\"" + a.text + "\")";
    default:
      return s;
  }
}

}  // namespace adec::sim

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace adec::sim {

enum class ActionType {
  click,
  long_press,
  input_text,
  swipe,
  scroll,
  open_app,
  navigate_back,
  navigate_home,
  terminate,
};

enum class Direction { up, down, left, right };

std::string_view to_string(ActionType t);
std::string_view to_string(Direction d);
std::optional<ActionType> parse_action_type(std::string_view s);
std::optional<Direction> parse_direction(std::string_view s);

// Atomic device action. Only the fields relevant to `type` are meaningful:
// index for click/long_press/input_text/swipe, text for input_text,
// direction for swipe/scroll, app_name for open_app, text for terminate.
struct Action {
  ActionType type = ActionType::click;
  int index = -1;
  std::string text;
  Direction direction = Direction::down;
  std::string app_name;

  static Action click(int index) { return {ActionType::click, index, {}, Direction::down, {}}; }
  static Action long_press(int index) { return {ActionType::long_press, index, {}, Direction::down, {}}; }
  static Action input_text(int index, std::string text) {
    return {ActionType::input_text, index, std::move(text), Direction::down, {}};
  }
  static Action swipe(int index, Direction d) { return {ActionType::swipe, index, {}, d, {}}; }
  static Action scroll(Direction d) { return {ActionType::scroll, -1, {}, d, {}}; }
  static Action open_app(std::string name) {
    return {ActionType::open_app, -1, {}, Direction::down, std::move(name)};
  }
  static Action navigate_back() { return {ActionType::navigate_back, -1, {}, Direction::down, {}}; }
  static Action navigate_home() { return {ActionType::navigate_home, -1, {}, Direction::down, {}}; }
  static Action terminate(std::string payload) {
    return {ActionType::terminate, -1, std::move(payload), Direction::down, {}};
  }

  bool targets_node() const;
  bool operator==(const Action& other) const;
};

// Wire form mirrors the executor prompt's action objects:
// {"action_type": "click", "index": 3}, {"action_type": "scroll", "direction": "down"}, ...
nlohmann::json to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

// Short human-readable rendering used in histories and trajectory summaries.
std::string describe(const Action& a);

}  // namespace adec::sim

#pragma once

#include <string>
#include <string_view>

#include "adec/sim/action.hpp"

namespace adec::backends {

// What a meta-instruction asks for, before any node is chosen.
//
//   open_app Contacts | open the Contacts app      -> open_app
//   tap 'Save' | click Save | press | select        -> click
//   long_press 'Alice'                              -> long_press
//   type 'Alice' into 'Name'                        -> input
//   scroll down                                     -> scroll
//   swipe left on 'Slider'                          -> swipe
//   navigate_back | go back | back                  -> back
//   navigate_home | go home | home                  -> home
//
// Anything else is a click whose target is the whole text.
struct Intent {
  enum class Verb { click, long_press, input, scroll, swipe, open_app, back, home };
  Verb verb = Verb::click;
  std::string target;  // semantic target phrase (node verbs)
  std::string text;    // input text
  sim::Direction direction = sim::Direction::down;
  std::string app;

  bool needs_node() const {
    return verb == Verb::click || verb == Verb::long_press || verb == Verb::input || verb == Verb::swipe;
  }
};

Intent parse_intent(std::string_view meta_text);

}  // namespace adec::backends

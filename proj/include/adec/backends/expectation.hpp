#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adec/sim/world.hpp"

namespace adec::backends {

// One checkable claim lifted out of an expectation sentence.
//
//   app     "The Contacts app ..."              app_name == Contacts
//   text    "... shows 'Alice'"                 some visible text contains Alice
//   absent  "... no longer shows 'Carol'"       no visible text contains Carol
//   widget  "The Wi-Fi toggle is off"           widget state of that toggle
//   field   "The Name field shows 'Alice'"      field contents
//   answer  "... showing the Phone value"       an element labelled Phone has text
//   home    "The home screen is visible"        on the home screen
struct Feature {
  enum class Kind { app, text, absent, widget, field, answer, home };
  Kind kind = Kind::text;
  std::string label;
  std::string value;
};

struct CompiledExpectation {
  std::vector<Feature> features;
};

CompiledExpectation compile_expectation(std::string_view expectation);

struct FeatureMatch {
  double score = 0.0;          // matched / required; 0.5 when nothing was recognised
  std::vector<bool> matched;   // parallel to features
  std::optional<std::string> answer;
};

FeatureMatch match_expectation(const CompiledExpectation& e, const sim::VisualState& v);

// Lower-cased content words: stopwords and action verbs dropped, plural and
// possessive endings trimmed.
std::vector<std::string> content_tokens(std::string_view text);

}  // namespace adec::backends

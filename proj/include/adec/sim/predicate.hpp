#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace adec::sim {

// Declarative condition over world state (or over a QA answer payload).
//
//   {"all": [p, ...]}  {"any": [p, ...]}  {"not": p}
//   {"var": "k", "equals": "v"}   {"var": "k", "nonempty": true}
//   {"list": "contacts", "contains": "Alice"}
//   {"screen": "contact_view"}
//   {"answer": "555-0102"}  or  {"answer": ["on", "enabled"]}
struct Predicate {
  enum class Kind { all, any, negate, var_equals, var_nonempty, list_contains, screen, answer };

  Kind kind = Kind::all;
  std::string key;
  std::string value;
  std::vector<std::string> answers;
  std::vector<Predicate> children;

  bool uses_answer() const;
};

Predicate predicate_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json to_json(const Predicate& p);

// Read-only view of the state a predicate may inspect.
struct PredicateContext {
  std::function<std::string(const std::string&)> var;
  std::function<std::vector<std::string>(const std::string&)> list;
  std::string screen;
  std::optional<std::string> answer;
};

bool evaluate(const Predicate& p, const PredicateContext& ctx);

// Lower-case and collapse runs of whitespace; used for answer matching.
std::string normalize_answer(std::string_view s);

}  // namespace adec::sim

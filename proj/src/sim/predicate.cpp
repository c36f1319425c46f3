#include "adec/sim/predicate.hpp"

#include <algorithm>
#include <cctype>

#include "adec/sim/json_util.hpp"

namespace adec::sim {

using json_util::child;

bool Predicate::uses_answer() const {
  if (kind == Kind::answer) return true;
  return std::any_of(children.begin(), children.end(), [](const Predicate& c) { return c.uses_answer(); });
}

Predicate predicate_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "predicate must be an object");
  Predicate p;
  auto children_of = [&](const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.empty()) throw ParseError(child(path, key), "expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      p.children.push_back(predicate_from_json(arr[i], child(child(path, key), i)));
    }
  };
  if (j.contains("all")) {
    p.kind = Predicate::Kind::all;
    children_of("all");
  } else if (j.contains("any")) {
    p.kind = Predicate::Kind::any;
    children_of("any");
  } else if (j.contains("not")) {
    p.kind = Predicate::Kind::negate;
    p.children.push_back(predicate_from_json(j["not"], child(path, "not")));
  } else if (j.contains("var")) {
    p.key = json_util::require_string(j, "var", path);
    if (j.contains("equals")) {
      p.kind = Predicate::Kind::var_equals;
      p.value = json_util::require_string(j, "equals", path);
    } else if (j.contains("nonempty")) {
      p.kind = Predicate::Kind::var_nonempty;
    } else {
      throw ParseError(path, "var predicate needs \"equals\" or \"nonempty\"");
    }
  } else if (j.contains("list")) {
    p.kind = Predicate::Kind::list_contains;
    p.key = json_util::require_string(j, "list", path);
    p.value = json_util::require_string(j, "contains", path);
  } else if (j.contains("screen")) {
    p.kind = Predicate::Kind::screen;
    p.value = json_util::require_string(j, "screen", path);
  } else if (j.contains("answer")) {
    p.kind = Predicate::Kind::answer;
    const auto& a = j["answer"];
    if (a.is_string()) {
      p.answers.push_back(a.get<std::string>());
    } else if (a.is_array() && !a.empty()) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_string()) throw ParseError(child(child(path, "answer"), i), "expected a string");
        p.answers.push_back(a[i].get<std::string>());
      }
    } else {
      throw ParseError(child(path, "answer"), "expected a string or non-empty array of strings");
    }
  } else {
    throw ParseError(path, "unknown predicate form");
  }
  return p;
}

nlohmann::json to_json(const Predicate& p) {
  auto kids = [&] {
    auto arr = nlohmann::json::array();
    for (const auto& c : p.children) arr.push_back(to_json(c));
    return arr;
  };
  switch (p.kind) {
    case Predicate::Kind::all:
      return {{"all", kids()}};
    case Predicate::Kind::any:
      return {{"any", kids()}};
    case Predicate::Kind::negate:
      return {{"not", to_json(p.children.at(0))}};
    case Predicate::Kind::var_equals:
      return {{"var", p.key}, {"equals", p.value}};
    case Predicate::Kind::var_nonempty:
      return {{"var", p.key}, {"nonempty", true}};
    case Predicate::Kind::list_contains:
      return {{"list", p.key}, {"contains", p.value}};
    case Predicate::Kind::screen:
      return {{"screen", p.value}};
    case Predicate::Kind::answer:
      return {{"answer", p.answers}};
  }
  return nullptr;
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

bool evaluate(const Predicate& p, const PredicateContext& ctx) {
  switch (p.kind) {
    case Predicate::Kind::all:
      return std::all_of(p.children.begin(), p.children.end(), [&](const Predicate& c) { return evaluate(c, ctx); });
    case Predicate::Kind::any:
      return std::any_of(p.children.begin(), p.children.end(), [&](const Predicate& c) { return evaluate(c, ctx); });
    case Predicate::Kind::negate:
      return !evaluate(p.children.at(0), ctx);
    case Predicate::Kind::var_equals:
      return ctx.var && ctx.var(p.key) == p.value;
    case Predicate::Kind::var_nonempty:
      return ctx.var && !ctx.var(p.key).empty();
    case Predicate::Kind::list_contains: {
      if (!ctx.list) return false;
      const auto items = ctx.list(p.key);
      return std::find(items.begin(), items.end(), p.value) != items.end();
    }
    case Predicate::Kind::screen:
      return ctx.screen == p.value;
    case Predicate::Kind::answer: {
      if (!ctx.answer) return false;
      const auto got = normalize_answer(*ctx.answer);
      return std::any_of(p.answers.begin(), p.answers.end(),
                         [&](const std::string& a) { return normalize_answer(a) == got; });
    }
  }
  return false;
}

}  // namespace adec::sim

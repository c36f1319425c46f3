#include "adec/backends/expectation.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "adec/sim/predicate.hpp"

namespace adec::backends {
namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool iequals(const std::string& a, const std::string& b) { return lower(a) == lower(b); }

bool contains_ci(const std::string& hay, const std::string& needle) {
  return sim::normalize_answer(hay).find(sim::normalize_answer(needle)) != std::string::npos;
}

const sim::VisualElement* find_widget(const sim::VisualState& v, std::string_view prefix, const std::string& label) {
  for (const auto& e : v.elements) {
    if (e.widget.rfind(prefix, 0) != 0) continue;
    if (iequals(e.label, label) || iequals(e.text, label)) return &e;
  }
  return nullptr;
}

// Blanks out a matched span so later rules do not see its quotes again.
void erase_span(std::string& s, std::size_t pos, std::size_t len) { s.replace(pos, len, std::string(len, ' ')); }

}  // namespace

std::vector<std::string> content_tokens(std::string_view text) {
  static const std::set<std::string> stop = {
      "the", "a",    "an",   "is",   "are",  "of",   "to",   "in",   "on",   "for",  "and",  "with", "it",
      "its", "this", "that", "be",   "as",   "at",   "by",   "from", "into", "now",  "then", "shows",
      "show", "showing", "visible", "displayed", "screen", "button", "new", "has", "been", "which", "what",
      "tap", "click", "press", "select", "open", "type", "enter", "input", "scroll", "swipe", "navigate",
      "go", "long_press", "long", "hit", "choose"};
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (cur.size() > 2 && cur.compare(cur.size() - 2, 2, "'s") == 0) cur.resize(cur.size() - 2);
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    if (cur.size() > 3 && cur.back() == 's' && cur[cur.size() - 2] != 's') cur.pop_back();
    if (!cur.empty() && !stop.count(cur) && std::find(out.begin(), out.end(), cur) == out.end()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'' || ch == '-' || ch == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

CompiledExpectation compile_expectation(std::string_view expectation) {
  CompiledExpectation out;
  std::string s(expectation);
  std::smatch m;
  using Kind = Feature::Kind;

  static const std::regex field_re(R"(\b(?:the\s+)?([A-Za-z][\w\- ]*?)\s+field\s+(?:shows|contains|reads)\s+'([^']*)')",
                                   std::regex::icase);
  while (std::regex_search(s, m, field_re)) {
    out.features.push_back({Kind::field, m[1].str(), m[2].str()});
    erase_span(s, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
  }
  static const std::regex widget_re(R"(\b(?:the\s+)?([A-Za-z][\w\- ]*?)\s+(?:toggle|switch)\s+is\s+(on|off)\b)",
                                    std::regex::icase);
  while (std::regex_search(s, m, widget_re)) {
    out.features.push_back({Kind::widget, m[1].str(), lower(m[2].str())});
    erase_span(s, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
  }
  static const std::regex absent_re(R"((?:no longer shows|does not show|no longer lists|does not list|without)\s+'([^']*)')",
                                    std::regex::icase);
  while (std::regex_search(s, m, absent_re)) {
    out.features.push_back({Kind::absent, "", m[1].str()});
    erase_span(s, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
  }
  static const std::regex answer_re(R"(\bthe\s+([A-Za-z][\w\- ]*?)\s+value\b)", std::regex::icase);
  while (std::regex_search(s, m, answer_re)) {
    out.features.push_back({Kind::answer, m[1].str(), ""});
    erase_span(s, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
  }
  static const std::regex app_re(R"(\b[Tt]he\s+([A-Z][\w\-]*(?:\s+[A-Z][\w\-]*)*)\s+app\b)");
  if (std::regex_search(s, m, app_re)) {
    out.features.push_back({Kind::app, m[1].str(), ""});
    erase_span(s, static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.length(0)));
  }
  static const std::regex home_re(R"(\bhome\s+screen\b)", std::regex::icase);
  if (std::regex_search(s, m, home_re)) out.features.push_back({Kind::home, "", ""});

  static const std::regex quoted_re(R"((?:^|[\s(])'([^']+)'(?=$|[\s.,;:!?)]))");
  for (auto it = std::sregex_iterator(s.begin(), s.end(), quoted_re); it != std::sregex_iterator(); ++it) {
    out.features.push_back({Kind::text, "", (*it)[1].str()});
  }
  return out;
}

FeatureMatch match_expectation(const CompiledExpectation& e, const sim::VisualState& v) {
  FeatureMatch out;
  if (e.features.empty()) {
    out.score = 0.5;
    return out;
  }
  int hits = 0;
  for (const auto& f : e.features) {
    bool ok = false;
    switch (f.kind) {
      case Feature::Kind::app:
        ok = iequals(v.app_name, f.label);
        break;
      case Feature::Kind::home:
        ok = v.on_home;
        break;
      case Feature::Kind::text:
        ok = std::any_of(v.visible_texts.begin(), v.visible_texts.end(),
                         [&](const std::string& t) { return contains_ci(t, f.value); });
        break;
      case Feature::Kind::absent:
        ok = std::none_of(v.visible_texts.begin(), v.visible_texts.end(),
                          [&](const std::string& t) { return contains_ci(t, f.value); });
        break;
      case Feature::Kind::widget:
      case Feature::Kind::field: {
        const auto* el = find_widget(v, f.kind == Feature::Kind::widget ? "toggle:" : "field:", f.label);
        if (el) {
          const auto key = el->widget.substr(el->widget.find(':') + 1);
          auto it = v.widget_states.find(key);
          ok = it != v.widget_states.end() && sim::normalize_answer(it->second) == sim::normalize_answer(f.value);
        }
        break;
      }
      case Feature::Kind::answer:
        for (const auto& el : v.elements) {
          if (iequals(el.label, f.label) && !el.text.empty() && !el.clickable) {
            ok = true;
            out.answer = el.text;
            break;
          }
        }
        break;
    }
    out.matched.push_back(ok);
    if (ok) ++hits;
  }
  out.score = static_cast<double>(hits) / static_cast<double>(e.features.size());
  return out;
}

}  // namespace adec::backends

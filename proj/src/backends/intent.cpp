#include "adec/backends/intent.hpp"

#include <cctype>
#include <regex>
#include <vector>

namespace adec::backends {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) || s[e - 1] == '.')) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

std::vector<std::string> quoted(const std::string& s) {
  static const std::regex re(R"re('([^']*)'|"([^"]*)")re");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].matched ? (*it)[1].str() : (*it)[2].str());
  }
  return out;
}

std::string strip_quotes(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

std::optional<sim::Direction> direction_word(const std::string& w) { return sim::parse_direction(w); }

}  // namespace

Intent parse_intent(std::string_view meta_text) {
  Intent in;
  const std::string text = trim(meta_text);
  const std::string low = lower(text);
  const auto q = quoted(text);

  if (starts_with(low, "open_app")) {
    in.verb = Intent::Verb::open_app;
    in.app = strip_quotes(text.substr(8));
    return in;
  }
  static const std::regex open_re(R"(^(?:open|launch)\s+(?:the\s+)?(.+?)\s+app$)", std::regex::icase);
  std::smatch m;
  if (std::regex_match(text, m, open_re)) {
    in.verb = Intent::Verb::open_app;
    in.app = strip_quotes(m[1].str());
    return in;
  }
  if (starts_with(low, "navigate_back") || starts_with(low, "navigate back") || starts_with(low, "go back") ||
      low == "back" || starts_with(low, "press back")) {
    in.verb = Intent::Verb::back;
    return in;
  }
  if (starts_with(low, "navigate_home") || starts_with(low, "navigate home") || starts_with(low, "go home") ||
      starts_with(low, "go to the home screen") || low == "home" || starts_with(low, "press home")) {
    in.verb = Intent::Verb::home;
    return in;
  }
  static const std::regex scroll_re(R"(^scroll\s+(up|down|left|right)\b.*)");
  if (std::regex_match(low, m, scroll_re)) {
    in.verb = Intent::Verb::scroll;
    in.direction = *direction_word(m[1].str());
    return in;
  }
  static const std::regex swipe_re(R"(^swipe\s+(up|down|left|right)(?:\s+on\s+(.*))?$)");
  if (std::regex_match(low, m, swipe_re)) {
    in.verb = Intent::Verb::swipe;
    in.direction = *direction_word(m[1].str());
    in.target = q.empty() ? (m[2].matched ? strip_quotes(text.substr(static_cast<std::size_t>(m.position(2)))) : "")
                          : q.back();
    return in;
  }
  for (std::string_view verb : {"type ", "enter ", "input ", "fill in "}) {
    if (!starts_with(low, verb)) continue;
    in.verb = Intent::Verb::input;
    if (q.size() >= 2) {
      in.text = q[0];
      in.target = q[1];
    } else {
      const auto into = low.find(" into ");
      const std::string what = text.substr(verb.size(), into == std::string::npos ? std::string::npos
                                                                                  : into - verb.size());
      in.text = q.empty() ? strip_quotes(what) : q[0];
      in.target = into == std::string::npos ? "" : strip_quotes(text.substr(into + 6));
    }
    return in;
  }
  for (std::string_view verb : {"long_press ", "long press ", "long-press "}) {
    if (!starts_with(low, verb)) continue;
    in.verb = Intent::Verb::long_press;
    in.target = q.empty() ? strip_quotes(text.substr(verb.size())) : q[0];
    return in;
  }
  in.verb = Intent::Verb::click;
  for (std::string_view verb : {"tap on ", "tap ", "click on ", "click ", "press ", "select ", "choose ", "hit "}) {
    if (!starts_with(low, verb)) continue;
    in.target = q.empty() ? strip_quotes(text.substr(verb.size())) : q[0];
    return in;
  }
  in.target = q.empty() ? text : q[0];
  return in;
}

}  // namespace adec::backends

#include "adec/backends/prompts.hpp"

#include <regex>

#include "adec/error.hpp"
#include "adec_prompts.hpp"

namespace adec::backends {
namespace {

const std::regex& placeholder_re() {
  static const std::regex re(R"(\{([a-z_][a-z0-9_]*)\})");
  return re;
}

// Alternating literal / placeholder pieces; literals[i] precedes names[i].
struct Pieces {
  std::vector<std::string> literals;
  std::vector<std::string> names;
};

Pieces split(std::string_view text) {
  Pieces p;
  const std::string s(text);
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), placeholder_re()); it != std::sregex_iterator(); ++it) {
    p.literals.push_back(s.substr(last, static_cast<std::size_t>(it->position()) - last));
    p.names.push_back((*it)[1].str());
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  p.literals.push_back(s.substr(last));
  return p;
}

}  // namespace

std::vector<std::string> template_ids() {
  std::vector<std::string> ids;
  for (const auto& a : generated::kPrompts) ids.emplace_back(a.id);
  return ids;
}

std::string_view template_text(std::string_view id) {
  for (const auto& a : generated::kPrompts) {
    if (a.id == id) return a.text;
  }
  throw TemplateError("unknown prompt template \"" + std::string(id) + "\"");
}

std::vector<std::string> placeholders(std::string_view id) { return split(template_text(id)).names; }

std::string render_prompt(std::string_view id, const Bindings& bindings) {
  const auto pieces = split(template_text(id));
  std::string out = pieces.literals[0];
  for (std::size_t i = 0; i < pieces.names.size(); ++i) {
    auto it = bindings.find(pieces.names[i]);
    if (it == bindings.end()) {
      throw TemplateError("template \"" + std::string(id) + "\": unbound placeholder {" + pieces.names[i] + "}");
    }
    out += it->second;
    out += pieces.literals[i + 1];
  }
  return out;
}

Bindings extract_bindings(std::string_view id, std::string_view rendered) {
  const auto pieces = split(template_text(id));
  Bindings out;
  const auto mismatch = [&] { return TemplateError("text does not match template \"" + std::string(id) + "\""); };
  if (rendered.substr(0, pieces.literals[0].size()) != pieces.literals[0]) throw mismatch();
  std::size_t pos = pieces.literals[0].size();
  for (std::size_t i = 0; i < pieces.names.size(); ++i) {
    const auto& next = pieces.literals[i + 1];
    std::size_t end;
    if (i + 1 == pieces.names.size()) {
      if (rendered.size() < pos + next.size() || rendered.substr(rendered.size() - next.size()) != next) {
        throw mismatch();
      }
      end = rendered.size() - next.size();
    } else {
      end = rendered.find(next, pos);
      if (end == std::string_view::npos) throw mismatch();
    }
    out[pieces.names[i]] = std::string(rendered.substr(pos, end - pos));
    pos = end + next.size();
  }
  if (pieces.names.empty() && rendered != pieces.literals[0]) throw mismatch();
  return out;
}

}  // namespace adec::backends

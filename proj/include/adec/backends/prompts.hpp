#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace adec::backends {

using Bindings = std::map<std::string, std::string>;

// Template ids: designer, designer_qa, replan, orchestrator,
// orchestrator_no_expectation, executor.
std::vector<std::string> template_ids();
std::string_view template_text(std::string_view id);

// Placeholder names in order of appearance. A placeholder is `{identifier}`.
std::vector<std::string> placeholders(std::string_view id);

// Throws TemplateError on an unknown template or an unbound placeholder.
// Bindings that the template does not use are ignored.
std::string render_prompt(std::string_view id, const Bindings& bindings);

// Inverse of render_prompt for values that do not contain the literal text
// following their placeholder.
Bindings extract_bindings(std::string_view id, std::string_view rendered);

}  // namespace adec::backends

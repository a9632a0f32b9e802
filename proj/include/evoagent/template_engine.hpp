#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace evoagent {

struct TemplateError : std::runtime_error {
    explicit TemplateError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal text templating:
//   {{ name }}            -> substituted with vars.at("name"); unknown name is an error
//   {{#flag}}...{{/flag}} -> body rendered iff vars["flag"] is present and non-empty
// Sections nest; variables inside an inactive section are not resolved.
using TemplateVars = std::map<std::string, std::string>;

std::string render_template(const std::string& text, const TemplateVars& vars);

// Structural validation only (balanced delimiters and sections); returns the
// error message instead of throwing so callers can collect results.
std::optional<std::string> check_template(const std::string& text);

}  // namespace evoagent

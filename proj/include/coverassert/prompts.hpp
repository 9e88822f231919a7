#pragma once

#include <map>
#include <string>
#include <string_view>

namespace coverassert {

// Versioned template by name ("intent_v1", "split_v1", ...). Throws
// InvalidArgument for unknown names.
std::string_view prompt_template(std::string_view name);

// Replaces every {{key}} with its value.
std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars);

}  // namespace coverassert

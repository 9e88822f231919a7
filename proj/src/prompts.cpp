#include "coverassert/prompts.hpp"

#include <array>
#include <utility>

#include "coverassert/error.hpp"

namespace coverassert {
namespace {

constexpr std::pair<std::string_view, std::string_view> kTemplates[] = {
#include "coverassert/prompt_templates.inc"
};

}  // namespace

std::string_view prompt_template(std::string_view name) {
  for (auto [key, text] : kTemplates)
    if (key == name) return text;
  throw InvalidArgument("unknown prompt template: " + std::string(name));
}

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars) {
  std::string out(prompt_template(name));
  for (const auto& [key, value] : vars) {
    const std::string needle = "{{" + key + "}}";
    for (auto pos = out.find(needle); pos != std::string::npos;
         pos = out.find(needle, pos + value.size()))
      out.replace(pos, needle.size(), value);
  }
  return out;
}

}  // namespace coverassert

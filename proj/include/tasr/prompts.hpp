#pragma once

#include <map>
#include <string>
#include <string_view>

#include "tasr/llm.hpp"

namespace tasr {

// Prompt assets live in prompts/<name>.txt: system prompt, a line "---",
// then the user template with {{placeholder}} fields. They are compiled in.
struct PromptTemplate {
    std::string system;
    std::string user;
};

// Throws Error(ParseError) for an unknown asset name.
const PromptTemplate& prompt_template(std::string_view name);

// Replaces every {{key}}. A placeholder without a value throws Error(ParseError).
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

LlmRequest build_request(RoleTag role, std::string_view asset,
                         const std::map<std::string, std::string>& vars);

}  // namespace tasr

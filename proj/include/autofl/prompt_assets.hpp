#pragma once

#include <string_view>

// Prompt templates embedded at build time from assets/prompts/*.txt.
// Placeholders use `{{name}}` syntax; a single trailing newline is dropped.
namespace autofl::assets {

std::string_view system_prompt();
std::string_view root_cause_example();
std::string_view user_failure();
std::string_view user_directive();
std::string_view stage2();
std::string_view stage2_reminder();
std::string_view no_tools_reminder();
std::string_view baseline_system();

}  // namespace autofl::assets

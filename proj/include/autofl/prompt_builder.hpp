#pragma once

#include <span>
#include <string>
#include <vector>

#include "autofl/repo_model.hpp"

namespace autofl {

/// Repetition count above which a repeated run of stack frames is condensed.
inline constexpr int kCondenseThreshold = 5;

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::string stage2_text;
};

/// Comment appended to the failing line of a minimized test.
std::string failure_marker(SourceStyle style);

/// Keeps only statements up to (and including) the outermost statement that
/// contains `failure_line`, drops earlier assertion statements, and marks the
/// failing line. The enclosing method header and closing delimiter are kept.
std::vector<SourceLine> minimize_test_snippet(std::span<const SourceLine> test_source, int failure_line,
                                              SourceStyle style = SourceStyle::brace,
                                              const AssertionRules& rules = {});

/// Marker frame text recording how often the preceding frames were repeated.
std::string condensation_marker(std::size_t count);

/// Drops frames outside the target repository, then replaces any contiguous
/// run repeated more than kCondenseThreshold times by one copy plus a marker.
std::vector<StackFrame> minimize_stack_trace(std::span<const StackFrame> frames);

/// `NNN : text` per line.
std::string render_numbered(std::span<const SourceLine> lines);

/// Error message followed by minimized frames, one per line.
std::string render_failure(const TestFailure& failure);

std::string build_system_prompt(int n_budget);
std::string stage2_prompt();

PromptBundle build_stage1(const TestFailure& failure, int n_budget, const SnapshotOptions& options = {});

/// Several failing tests concatenated into a single user prompt.
PromptBundle build_stage1(std::span<const TestFailure* const> failures, int n_budget,
                          const SnapshotOptions& options = {});

/// Prompt for the no-tools baseline: failure sections only, no function directive.
PromptBundle build_baseline(std::span<const TestFailure* const> failures, const SnapshotOptions& options = {});

/// Replaces `{{key}}` placeholders in a single pass. Unknown keys are left as is.
std::string fill_template(std::string_view templ, std::span<const std::pair<std::string_view, std::string>> values);

}  // namespace autofl

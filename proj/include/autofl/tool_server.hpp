#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "autofl/repo_model.hpp"

namespace autofl {

inline constexpr std::string_view kCoveredClassesFn = "get_failing_tests_covered_classes";
inline constexpr std::string_view kCoveredMethodsFn = "get_failing_tests_covered_methods";
inline constexpr std::string_view kCodeSnippetFn = "get_code_snippet";
inline constexpr std::string_view kCommentsFn = "get_comments";

struct FunctionParameter {
  std::string name;
  std::string description;
};

struct FunctionSchema {
  std::string name;
  std::string description;
  std::vector<FunctionParameter> parameters;
};

/// The four debugging functions offered to the model.
const std::vector<FunctionSchema>& debugging_functions();

enum class CallOutcome { ok, guidance, error };

struct FunctionCallLogEntry {
  std::string run_id;
  int step = 0;
  std::string function;
  std::string raw_arguments;
  CallOutcome outcome = CallOutcome::ok;
  std::string response;
  std::vector<MethodSignature> mentioned_signatures;  // sorted, unique
};

struct ToolServerOptions {
  /// Responses longer than this are cut and suffixed with a truncation notice. 0 disables.
  std::size_t response_byte_limit = 16384;
};

/// Text appended to responses cut at the byte limit.
inline constexpr std::string_view kTruncationNotice = "\n... (response truncated)";

/// Serves debugging function calls for one run and keeps its call log.
/// The snapshot is only read.
class ToolServer {
 public:
  ToolServer(const RepoSnapshot& snapshot, std::vector<std::string> failing_tests, std::string run_id,
             ToolServerOptions options = {});

  /// Executes one call. Invalid calls yield a guidance response; never throws on bad input.
  const FunctionCallLogEntry& dispatch(std::string_view name, std::string_view raw_arguments);

  const std::vector<FunctionCallLogEntry>& log() const { return log_; }

 private:
  struct Response {
    std::string text;
    CallOutcome outcome = CallOutcome::ok;
    std::string subject;  // argument value scanned for mentions
  };

  Response covered_classes_response() const;
  Response covered_methods_response(std::string_view raw_arguments) const;
  Response snippet_or_comments(std::string_view name, std::string_view raw_arguments) const;
  std::string unknown_signature_guidance(std::string_view query) const;

  const RepoSnapshot& snapshot_;
  std::vector<std::string> failing_tests_;
  std::string run_id_;
  ToolServerOptions options_;
  std::vector<FunctionCallLogEntry> log_;
};

/// Signatures named in free text: every `name(...)` or `Class.name(...)` form
/// that the resolution cascade maps to exactly one method.
std::vector<MethodSignature> extract_mentions(const RepoSnapshot& snapshot, std::string_view text);

/// Guidance for a partial signature that matched several methods.
std::string ambiguity_guidance(const std::vector<std::string>& candidates);

/// Cuts `text` to at most `limit` bytes on a UTF-8 boundary, notice included.
std::string truncate_response(std::string text, std::size_t limit);

std::string_view to_string(CallOutcome outcome);

}  // namespace autofl

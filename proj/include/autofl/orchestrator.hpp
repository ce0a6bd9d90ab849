#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autofl/llm_backend.hpp"
#include "autofl/repo_model.hpp"
#include "autofl/tool_server.hpp"

namespace autofl {

enum class SelectionPolicy {
  round_robin,   // run k uses failure k mod |failures|
  fixed,         // every run uses RunConfig::fixed_test
  concatenated,  // every run sees all failing tests in one prompt
};

struct RunConfig {
  int n_budget = 10;
  int r_runs = 5;
  bool tools_enabled = true;
  SelectionPolicy policy = SelectionPolicy::round_robin;
  std::size_t fixed_test = 0;
  std::size_t response_byte_limit = ToolServerOptions{}.response_byte_limit;
  int parallel = 1;
};

/// Throws std::invalid_argument on out-of-range fields.
void validate(const RunConfig& config);

enum class RunStatus { ok, length_error, budget_exhausted, parse_empty, transport_error };

std::string_view to_string(RunStatus status);
std::optional<RunStatus> parse_run_status(std::string_view text);
std::string_view to_string(SelectionPolicy policy);
std::optional<SelectionPolicy> parse_selection_policy(std::string_view text);

struct RunRecord {
  std::string run_id;
  std::size_t run_index = 0;
  std::vector<std::string> test_ids;
  std::optional<std::string> explanation;
  std::vector<MethodSignature> predicted;
  std::vector<std::string> raw_answer_lines;
  RunStatus status = RunStatus::ok;
  std::vector<FunctionCallLogEntry> function_log;
  int llm_calls = 0;  // LLM-initiated calls that were dispatched
  std::string error_detail;
};

/// Resolves each answer line to a method. Fencing, backticks and list bullets
/// are stripped; ambiguous or unknown lines are dropped (and reported through
/// `dropped` when given); duplicates keep their first position.
std::vector<MethodSignature> parse_answer(std::string_view raw, const RepoSnapshot& snapshot,
                                          std::vector<std::string>* dropped = nullptr);

/// One two-stage dialogue over the given failing tests.
RunRecord run_once(const RepoSnapshot& snapshot, std::span<const TestFailure* const> failures,
                   const RunConfig& config, ChatBackend& backend, std::string run_id, std::size_t run_index = 0);

RunRecord run_once(const RepoSnapshot& snapshot, const TestFailure& failure, const RunConfig& config,
                   ChatBackend& backend, std::string run_id = "run-1");

/// Creates the backend session used by run `run_index`.
using BackendFactory = std::function<std::shared_ptr<ChatBackend>(std::size_t run_index)>;

/// Failing tests used by run `run_index` under the configured policy.
std::vector<const TestFailure*> select_failures(const RepoSnapshot& snapshot, const RunConfig& config,
                                                std::size_t run_index);

/// R independent runs, up to `config.parallel` at a time. Records come back in
/// run-index order. Run-level failures are captured in the records; errors that
/// invalidate the whole campaign (replay mismatch, persistence) propagate.
std::vector<RunRecord> run_campaign(const RepoSnapshot& snapshot, const RunConfig& config,
                                    const BackendFactory& backends);

}  // namespace autofl

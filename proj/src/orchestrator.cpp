#include "autofl/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "autofl/errors.hpp"
#include "autofl/prompt_assets.hpp"
#include "autofl/prompt_builder.hpp"

namespace autofl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_answer_line(std::string_view line) {
  line = trim(line);
  if (line.starts_with("- ") || line.starts_with("* ") || line.starts_with("+ ")) line = trim(line.substr(2));
  std::size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits])) != 0) ++digits;
  if (digits > 0 && digits + 1 < line.size() && (line[digits] == '.' || line[digits] == ')') &&
      line[digits + 1] == ' ') {
    line = trim(line.substr(digits + 2));
  }
  std::string out;
  for (char c : line) {
    if (c != '`') out += c;
  }
  while (!out.empty() && (out.back() == ';' || out.back() == ',' || out.back() == '.')) out.pop_back();
  return std::string(trim(out));
}

std::vector<std::string> answer_lines(std::string_view raw) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto nl = raw.find('\n', start);
    if (nl == std::string_view::npos) nl = raw.size();
    const auto line = trim(raw.substr(start, nl - start));
    if (!line.empty()) lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> test_ids_of(std::span<const TestFailure* const> failures) {
  std::vector<std::string> ids;
  for (const auto* f : failures) ids.push_back(f->test_id);
  return ids;
}

}  // namespace

void validate(const RunConfig& config) {
  if (config.n_budget < 0) throw std::invalid_argument("n_budget must be >= 0");
  if (config.r_runs < 1) throw std::invalid_argument("r_runs must be >= 1");
  if (config.parallel < 1) throw std::invalid_argument("parallel must be >= 1");
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::ok:
      return "ok";
    case RunStatus::length_error:
      return "length_error";
    case RunStatus::budget_exhausted:
      return "budget_exhausted";
    case RunStatus::parse_empty:
      return "parse_empty";
    case RunStatus::transport_error:
      return "transport_error";
  }
  return "transport_error";
}

std::optional<RunStatus> parse_run_status(std::string_view text) {
  for (auto s : {RunStatus::ok, RunStatus::length_error, RunStatus::budget_exhausted, RunStatus::parse_empty,
                 RunStatus::transport_error}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(SelectionPolicy policy) {
  switch (policy) {
    case SelectionPolicy::round_robin:
      return "round_robin";
    case SelectionPolicy::fixed:
      return "fixed";
    case SelectionPolicy::concatenated:
      return "concatenated";
  }
  return "round_robin";
}

std::optional<SelectionPolicy> parse_selection_policy(std::string_view text) {
  for (auto p : {SelectionPolicy::round_robin, SelectionPolicy::fixed, SelectionPolicy::concatenated}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::vector<MethodSignature> parse_answer(std::string_view raw, const RepoSnapshot& snapshot,
                                          std::vector<std::string>* dropped) {
  std::vector<MethodSignature> out;
  for (const auto& line : answer_lines(raw)) {
    if (line.starts_with("```")) continue;
    const std::string candidate = strip_answer_line(line);
    const auto res = candidate.empty() ? Resolution{} : resolve_signature(snapshot, candidate);
    if (res.kind != Resolution::Kind::exact) {
      if (dropped != nullptr) dropped->push_back(line);
      continue;
    }
    if (std::find(out.begin(), out.end(), res.match->signature) == out.end()) out.push_back(res.match->signature);
  }
  return out;
}

RunRecord run_once(const RepoSnapshot& snapshot, std::span<const TestFailure* const> failures,
                   const RunConfig& config, ChatBackend& backend, std::string run_id, std::size_t run_index) {
  validate(config);
  if (failures.empty()) throw std::invalid_argument("run_once needs at least one failing test");

  RunRecord record;
  record.run_id = run_id;
  record.run_index = run_index;
  record.test_ids = test_ids_of(failures);

  ToolServer tools(snapshot, record.test_ids, run_id, ToolServerOptions{config.response_byte_limit});
  const auto& schemas = debugging_functions();
  std::span<const FunctionSchema> offered = config.tools_enabled ? std::span<const FunctionSchema>(schemas)
                                                                 : std::span<const FunctionSchema>();
  std::vector<ChatMessage> history;
  bool exhausted = false;

  auto stage2 = [&](std::string_view prompt) {
    history.push_back(ChatMessage::user(std::string(prompt)));
    BackendReply reply = backend.complete(history, offered, false);
    history.push_back(ChatMessage::assistant(reply.text));
    record.raw_answer_lines = answer_lines(reply.text);
    record.predicted = parse_answer(reply.text, snapshot);
  };

  try {
    if (!config.tools_enabled) {
      const PromptBundle bundle = build_baseline(failures, snapshot.options());
      history.push_back(ChatMessage::system(bundle.system_text));
      history.push_back(ChatMessage::user(bundle.user_text));
    } else {
      const PromptBundle bundle = build_stage1(failures, config.n_budget, snapshot.options());
      history.push_back(ChatMessage::system(bundle.system_text));
      history.push_back(ChatMessage::user(bundle.user_text));

      // Seeded call: answers the prompt's directive without costing budget.
      const FunctionCall seeded{std::string(kCoveredClassesFn), "{}"};
      const auto& seeded_entry = tools.dispatch(seeded.name, seeded.arguments);
      history.push_back(ChatMessage::function_call(seeded));
      history.push_back(ChatMessage::function_result(seeded.name, seeded_entry.response));

      while (true) {
        BackendReply reply = backend.complete(history, offered, true);
        if (reply.kind == BackendReply::Kind::final_text) {
          record.explanation = reply.text;
          history.push_back(ChatMessage::assistant(reply.text));
          break;
        }
        if (record.llm_calls >= config.n_budget) {
          exhausted = true;
          break;
        }
        const FunctionCall call = reply.call.value_or(FunctionCall{});
        const auto& entry = tools.dispatch(call.name, call.arguments);
        ++record.llm_calls;
        history.push_back(ChatMessage::function_call(call));
        history.push_back(ChatMessage::function_result(call.name, entry.response));
      }
      if (exhausted) {
        BackendReply reply = backend.complete(history, offered, false);
        record.explanation = reply.text;
        history.push_back(ChatMessage::assistant(reply.text));
      }
    }

    stage2(assets::stage2());
    if (record.predicted.empty()) stage2(assets::stage2_reminder());

    if (!record.predicted.empty()) {
      record.status = RunStatus::ok;
    } else {
      record.status = exhausted ? RunStatus::budget_exhausted : RunStatus::parse_empty;
    }
  } catch (const BudgetError& e) {
    record.status = RunStatus::length_error;
    record.predicted.clear();
    record.error_detail = e.what();
  } catch (const TransportError& e) {
    record.status = RunStatus::transport_error;
    record.predicted.clear();
    record.error_detail = e.what();
  }
  record.function_log = tools.log();
  return record;
}

RunRecord run_once(const RepoSnapshot& snapshot, const TestFailure& failure, const RunConfig& config,
                   ChatBackend& backend, std::string run_id) {
  const TestFailure* one[] = {&failure};
  return run_once(snapshot, std::span<const TestFailure* const>(one), config, backend, std::move(run_id), 0);
}

std::vector<const TestFailure*> select_failures(const RepoSnapshot& snapshot, const RunConfig& config,
                                                std::size_t run_index) {
  const auto& failures = snapshot.failures();
  if (failures.empty()) throw std::invalid_argument("snapshot has no failing tests");
  switch (config.policy) {
    case SelectionPolicy::round_robin:
      return {&failures[run_index % failures.size()]};
    case SelectionPolicy::fixed:
      if (config.fixed_test >= failures.size()) throw std::invalid_argument("fixed_test out of range");
      return {&failures[config.fixed_test]};
    case SelectionPolicy::concatenated: {
      std::vector<const TestFailure*> all;
      for (const auto& f : failures) all.push_back(&f);
      return all;
    }
  }
  return {};
}

std::vector<RunRecord> run_campaign(const RepoSnapshot& snapshot, const RunConfig& config,
                                    const BackendFactory& backends) {
  validate(config);
  if (snapshot.failures().empty()) throw std::invalid_argument("snapshot has no failing tests");

  const auto runs = static_cast<std::size_t>(config.r_runs);
  std::vector<RunRecord> records(runs);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= runs) return;
      try {
        const auto failures = select_failures(snapshot, config, k);
        auto backend = backends(k);
        records[k] = run_once(snapshot, failures, config, *backend, "run-" + std::to_string(k + 1), k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = runs;
      }
    }
  };

  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.parallel), runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

}  // namespace autofl

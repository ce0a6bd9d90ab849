#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autofl/tool_server.hpp"

namespace autofl {

enum class Role { system, user, assistant, function_call, function_result };

struct FunctionCall {
  std::string name;
  std::string arguments;  // raw JSON text as produced by the model

  friend bool operator==(const FunctionCall&, const FunctionCall&) = default;
};

struct ChatMessage {
  Role role = Role::user;
  std::string content;
  std::optional<FunctionCall> call;  // set for function_call
  std::optional<std::string> name;   // set for function_result

  static ChatMessage system(std::string text) { return {Role::system, std::move(text), {}, {}}; }
  static ChatMessage user(std::string text) { return {Role::user, std::move(text), {}, {}}; }
  static ChatMessage assistant(std::string text) { return {Role::assistant, std::move(text), {}, {}}; }
  static ChatMessage function_call(FunctionCall c) { return {Role::function_call, {}, std::move(c), {}}; }
  static ChatMessage function_result(std::string fn, std::string text) {
    return {Role::function_result, std::move(text), {}, std::move(fn)};
  }

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long total_tokens = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct BackendReply {
  enum class Kind { function_call, final_text };

  Kind kind = Kind::final_text;
  std::string text;                  // final_text payload
  std::optional<FunctionCall> call;  // function_call payload
  std::string finish_reason;
  std::optional<TokenUsage> usage;

  static BackendReply final(std::string text, std::string finish_reason = "stop") {
    return {Kind::final_text, std::move(text), {}, std::move(finish_reason), {}};
  }
  static BackendReply tool_call(FunctionCall c, std::string finish_reason = "tool_calls") {
    return {Kind::function_call, {}, std::move(c), std::move(finish_reason), {}};
  }

  friend bool operator==(const BackendReply&, const BackendReply&) = default;
};

std::string_view to_string(Role role);

/// Chat-with-tools boundary. `complete` validates the history and enforces the
/// text-only contract when tools are disabled: a tool call is re-asked once
/// with a reminder, then its raw arguments are coerced into the answer text.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Throws BudgetError when the context window is exceeded and
  /// TransportError when the request could not be served.
  BackendReply complete(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                        bool allow_tools);

 protected:
  virtual BackendReply request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                               bool allow_tools) = 0;
};

/// Stable hash of the full message chain, offered schemas and tool flag.
std::string request_fingerprint(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                bool allow_tools);

// --- Mock -------------------------------------------------------------------

/// One scripted step: a reply, or a simulated backend failure.
struct ScriptedStep {
  enum class Kind { reply, length_error, transport_error };
  Kind kind = Kind::reply;
  BackendReply reply;
};

/// Per-run step lists. Run k uses runs[k % runs.size()].
struct MockScenario {
  std::vector<std::vector<ScriptedStep>> runs;
};

MockScenario parse_scenario(const nlohmann::json& doc);
MockScenario load_scenario(const std::filesystem::path& path);

/// Replays scripted steps in order, one per request. Running past the end of
/// the script is a transport error.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(std::vector<ScriptedStep> steps) : steps_(std::move(steps)) {}

  std::size_t requests_served() const { return next_; }

 protected:
  BackendReply request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                       bool allow_tools) override;

 private:
  std::vector<ScriptedStep> steps_;
  std::size_t next_ = 0;
};

// --- Record / replay ----------------------------------------------------------

struct TranscriptExchange {
  std::string fingerprint;
  BackendReply reply;

  friend bool operator==(const TranscriptExchange&, const TranscriptExchange&) = default;
};

struct TranscriptMetadata {
  std::string model;
  double temperature = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TranscriptMetadata&, const TranscriptMetadata&) = default;
};

inline constexpr int kTranscriptFormatVersion = 1;

/// Exchanges grouped per run index so concurrent runs replay independently.
struct Transcript {
  TranscriptMetadata metadata;
  std::vector<std::vector<TranscriptExchange>> runs;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

nlohmann::json transcript_to_json(const Transcript& transcript);
Transcript transcript_from_json(const nlohmann::json& doc);
Transcript load_transcript(const std::filesystem::path& path);
void save_transcript(const Transcript& transcript, const std::filesystem::path& path);

/// Thread-safe transcript sink shared by the recording sessions of a campaign.
/// When a path is set the transcript is rewritten after every exchange.
class TranscriptRecorder {
 public:
  explicit TranscriptRecorder(TranscriptMetadata metadata, std::optional<std::filesystem::path> path = {});

  void append(std::size_t run_index, TranscriptExchange exchange);
  Transcript snapshot() const;

 private:
  mutable std::mutex mutex_;
  Transcript transcript_;
  std::optional<std::filesystem::path> path_;
};

/// Pass-through wrapper appending every exchange to a recorder.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<TranscriptRecorder> recorder,
                   std::size_t run_index)
      : inner_(std::move(inner)), recorder_(std::move(recorder)), run_index_(run_index) {}

 protected:
  BackendReply request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                       bool allow_tools) override;

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<TranscriptRecorder> recorder_;
  std::size_t run_index_;
};

/// Serves recorded replies in order; throws ReplayMismatchError when a request
/// fingerprint differs from the recording or the recording is exhausted.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(std::vector<TranscriptExchange> exchanges) : exchanges_(std::move(exchanges)) {}

 protected:
  BackendReply request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                       bool allow_tools) override;

 private:
  std::vector<TranscriptExchange> exchanges_;
  std::size_t next_ = 0;
};

nlohmann::json reply_to_json(const BackendReply& reply);
BackendReply reply_from_json(const nlohmann::json& doc, const std::string& path);

}  // namespace autofl

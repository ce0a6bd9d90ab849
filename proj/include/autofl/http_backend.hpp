#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "autofl/llm_backend.hpp"

namespace autofl {

/// Settings for an OpenAI-compatible chat-completions endpoint.
struct LiveConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo-0613";
  double temperature = 1.0;
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
  int max_attempts = 3;
  int backoff_initial_ms = 1000;
  double requests_per_second = 0.0;  // 0 disables rate limiting
};

/// Missing keys keep their defaults.
LiveConfig parse_live_config(const nlohmann::json& doc);
LiveConfig load_live_config(const std::filesystem::path& path);

/// Token bucket with a capacity of one request, refilled at `rate` per second.
class TokenBucket {
 public:
  explicit TokenBucket(double rate);
  void acquire();

 private:
  std::mutex mutex_;
  double rate_;
  std::chrono::steady_clock::time_point next_;
};

/// Request body for one chat-completions call. Function calls in the history
/// are rendered as assistant tool calls with ids `call_<k>`.
nlohmann::json build_chat_request(const LiveConfig& config, const std::vector<ChatMessage>& history,
                                  std::span<const FunctionSchema> schemas, bool allow_tools);

/// Reads the first choice of a successful response. A `length` finish reason
/// raises BudgetError.
BackendReply parse_chat_response(const nlohmann::json& body);

/// Live adapter. Retries transport failures and 5xx responses with exponential
/// backoff, never context-length errors. Safe to share across runs.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(LiveConfig config, std::string api_key, std::shared_ptr<TokenBucket> limiter = nullptr);

  /// Reads the API key from the configured environment variable.
  static std::shared_ptr<HttpChatBackend> from_environment(const LiveConfig& config);

  const LiveConfig& config() const { return config_; }

 protected:
  BackendReply request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                       bool allow_tools) override;

 private:
  LiveConfig config_;
  std::string api_key_;
  std::shared_ptr<TokenBucket> limiter_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // path prefix + /chat/completions
};

}  // namespace autofl

#include "autofl/http_backend.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "autofl/errors.hpp"

namespace autofl {

using nlohmann::json;

LiveConfig parse_live_config(const json& doc) {
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  LiveConfig c;
  try {
    c.base_url = doc.value("base_url", c.base_url);
    c.model = doc.value("model", c.model);
    c.temperature = doc.value("temperature", c.temperature);
    c.api_key_env = doc.value("api_key_env", c.api_key_env);
    c.timeout_seconds = doc.value("timeout_seconds", c.timeout_seconds);
    c.max_attempts = doc.value("max_attempts", c.max_attempts);
    c.backoff_initial_ms = doc.value("backoff_initial_ms", c.backoff_initial_ms);
    c.requests_per_second = doc.value("requests_per_second", c.requests_per_second);
  } catch (const json::type_error& e) {
    throw FormatError("$", e.what());
  }
  if (c.max_attempts < 1) throw FormatError("$.max_attempts", "must be at least 1");
  return c;
}

LiveConfig load_live_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), "cannot open config file");
  const json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string(), "invalid JSON");
  return parse_live_config(doc);
}

TokenBucket::TokenBucket(double rate) : rate_(rate), next_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(1.0 / rate_));
  }
  std::this_thread::sleep_until(slot);
}

json build_chat_request(const LiveConfig& config, const std::vector<ChatMessage>& history,
                        std::span<const FunctionSchema> schemas, bool allow_tools) {
  json messages = json::array();
  int call_counter = 0;
  std::string last_call_id;
  for (const auto& m : history) {
    switch (m.role) {
      case Role::system:
      case Role::user:
      case Role::assistant:
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        break;
      case Role::function_call: {
        last_call_id = "call_" + std::to_string(call_counter++);
        const FunctionCall call = m.call.value_or(FunctionCall{});
        messages.push_back({{"role", "assistant"},
                            {"content", nullptr},
                            {"tool_calls",
                             json::array({{{"id", last_call_id},
                                           {"type", "function"},
                                           {"function", {{"name", call.name}, {"arguments", call.arguments}}}}})}});
        break;
      }
      case Role::function_result:
        messages.push_back({{"role", "tool"}, {"tool_call_id", last_call_id}, {"content", m.content}});
        break;
    }
  }

  json body{{"model", config.model}, {"messages", std::move(messages)}, {"temperature", config.temperature}};
  if (!schemas.empty()) {
    json tools = json::array();
    for (const auto& s : schemas) {
      json props = json::object();
      json required = json::array();
      for (const auto& p : s.parameters) {
        props[p.name] = {{"type", "string"}, {"description", p.description}};
        required.push_back(p.name);
      }
      tools.push_back({{"type", "function"},
                       {"function",
                        {{"name", s.name},
                         {"description", s.description},
                         {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}});
    }
    body["tools"] = std::move(tools);
    body["tool_choice"] = allow_tools ? "auto" : "none";
  }
  return body;
}

BackendReply parse_chat_response(const json& body) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw TransportError("response has no choices");
  }
  const json& choice = (*choices)[0];
  const std::string finish = choice.value("finish_reason", std::string{});
  if (finish == "length") throw BudgetError("completion stopped at the context length limit");

  const json message = choice.value("message", json::object());
  BackendReply reply;
  const auto tool_calls = message.find("tool_calls");
  const auto legacy_call = message.find("function_call");
  if (tool_calls != message.end() && tool_calls->is_array() && !tool_calls->empty()) {
    const json fn = (*tool_calls)[0].value("function", json::object());
    reply = BackendReply::tool_call({fn.value("name", std::string{}), fn.value("arguments", std::string{"{}"})}, finish);
  } else if (legacy_call != message.end() && legacy_call->is_object()) {
    reply = BackendReply::tool_call(
        {legacy_call->value("name", std::string{}), legacy_call->value("arguments", std::string{"{}"})}, finish);
  } else {
    const auto content = message.find("content");
    reply = BackendReply::final(content != message.end() && content->is_string() ? content->get<std::string>() : "",
                                finish);
  }
  if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
    reply.usage = TokenUsage{usage->value("prompt_tokens", 0L), usage->value("completion_tokens", 0L),
                             usage->value("total_tokens", 0L)};
  }
  return reply;
}

HttpChatBackend::HttpChatBackend(LiveConfig config, std::string api_key, std::shared_ptr<TokenBucket> limiter)
    : config_(std::move(config)), api_key_(std::move(api_key)), limiter_(std::move(limiter)) {
  const auto scheme_end = config_.base_url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_begin = config_.base_url.find('/', host_begin);
  origin_ = config_.base_url.substr(0, path_begin);
  std::string prefix = path_begin == std::string::npos ? "" : config_.base_url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
}

std::shared_ptr<HttpChatBackend> HttpChatBackend::from_environment(const LiveConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw TransportError("environment variable " + config.api_key_env + " is not set");
  }
  auto limiter = std::make_shared<TokenBucket>(config.requests_per_second);
  return std::make_shared<HttpChatBackend>(config, key, std::move(limiter));
}

namespace {

bool is_context_length_error(const std::string& body) {
  const json doc = json::parse(body, nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("error") && doc["error"].is_object()) {
    const json& err = doc["error"];
    if (err.value("code", std::string{}) == "context_length_exceeded") return true;
    if (err.value("message", std::string{}).find("maximum context length") != std::string::npos) return true;
  }
  return body.find("context_length_exceeded") != std::string::npos;
}

}  // namespace

BackendReply HttpChatBackend::request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                      bool allow_tools) {
  const std::string payload = build_chat_request(config_, history, schemas, allow_tools).dump();
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_initial_ms) * (1 << (attempt - 1)));
    }
    if (limiter_) limiter_->acquire();

    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_write_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      if (is_context_length_error(res->body)) throw BudgetError("context length exceeded: " + res->body);
      throw TransportError("request rejected with status " + std::to_string(res->status) + ": " + res->body);
    }
    const json body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
      last_error = "malformed response body";
      continue;
    }
    return parse_chat_response(body);
  }
  throw TransportError("giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

}  // namespace autofl

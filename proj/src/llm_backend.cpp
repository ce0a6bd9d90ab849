#include "autofl/llm_backend.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "autofl/digest.hpp"
#include "autofl/errors.hpp"
#include "autofl/prompt_assets.hpp"

namespace autofl {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
    case Role::function_call:
      return "function_call";
    case Role::function_result:
      return "function_result";
  }
  return "user";
}

BackendReply ChatBackend::complete(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                   bool allow_tools) {
  if (history.empty() || history.front().role != Role::system) {
    throw std::invalid_argument("chat history must start with a system message");
  }
  BackendReply reply = request(history, schemas, allow_tools);
  if (allow_tools || reply.kind == BackendReply::Kind::final_text) return reply;

  std::vector<ChatMessage> reminded = history;
  reminded.push_back(ChatMessage::user(std::string(assets::no_tools_reminder())));
  reply = request(reminded, schemas, false);
  if (reply.kind == BackendReply::Kind::final_text) return reply;

  BackendReply coerced = BackendReply::final(reply.call ? reply.call->arguments : std::string{}, "coerced");
  coerced.usage = reply.usage;
  return coerced;
}

std::string request_fingerprint(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                bool allow_tools) {
  json messages = json::array();
  for (const auto& m : history) {
    json e{{"role", to_string(m.role)}, {"content", m.content}};
    if (m.call) e["call"] = {{"name", m.call->name}, {"arguments", m.call->arguments}};
    if (m.name) e["name"] = *m.name;
    messages.push_back(std::move(e));
  }
  json fns = json::array();
  for (const auto& s : schemas) {
    json params = json::array();
    for (const auto& p : s.parameters) params.push_back({{"name", p.name}, {"description", p.description}});
    fns.push_back({{"name", s.name}, {"description", s.description}, {"parameters", std::move(params)}});
  }
  const json doc{{"messages", std::move(messages)}, {"functions", std::move(fns)}, {"allow_tools", allow_tools}};
  return sha256_hex(doc.dump());
}

json reply_to_json(const BackendReply& reply) {
  json doc;
  if (reply.kind == BackendReply::Kind::function_call) {
    doc["kind"] = "function_call";
    doc["name"] = reply.call ? reply.call->name : "";
    doc["arguments"] = reply.call ? reply.call->arguments : "";
  } else {
    doc["kind"] = "final_text";
    doc["text"] = reply.text;
  }
  doc["finish_reason"] = reply.finish_reason;
  if (reply.usage) {
    doc["usage"] = {{"prompt_tokens", reply.usage->prompt_tokens},
                    {"completion_tokens", reply.usage->completion_tokens},
                    {"total_tokens", reply.usage->total_tokens}};
  }
  return doc;
}

namespace {

std::string string_field(const json& doc, const char* key, const std::string& path) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) throw FormatError(path + "." + key, "expected a string");
  return it->get<std::string>();
}

// Scenario arguments may be given as an object for readability.
std::string arguments_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

ScriptedStep parse_step(const json& step, const std::string& path) {
  if (!step.is_object()) throw FormatError(path, "expected an object");
  ScriptedStep out;
  if (const auto it = step.find("function_call"); it != step.end()) {
    if (!it->is_object()) throw FormatError(path + ".function_call", "expected an object");
    FunctionCall call{string_field(*it, "name", path + ".function_call"), "{}"};
    if (const auto a = it->find("arguments"); a != it->end()) call.arguments = arguments_text(*a);
    out.reply = BackendReply::tool_call(std::move(call));
  } else if (step.contains("text")) {
    out.reply = BackendReply::final(string_field(step, "text", path));
  } else if (step.contains("error")) {
    const std::string kind = string_field(step, "error", path);
    if (kind == "length") {
      out.kind = ScriptedStep::Kind::length_error;
    } else if (kind == "transport") {
      out.kind = ScriptedStep::Kind::transport_error;
    } else {
      throw FormatError(path + ".error", "expected 'length' or 'transport'");
    }
  } else {
    throw FormatError(path, "expected one of function_call, text, error");
  }
  return out;
}

std::vector<ScriptedStep> parse_steps(const json& steps, const std::string& path) {
  if (!steps.is_array()) throw FormatError(path, "expected an array");
  std::vector<ScriptedStep> out;
  for (std::size_t i = 0; i < steps.size(); ++i) out.push_back(parse_step(steps[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

BackendReply reply_from_json(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw FormatError(path, "expected an object");
  const std::string kind = string_field(doc, "kind", path);
  BackendReply reply;
  if (kind == "function_call") {
    reply.kind = BackendReply::Kind::function_call;
    reply.call = FunctionCall{string_field(doc, "name", path), string_field(doc, "arguments", path)};
  } else if (kind == "final_text") {
    reply.kind = BackendReply::Kind::final_text;
    reply.text = string_field(doc, "text", path);
  } else {
    throw FormatError(path + ".kind", "expected 'function_call' or 'final_text'");
  }
  if (doc.contains("finish_reason")) reply.finish_reason = string_field(doc, "finish_reason", path);
  if (const auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
    reply.usage = TokenUsage{it->value("prompt_tokens", 0L), it->value("completion_tokens", 0L),
                             it->value("total_tokens", 0L)};
  }
  return reply;
}

MockScenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  MockScenario scenario;
  if (const auto it = doc.find("runs"); it != doc.end()) {
    if (!it->is_array() || it->empty()) throw FormatError("$.runs", "expected a non-empty array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = "$.runs[" + std::to_string(i) + "]";
      const json& run = (*it)[i];
      if (!run.is_object() || !run.contains("steps")) throw FormatError(path + ".steps", "missing field");
      scenario.runs.push_back(parse_steps(run["steps"], path + ".steps"));
    }
  } else if (const auto steps = doc.find("steps"); steps != doc.end()) {
    scenario.runs.push_back(parse_steps(*steps, "$.steps"));
  } else {
    throw FormatError("$.runs", "missing field");
  }
  return scenario;
}

MockScenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_json_file(path)); }

BackendReply MockBackend::request(const std::vector<ChatMessage>&, std::span<const FunctionSchema>, bool) {
  if (next_ >= steps_.size()) throw TransportError("mock scenario exhausted after " + std::to_string(next_) + " steps");
  const ScriptedStep& step = steps_[next_++];
  switch (step.kind) {
    case ScriptedStep::Kind::length_error:
      throw BudgetError("scripted context length error");
    case ScriptedStep::Kind::transport_error:
      throw TransportError("scripted transport error");
    case ScriptedStep::Kind::reply:
      break;
  }
  return step.reply;
}

json transcript_to_json(const Transcript& transcript) {
  json runs = json::array();
  for (std::size_t i = 0; i < transcript.runs.size(); ++i) {
    json exchanges = json::array();
    for (const auto& ex : transcript.runs[i]) {
      exchanges.push_back({{"fingerprint", ex.fingerprint}, {"reply", reply_to_json(ex.reply)}});
    }
    runs.push_back({{"run_index", i}, {"exchanges", std::move(exchanges)}});
  }
  return {{"format_version", kTranscriptFormatVersion},
          {"metadata",
           {{"model", transcript.metadata.model},
            {"temperature", transcript.metadata.temperature},
            {"seed", transcript.metadata.seed}}},
          {"runs", std::move(runs)}};
}

Transcript transcript_from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  if (doc.value("format_version", 0) != kTranscriptFormatVersion) {
    throw FormatError("$.format_version", "unsupported transcript version");
  }
  Transcript t;
  if (const auto it = doc.find("metadata"); it != doc.end() && it->is_object()) {
    t.metadata.model = it->value("model", std::string{});
    t.metadata.temperature = it->value("temperature", 0.0);
    t.metadata.seed = it->value("seed", std::uint64_t{0});
  }
  const auto runs = doc.find("runs");
  if (runs == doc.end() || !runs->is_array()) throw FormatError("$.runs", "expected an array");
  for (std::size_t i = 0; i < runs->size(); ++i) {
    const std::string path = "$.runs[" + std::to_string(i) + "]";
    const json& run = (*runs)[i];
    const std::size_t index = run.value("run_index", i);
    if (t.runs.size() <= index) t.runs.resize(index + 1);
    const auto ex = run.find("exchanges");
    if (ex == run.end() || !ex->is_array()) throw FormatError(path + ".exchanges", "expected an array");
    for (std::size_t j = 0; j < ex->size(); ++j) {
      const std::string ep = path + ".exchanges[" + std::to_string(j) + "]";
      const json& e = (*ex)[j];
      t.runs[index].push_back({string_field(e, "fingerprint", ep), reply_from_json(e.value("reply", json{}), ep + ".reply")});
    }
  }
  return t;
}

Transcript load_transcript(const std::filesystem::path& path) { return transcript_from_json(read_json_file(path)); }

void save_transcript(const Transcript& transcript, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << transcript_to_json(transcript).dump(2) << '\n';
  out.flush();
  if (!out) throw PersistenceError("cannot write transcript to " + path.string());
}

TranscriptRecorder::TranscriptRecorder(TranscriptMetadata metadata, std::optional<std::filesystem::path> path)
    : path_(std::move(path)) {
  transcript_.metadata = std::move(metadata);
}

void TranscriptRecorder::append(std::size_t run_index, TranscriptExchange exchange) {
  std::lock_guard lock(mutex_);
  if (transcript_.runs.size() <= run_index) transcript_.runs.resize(run_index + 1);
  transcript_.runs[run_index].push_back(std::move(exchange));
  if (path_) save_transcript(transcript_, *path_);
}

Transcript TranscriptRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

BackendReply RecordingBackend::request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                       bool allow_tools) {
  BackendReply reply = inner_->complete(history, schemas, allow_tools);
  recorder_->append(run_index_, {request_fingerprint(history, schemas, allow_tools), reply});
  return reply;
}

BackendReply ReplayBackend::request(const std::vector<ChatMessage>& history, std::span<const FunctionSchema> schemas,
                                    bool allow_tools) {
  if (next_ >= exchanges_.size()) {
    throw ReplayMismatchError("transcript exhausted after " + std::to_string(next_) + " exchanges");
  }
  const auto& ex = exchanges_[next_];
  const std::string fp = request_fingerprint(history, schemas, allow_tools);
  if (fp != ex.fingerprint) {
    throw ReplayMismatchError("request " + std::to_string(next_) + " fingerprint " + fp.substr(0, 12) +
                              " does not match recorded " + ex.fingerprint.substr(0, 12));
  }
  ++next_;
  return ex.reply;
}

}  // namespace autofl

#include "autofl/tool_server.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "autofl/errors.hpp"
#include "autofl/prompt_builder.hpp"

namespace autofl {

namespace {

constexpr std::size_t kMaxListedAlternatives = 20;

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$';
}

std::string join_quoted(const std::vector<std::string>& items) {
  std::string out;
  const std::size_t n = std::min(items.size(), kMaxListedAlternatives);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ", ";
    out += '`';
    out += items[i];
    out += '`';
  }
  if (items.size() > n) out += ", ... (" + std::to_string(items.size() - n) + " more)";
  return out;
}

// Reads a single string argument from the JSON arguments of a call.
std::optional<std::string> string_argument(std::string_view raw, const char* key) {
  const auto doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) return std::nullopt;
  std::string value = it->get<std::string>();
  if (value.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
  return value;
}

std::string missing_argument_guidance(std::string_view function, const char* key, std::string_view example) {
  return "The function `" + std::string(function) + "` requires a `" + key + "` argument, e.g. {\"" + key +
         "\": \"" + std::string(example) + "\"}. Please call it again with that argument.";
}

std::vector<std::string> split_lines(const std::string& body) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= body.size()) {
    const auto nl = body.find('\n', start);
    if (nl == std::string::npos) {
      if (start < body.size()) lines.push_back(body.substr(start));
      break;
    }
    lines.push_back(body.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

const std::vector<FunctionSchema>& debugging_functions() {
  static const std::vector<FunctionSchema> schemas{
      {std::string(kCoveredClassesFn),
       "Returns the classes of the system under test that are covered by the failing test.",
       {}},
      {std::string(kCoveredMethodsFn),
       "Returns the signatures of the methods in the given class that are covered by failing tests.",
       {{"class_name", "The name of a class, as returned by get_failing_tests_covered_classes."}}},
      {std::string(kCodeSnippetFn),
       "Returns the source code of the given method, with line numbers.",
       {{"signature", "The method signature in ClassName.MethodName(ArgType1, ArgType2) format."}}},
      {std::string(kCommentsFn),
       "Returns the documentation comment of the given method, if it exists.",
       {{"signature", "The method signature in ClassName.MethodName(ArgType1, ArgType2) format."}}},
  };
  return schemas;
}

std::string_view to_string(CallOutcome outcome) {
  switch (outcome) {
    case CallOutcome::ok:
      return "ok";
    case CallOutcome::guidance:
      return "guidance";
    case CallOutcome::error:
      return "error";
  }
  return "error";
}

std::string ambiguity_guidance(const std::vector<std::string>& candidates) {
  return "There are multiple matches to that query. Do you mean any of the following: " + join_quoted(candidates) +
         "?";
}

std::string truncate_response(std::string text, std::size_t limit) {
  if (limit == 0 || text.size() <= limit) return text;
  std::size_t keep = limit > kTruncationNotice.size() ? limit - kTruncationNotice.size() : 0;
  // Back up over UTF-8 continuation bytes.
  while (keep > 0 && (static_cast<unsigned char>(text[keep]) & 0xC0) == 0x80) --keep;
  text.resize(keep);
  text += kTruncationNotice;
  return text;
}

std::vector<MethodSignature> extract_mentions(const RepoSnapshot& snapshot, std::string_view text) {
  std::set<MethodSignature> found;
  for (std::size_t open = text.find('('); open != std::string_view::npos; open = text.find('(', open + 1)) {
    std::size_t start = open;
    while (start > 0 && (is_ident_char(text[start - 1]) || text[start - 1] == '.')) --start;
    while (start < open && text[start] == '.') ++start;
    if (start == open || std::isdigit(static_cast<unsigned char>(text[start])) != 0) continue;
    std::size_t close = open + 1;
    while (close < text.size() && text[close] != ')' && text[close] != '(' && text[close] != '\n') ++close;
    if (close >= text.size() || text[close] != ')') continue;
    const auto res = resolve_signature(snapshot, text.substr(start, close + 1 - start));
    if (res.kind == Resolution::Kind::exact) found.insert(res.match->signature);
  }
  return {found.begin(), found.end()};
}

ToolServer::ToolServer(const RepoSnapshot& snapshot, std::vector<std::string> failing_tests, std::string run_id,
                       ToolServerOptions options)
    : snapshot_(snapshot),
      failing_tests_(std::move(failing_tests)),
      run_id_(std::move(run_id)),
      options_(options) {}

ToolServer::Response ToolServer::covered_classes_response() const {
  std::set<std::string> classes;
  for (const auto& t : failing_tests_) {
    for (auto& c : covered_classes(snapshot_, t)) classes.insert(std::move(c));
  }
  if (classes.empty()) return {"The failing test does not cover any class of the system under test.", CallOutcome::ok, {}};
  std::string text = "The failing test covers methods in the following classes:";
  for (const auto& c : classes) text += "\n" + c;
  return {std::move(text), CallOutcome::ok, {}};
}

ToolServer::Response ToolServer::covered_methods_response(std::string_view raw_arguments) const {
  const auto arg = string_argument(raw_arguments, "class_name");
  if (!arg) {
    return {missing_argument_guidance(kCoveredMethodsFn, "class_name", "ClassName"), CallOutcome::guidance, {}};
  }
  std::string query(arg->begin(), arg->end());
  if (snapshot_.options().simple_names) query = strip_package(query);

  const auto cls = resolve_class(snapshot_, query);
  if (!cls) {
    std::vector<std::string> suffix_hits;
    for (const auto& c : snapshot_.classes()) {
      if (is_dotted_suffix(c, query)) suffix_hits.push_back(c);
    }
    if (suffix_hits.size() > 1) return {ambiguity_guidance(suffix_hits), CallOutcome::guidance, {}};
    std::set<std::string> covered;
    for (const auto& t : failing_tests_) {
      for (auto& c : covered_classes(snapshot_, t)) covered.insert(std::move(c));
    }
    std::string text = "No class named `" + *arg + "` was found.";
    if (!covered.empty()) {
      text += " The classes covered by the failing test are: " +
              join_quoted(std::vector<std::string>(covered.begin(), covered.end())) + ".";
    }
    return {std::move(text), CallOutcome::guidance, {}};
  }

  const auto methods = covered_methods(snapshot_, *cls);
  if (methods.empty()) return {"No method of " + *cls + " is covered by the failing tests.", CallOutcome::ok, {}};
  std::string text = "Methods of " + *cls + " covered by the failing tests:";
  for (const auto& m : methods) text += "\n" + m.to_string();
  return {std::move(text), CallOutcome::ok, {}};
}

std::string ToolServer::unknown_signature_guidance(std::string_view query) const {
  std::string text = "No method matching `" + std::string(query) + "` was found.";
  std::vector<std::string> alternatives;
  const auto paren = query.find('(');
  const std::string_view head = query.substr(0, paren);
  const auto dot = head.rfind('.');
  if (dot != std::string_view::npos) {
    std::string cls_query(head.substr(0, dot));
    if (snapshot_.options().simple_names) cls_query = strip_package(cls_query);
    if (const auto cls = resolve_class(snapshot_, cls_query)) {
      for (std::size_t idx : snapshot_.methods_of(*cls)) {
        alternatives.push_back(snapshot_.methods()[idx].signature.to_string());
      }
      if (!alternatives.empty()) text += " Methods of " + *cls + " are: " + join_quoted(alternatives) + ".";
    }
  }
  if (alternatives.empty()) {
    for (const auto& m : snapshot_.methods()) {
      if (!m.covered_by.empty()) alternatives.push_back(m.signature.to_string());
    }
    if (!alternatives.empty()) {
      text += " Methods covered by the failing tests include: " + join_quoted(alternatives) + ".";
    }
  }
  text += " Use the `ClassName.MethodName(ArgType1, ArgType2, ...)` format.";
  return text;
}

ToolServer::Response ToolServer::snippet_or_comments(std::string_view name, std::string_view raw_arguments) const {
  const auto arg = string_argument(raw_arguments, "signature");
  if (!arg) {
    return {missing_argument_guidance(name, "signature", "ClassName.MethodName(ArgType1, ArgType2)"),
            CallOutcome::guidance,
            {}};
  }
  const auto res = resolve_signature(snapshot_, *arg);
  if (res.kind == Resolution::Kind::ambiguous) return {ambiguity_guidance(res.candidates), CallOutcome::guidance, *arg};
  if (res.kind == Resolution::Kind::none) return {unknown_signature_guidance(*arg), CallOutcome::guidance, *arg};

  const MethodRecord& m = *res.match;
  if (name == kCommentsFn) {
    if (!m.doc || m.doc->empty()) {
      return {"No documentation available for " + m.signature.to_string() + ".", CallOutcome::ok, *arg};
    }
    return {*m.doc, CallOutcome::ok, *arg};
  }
  std::vector<SourceLine> lines;
  int number = m.start_line;
  for (auto& text : split_lines(m.body)) lines.push_back({number++, std::move(text)});
  return {render_numbered(lines), CallOutcome::ok, *arg};
}

const FunctionCallLogEntry& ToolServer::dispatch(std::string_view name, std::string_view raw_arguments) {
  Response r;
  if (name == kCoveredClassesFn) {
    r = covered_classes_response();
  } else if (name == kCoveredMethodsFn) {
    r = covered_methods_response(raw_arguments);
  } else if (name == kCodeSnippetFn || name == kCommentsFn) {
    r = snippet_or_comments(name, raw_arguments);
  } else {
    std::vector<std::string> names;
    for (const auto& s : debugging_functions()) names.push_back(s.name);
    r = {"There is no function named `" + std::string(name) + "`. Available functions are: " + join_quoted(names) +
             ".",
         CallOutcome::error,
         {}};
  }

  FunctionCallLogEntry entry;
  entry.run_id = run_id_;
  entry.step = log_.empty() ? 0 : log_.back().step + 1;
  entry.function = std::string(name);
  entry.raw_arguments = std::string(raw_arguments);
  entry.outcome = r.outcome;
  entry.response = truncate_response(std::move(r.text), options_.response_byte_limit);

  std::set<MethodSignature> mentioned;
  if (!r.subject.empty()) {
    const auto res = resolve_signature(snapshot_, r.subject);
    if (res.kind == Resolution::Kind::exact) mentioned.insert(res.match->signature);
  }
  for (auto& sig : extract_mentions(snapshot_, entry.response)) mentioned.insert(std::move(sig));
  entry.mentioned_signatures.assign(mentioned.begin(), mentioned.end());

  log_.push_back(std::move(entry));
  return log_.back();
}

}  // namespace autofl

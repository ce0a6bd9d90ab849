#include "autofl/repo_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "autofl/digest.hpp"
#include "autofl/errors.hpp"

namespace autofl {

using nlohmann::json;

namespace {

const std::vector<std::size_t> kNoMethods;

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path + "." + key, "missing field");
  return *it;
}

std::string get_string(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_string()) throw FormatError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

int get_int(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number_integer()) throw FormatError(path + "." + key, "expected an integer");
  return v.get<int>();
}

bool get_bool_or(const json& obj, const char* key, const std::string& path, bool fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw FormatError(path + "." + key, "expected a boolean");
  return it->get<bool>();
}

const json& get_array(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_array()) throw FormatError(path + "." + key, "expected an array");
  return v;
}

std::vector<std::string> get_string_list(const json& arr, const std::string& path) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw FormatError(path + "[" + std::to_string(i) + "]", "expected a string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

MethodSignature require_signature(const std::string& text, const std::string& path) {
  auto sig = parse_signature(text);
  if (!sig) throw FormatError(path, "not a signature in Class.method(Args) form: '" + text + "'");
  return *sig;
}

SourceStyle style_for(const std::string& language) {
  if (language == "python" || language == "py") return SourceStyle::indent;
  return SourceStyle::brace;
}

std::size_t count_lines(const std::string& body) {
  if (body.empty()) return 0;
  std::size_t n = static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n')) + 1;
  if (body.back() == '\n') --n;
  return n;
}

void apply_simple_names(SnapshotParts& parts) {
  for (auto& c : parts.classes) c = strip_package(c);
  for (auto& m : parts.methods) {
    m.class_name = strip_package(m.class_name);
    m.signature.class_name = strip_package(m.signature.class_name);
  }
  if (parts.ground_truth) {
    for (auto& sig : *parts.ground_truth) sig.class_name = strip_package(sig.class_name);
  }
}

}  // namespace

RepoSnapshot::RepoSnapshot(SnapshotParts parts) : parts_(std::move(parts)) {
  for (std::size_t i = 0; i < parts_.methods.size(); ++i) {
    const auto& m = parts_.methods[i];
    by_signature_.emplace(m.signature, i);
    by_class_[m.class_name].push_back(i);
  }
  for (auto& [name, indices] : by_class_) {
    std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
      return parts_.methods[a].start_line < parts_.methods[b].start_line;
    });
  }

  // Classes in declaration order; methods of undeclared classes go last.
  std::vector<std::string> order = parts_.classes;
  for (const auto& [name, indices] : by_class_) {
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
  }
  std::size_t rank = 0;
  for (const auto& name : order) {
    const auto it = by_class_.find(name);
    if (it == by_class_.end()) continue;
    for (std::size_t idx : it->second) source_rank_.emplace(parts_.methods[idx].signature, rank++);
  }
}

bool RepoSnapshot::has_class(std::string_view name) const {
  return std::find(parts_.classes.begin(), parts_.classes.end(), name) != parts_.classes.end();
}

const MethodRecord* RepoSnapshot::find(const MethodSignature& sig) const {
  const auto it = by_signature_.find(sig);
  return it == by_signature_.end() ? nullptr : &parts_.methods[it->second];
}

const TestFailure* RepoSnapshot::find_failure(std::string_view test_id) const {
  for (const auto& f : parts_.failures) {
    if (f.test_id == test_id) return &f;
  }
  return nullptr;
}

const std::vector<std::size_t>& RepoSnapshot::methods_of(std::string_view class_name) const {
  const auto it = by_class_.find(class_name);
  return it == by_class_.end() ? kNoMethods : it->second;
}

std::size_t RepoSnapshot::source_rank(const MethodRecord& method) const {
  const auto it = source_rank_.find(method.signature);
  return it == source_rank_.end() ? source_rank_.size() : it->second;
}

std::vector<CheckResult> check_snapshot(const RepoSnapshot& snapshot) {
  std::vector<CheckResult> checks;
  auto add = [&](std::string name, CheckSeverity severity, std::vector<std::string> problems) {
    CheckResult r{std::move(name), severity, problems.empty(), {}};
    for (std::size_t i = 0; i < problems.size(); ++i) {
      if (i > 0) r.detail += "; ";
      r.detail += problems[i];
    }
    checks.push_back(std::move(r));
  };

  const auto& methods = snapshot.methods();
  const auto& failures = snapshot.failures();

  {
    std::vector<std::string> problems;
    std::set<std::string> seen;
    for (const auto& c : snapshot.classes()) {
      if (!seen.insert(c).second) problems.push_back("classes: duplicate '" + c + "'");
    }
    add("classes.unique", CheckSeverity::error, std::move(problems));
  }
  {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const auto& m = methods[i];
      if (m.start_line < 1 || m.start_line > m.end_line) {
        problems.push_back("methods[" + std::to_string(i) + "].start_line: " + std::to_string(m.start_line) +
                           ".." + std::to_string(m.end_line) + " is not a valid span");
      } else if (count_lines(m.body) != static_cast<std::size_t>(m.end_line - m.start_line + 1)) {
        problems.push_back("methods[" + std::to_string(i) + "].body: line count does not match span");
      }
    }
    add("methods.line_span", CheckSeverity::error, std::move(problems));
  }
  {
    std::vector<std::string> problems;
    std::set<MethodSignature> seen;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (!seen.insert(methods[i].signature).second) {
        problems.push_back("methods[" + std::to_string(i) + "].signature: duplicate '" +
                           methods[i].signature.to_string() + "'");
      }
    }
    add("methods.unique_signature", CheckSeverity::error, std::move(problems));
  }
  {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      const auto& m = methods[i];
      if (!snapshot.has_class(m.class_name)) {
        problems.push_back("methods[" + std::to_string(i) + "].class: unknown class '" + m.class_name + "'");
      }
      if (m.signature.class_name != m.class_name) {
        problems.push_back("methods[" + std::to_string(i) + "].signature: class segment '" +
                           m.signature.class_name + "' differs from class '" + m.class_name + "'");
      }
    }
    add("methods.class_declared", CheckSeverity::error, std::move(problems));
  }
  {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      for (const auto& t : methods[i].covered_by) {
        if (snapshot.find_failure(t) == nullptr) {
          problems.push_back("methods[" + std::to_string(i) + "].covering_tests: unknown failing test '" + t + "'");
        }
      }
    }
    add("coverage.known_tests", CheckSeverity::error, std::move(problems));
  }
  {
    std::vector<std::string> problems;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < failures.size(); ++i) {
      const auto& f = failures[i];
      const std::string path = "failures[" + std::to_string(i) + "]";
      if (!seen.insert(f.test_id).second) problems.push_back(path + ".test_id: duplicate '" + f.test_id + "'");
      if (f.test_source.empty()) {
        problems.push_back(path + ".test_source: empty");
      } else {
        const int first = f.test_source.front().number;
        const int last = f.test_source.back().number;
        if (f.failure_line < first || f.failure_line > last) {
          problems.push_back(path + ".failure_line: " + std::to_string(f.failure_line) + " outside [" +
                             std::to_string(first) + ", " + std::to_string(last) + "]");
        }
        for (std::size_t j = 1; j < f.test_source.size(); ++j) {
          if (f.test_source[j].number <= f.test_source[j - 1].number) {
            problems.push_back(path + ".test_source: line numbers not increasing");
            break;
          }
        }
      }
      if (f.stack_frames.empty() && f.error_message.empty()) {
        problems.push_back(path + ": neither error_message nor stack_frames present");
      }
    }
    add("failures.well_formed", CheckSeverity::error, std::move(problems));
  }
  if (snapshot.ground_truth()) {
    std::vector<std::string> problems;
    for (const auto& sig : *snapshot.ground_truth()) {
      if (snapshot.find(sig) == nullptr) problems.push_back("ground_truth: unknown method '" + sig.to_string() + "'");
    }
    add("ground_truth.known_methods", CheckSeverity::warning, std::move(problems));
  }
  return checks;
}

RepoSnapshot parse_snapshot(const json& doc) {
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  const int version = get_int(doc, "format_version", "$");
  if (version != kSnapshotFormatVersion) {
    throw FormatError("$.format_version", "unsupported version " + std::to_string(version));
  }

  SnapshotParts parts;
  parts.bug_id = get_string(doc, "bug_id", "$");
  if (const auto it = doc.find("language"); it != doc.end()) {
    if (!it->is_string()) throw FormatError("$.language", "expected a string");
    parts.options.language = it->get<std::string>();
  }
  parts.options.style = style_for(parts.options.language);
  if (const auto it = doc.find("statement_style"); it != doc.end()) {
    const std::string s = it->is_string() ? it->get<std::string>() : "";
    if (s == "brace") {
      parts.options.style = SourceStyle::brace;
    } else if (s == "indent") {
      parts.options.style = SourceStyle::indent;
    } else {
      throw FormatError("$.statement_style", "expected 'brace' or 'indent'");
    }
  }
  parts.options.simple_names = get_bool_or(doc, "simple_names", "$", false);
  if (const auto it = doc.find("assertions"); it != doc.end()) {
    if (it->contains("prefixes")) {
      parts.options.assertions.prefixes =
          get_string_list(get_array(*it, "prefixes", "$.assertions"), "$.assertions.prefixes");
    }
    if (it->contains("names")) {
      parts.options.assertions.names = get_string_list(get_array(*it, "names", "$.assertions"), "$.assertions.names");
    }
  }

  parts.classes = get_string_list(get_array(doc, "classes", "$"), "$.classes");

  const json& methods = get_array(doc, "methods", "$");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string path = "$.methods[" + std::to_string(i) + "]";
    const json& m = methods[i];
    MethodRecord rec;
    rec.signature = require_signature(get_string(m, "signature", path), path + ".signature");
    rec.class_name = get_string(m, "class", path);
    rec.start_line = get_int(m, "start_line", path);
    rec.end_line = get_int(m, "end_line", path);
    rec.body = get_string(m, "body", path);
    if (const auto it = m.find("doc"); it != m.end() && !it->is_null()) {
      if (!it->is_string()) throw FormatError(path + ".doc", "expected a string");
      rec.doc = it->get<std::string>();
    }
    for (auto& t : get_string_list(get_array(m, "covering_tests", path), path + ".covering_tests")) {
      rec.covered_by.insert(std::move(t));
    }
    parts.methods.push_back(std::move(rec));
  }

  const json& failures = get_array(doc, "failures", "$");
  for (std::size_t i = 0; i < failures.size(); ++i) {
    const std::string path = "$.failures[" + std::to_string(i) + "]";
    const json& f = failures[i];
    TestFailure tf;
    tf.test_id = get_string(f, "test_id", path);
    const json& src = get_array(f, "test_source", path);
    for (std::size_t j = 0; j < src.size(); ++j) {
      const std::string lp = path + ".test_source[" + std::to_string(j) + "]";
      tf.test_source.push_back({get_int(src[j], "line", lp), get_string(src[j], "text", lp)});
    }
    tf.failure_line = get_int(f, "failure_line", path);
    tf.error_message = get_string(f, "error_message", path);
    const json& frames = get_array(f, "stack_frames", path);
    for (std::size_t j = 0; j < frames.size(); ++j) {
      const std::string fp = path + ".stack_frames[" + std::to_string(j) + "]";
      tf.stack_frames.push_back({get_string(frames[j], "text", fp), get_bool_or(frames[j], "in_target_repo", fp, true)});
    }
    parts.failures.push_back(std::move(tf));
  }

  if (const auto it = doc.find("ground_truth"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw FormatError("$.ground_truth", "expected an array");
    std::vector<MethodSignature> truth;
    const auto texts = get_string_list(*it, "$.ground_truth");
    for (std::size_t i = 0; i < texts.size(); ++i) {
      truth.push_back(require_signature(texts[i], "$.ground_truth[" + std::to_string(i) + "]"));
    }
    parts.ground_truth = std::move(truth);
  }

  if (parts.options.simple_names) apply_simple_names(parts);
  return RepoSnapshot(std::move(parts));
}

json snapshot_to_json(const RepoSnapshot& snapshot) {
  const auto& opts = snapshot.options();
  json doc;
  doc["format_version"] = kSnapshotFormatVersion;
  doc["bug_id"] = snapshot.bug_id();
  doc["language"] = opts.language;
  doc["statement_style"] = opts.style == SourceStyle::indent ? "indent" : "brace";
  doc["simple_names"] = opts.simple_names;
  doc["assertions"] = {{"prefixes", opts.assertions.prefixes}, {"names", opts.assertions.names}};
  doc["classes"] = snapshot.classes();

  json methods = json::array();
  for (const auto& m : snapshot.methods()) {
    json e{{"signature", m.signature.to_string()},
           {"class", m.class_name},
           {"start_line", m.start_line},
           {"end_line", m.end_line},
           {"body", m.body},
           {"covering_tests", std::vector<std::string>(m.covered_by.begin(), m.covered_by.end())}};
    if (m.doc) e["doc"] = *m.doc;
    methods.push_back(std::move(e));
  }
  doc["methods"] = std::move(methods);

  json failures = json::array();
  for (const auto& f : snapshot.failures()) {
    json src = json::array();
    for (const auto& l : f.test_source) src.push_back({{"line", l.number}, {"text", l.text}});
    json frames = json::array();
    for (const auto& fr : f.stack_frames) frames.push_back({{"text", fr.text}, {"in_target_repo", fr.in_target_repo}});
    failures.push_back({{"test_id", f.test_id},
                        {"test_source", std::move(src)},
                        {"failure_line", f.failure_line},
                        {"error_message", f.error_message},
                        {"stack_frames", std::move(frames)}});
  }
  doc["failures"] = std::move(failures);

  if (snapshot.ground_truth()) {
    json truth = json::array();
    for (const auto& sig : *snapshot.ground_truth()) truth.push_back(sig.to_string());
    doc["ground_truth"] = std::move(truth);
  }
  return doc;
}

RepoSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), "cannot open snapshot file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  RepoSnapshot snapshot = parse_snapshot(doc);
  for (const auto& check : check_snapshot(snapshot)) {
    if (!check.passed && check.severity == CheckSeverity::error) {
      throw ValidationError(check.name + ": " + check.detail);
    }
  }
  return snapshot;
}

void save_snapshot(const RepoSnapshot& snapshot, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << snapshot_to_json(snapshot).dump(2) << '\n';
  if (!out) throw PersistenceError("cannot write snapshot to " + path.string());
}

std::string snapshot_digest(const RepoSnapshot& snapshot) {
  return sha256_hex(snapshot_to_json(snapshot).dump());
}

std::vector<std::string> covered_classes(const RepoSnapshot& snapshot, std::string_view test_id) {
  if (snapshot.find_failure(test_id) == nullptr) {
    throw LookupError("unknown failing test '" + std::string(test_id) + "'");
  }
  std::set<std::string> classes;
  for (const auto& m : snapshot.methods()) {
    if (m.covered_by.contains(std::string(test_id))) classes.insert(m.class_name);
  }
  return {classes.begin(), classes.end()};
}

std::vector<MethodSignature> covered_methods(const RepoSnapshot& snapshot, std::string_view class_name) {
  if (!snapshot.has_class(class_name)) {
    throw LookupError("unknown class '" + std::string(class_name) + "'");
  }
  std::vector<MethodSignature> out;
  for (std::size_t idx : snapshot.methods_of(class_name)) {
    const auto& m = snapshot.methods()[idx];
    if (!m.covered_by.empty()) out.push_back(m.signature);
  }
  return out;
}

std::optional<std::string> resolve_class(const RepoSnapshot& snapshot, std::string_view query) {
  if (snapshot.has_class(query)) return std::string(query);
  std::optional<std::string> hit;
  for (const auto& c : snapshot.classes()) {
    if (is_dotted_suffix(c, query)) {
      if (hit) return std::nullopt;
      hit = c;
    }
  }
  return hit;
}

Resolution resolve_signature(const RepoSnapshot& snapshot, std::string_view query) {
  while (!query.empty() && std::isspace(static_cast<unsigned char>(query.front()))) query.remove_prefix(1);
  while (!query.empty() && std::isspace(static_cast<unsigned char>(query.back()))) query.remove_suffix(1);
  if (query.empty()) return {};

  std::optional<MethodSignature> full;
  std::string class_part;
  std::string name_part;

  if (query.find('(') != std::string_view::npos) {
    full = parse_signature(query);
    if (full) {
      if (snapshot.options().simple_names) full->class_name = strip_package(full->class_name);
      class_part = full->class_name;
      name_part = full->method_name;
    } else {
      std::string_view head = query.substr(0, query.find('('));
      while (!head.empty() && head.back() == ' ') head.remove_suffix(1);
      const auto dot = head.rfind('.');
      if (dot != std::string_view::npos) {
        class_part = std::string(head.substr(0, dot));
        name_part = std::string(head.substr(dot + 1));
      } else {
        name_part = std::string(head);
      }
    }
  } else {
    const auto dot = query.rfind('.');
    if (dot != std::string_view::npos) {
      class_part = std::string(query.substr(0, dot));
      name_part = std::string(query.substr(dot + 1));
    } else {
      name_part = std::string(query);
    }
  }
  if (snapshot.options().simple_names && !class_part.empty()) class_part = strip_package(class_part);

  auto decide = [&](std::vector<const MethodRecord*> hits) -> std::optional<Resolution> {
    if (hits.empty()) return std::nullopt;
    Resolution r;
    if (hits.size() == 1) {
      r.kind = Resolution::Kind::exact;
      r.match = hits.front();
      return r;
    }
    std::sort(hits.begin(), hits.end(), [&](const MethodRecord* a, const MethodRecord* b) {
      return snapshot.source_rank(*a) < snapshot.source_rank(*b);
    });
    r.kind = Resolution::Kind::ambiguous;
    for (const auto* h : hits) r.candidates.push_back(h->signature.to_string());
    return r;
  };
  auto collect = [&](auto&& pred) {
    std::vector<const MethodRecord*> hits;
    for (const auto& m : snapshot.methods()) {
      if (pred(m)) hits.push_back(&m);
    }
    return hits;
  };

  if (full) {
    if (const auto* m = snapshot.find(*full)) {
      Resolution r;
      r.kind = Resolution::Kind::exact;
      r.match = m;
      return r;
    }
    if (auto r = decide(collect([&](const MethodRecord& m) {
          return m.signature.method_name == full->method_name && m.signature.arg_types == full->arg_types &&
                 is_dotted_suffix(m.class_name, full->class_name);
        }))) {
      return *r;
    }
  }
  if (!class_part.empty()) {
    if (auto r = decide(collect([&](const MethodRecord& m) {
          return m.signature.method_name == name_part && is_dotted_suffix(m.class_name, class_part);
        }))) {
      return *r;
    }
  }
  if (!name_part.empty()) {
    if (auto r = decide(collect([&](const MethodRecord& m) { return m.signature.method_name == name_part; }))) {
      return *r;
    }
  }
  return {};
}

}  // namespace autofl

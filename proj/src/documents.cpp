#include "autofl/documents.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "autofl/errors.hpp"

namespace autofl {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw FormatError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(path + "." + key, "missing field");
  return *it;
}

template <typename T>
T field_as(const json& obj, const char* key, const std::string& path) {
  try {
    return field(obj, key, path).get<T>();
  } catch (const json::type_error&) {
    throw FormatError(path + "." + key, "unexpected type");
  }
}

MethodSignature signature_field(const json& v, const std::string& path) {
  if (!v.is_string()) throw FormatError(path, "expected a signature string");
  auto sig = parse_signature(v.get<std::string>());
  if (!sig) throw FormatError(path, "not a signature: '" + v.get<std::string>() + "'");
  return *sig;
}

json signatures_json(const std::vector<MethodSignature>& sigs) {
  json arr = json::array();
  for (const auto& s : sigs) arr.push_back(s.to_string());
  return arr;
}

std::vector<MethodSignature> signatures_from(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw FormatError(path, "expected an array");
  std::vector<MethodSignature> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(signature_field(arr[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

json backend_json(const BackendInfo& info) {
  json doc{{"kind", info.kind}, {"model", info.model}};
  doc["temperature"] = info.temperature ? json(*info.temperature) : json(nullptr);
  return doc;
}

BackendInfo backend_from(const json& doc) {
  BackendInfo info;
  if (!doc.is_object()) return info;
  info.kind = doc.value("kind", std::string{});
  info.model = doc.value("model", std::string{});
  if (const auto it = doc.find("temperature"); it != doc.end() && it->is_number()) info.temperature = it->get<double>();
  return info;
}

void check_version(const json& doc, const char* kind) {
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  if (doc.value("format_version", 0) != kDocumentFormatVersion) {
    throw FormatError("$.format_version", "unsupported version");
  }
  if (doc.value("kind", std::string{}) != kind) throw FormatError("$.kind", std::string("expected '") + kind + "'");
}

}  // namespace

json run_record_to_json(const RunRecord& record) {
  json log = json::array();
  for (const auto& e : record.function_log) {
    log.push_back({{"run_id", e.run_id},
                   {"step", e.step},
                   {"function", e.function},
                   {"arguments", e.raw_arguments},
                   {"outcome", to_string(e.outcome)},
                   {"response", e.response},
                   {"mentioned_signatures", signatures_json(e.mentioned_signatures)}});
  }
  json doc{{"run_id", record.run_id},
           {"run_index", record.run_index},
           {"test_ids", record.test_ids},
           {"predicted", signatures_json(record.predicted)},
           {"raw_answer_lines", record.raw_answer_lines},
           {"status", to_string(record.status)},
           {"llm_calls", record.llm_calls},
           {"error_detail", record.error_detail},
           {"function_log", std::move(log)}};
  doc["explanation"] = record.explanation ? json(*record.explanation) : json(nullptr);
  return doc;
}

RunRecord run_record_from_json(const json& doc, const std::string& path) {
  RunRecord r;
  r.run_id = field_as<std::string>(doc, "run_id", path);
  r.run_index = field_as<std::size_t>(doc, "run_index", path);
  r.test_ids = field_as<std::vector<std::string>>(doc, "test_ids", path);
  if (const auto& e = field(doc, "explanation", path); e.is_string()) r.explanation = e.get<std::string>();
  r.predicted = signatures_from(field(doc, "predicted", path), path + ".predicted");
  r.raw_answer_lines = field_as<std::vector<std::string>>(doc, "raw_answer_lines", path);
  const auto status = parse_run_status(field_as<std::string>(doc, "status", path));
  if (!status) throw FormatError(path + ".status", "unknown status");
  r.status = *status;
  r.llm_calls = field_as<int>(doc, "llm_calls", path);
  r.error_detail = doc.value("error_detail", std::string{});
  const json& log = field(doc, "function_log", path);
  if (!log.is_array()) throw FormatError(path + ".function_log", "expected an array");
  for (std::size_t i = 0; i < log.size(); ++i) {
    const std::string lp = path + ".function_log[" + std::to_string(i) + "]";
    FunctionCallLogEntry e;
    e.run_id = field_as<std::string>(log[i], "run_id", lp);
    e.step = field_as<int>(log[i], "step", lp);
    e.function = field_as<std::string>(log[i], "function", lp);
    e.raw_arguments = field_as<std::string>(log[i], "arguments", lp);
    const std::string outcome = field_as<std::string>(log[i], "outcome", lp);
    if (outcome == "ok") {
      e.outcome = CallOutcome::ok;
    } else if (outcome == "guidance") {
      e.outcome = CallOutcome::guidance;
    } else if (outcome == "error") {
      e.outcome = CallOutcome::error;
    } else {
      throw FormatError(lp + ".outcome", "unknown outcome");
    }
    e.response = field_as<std::string>(log[i], "response", lp);
    e.mentioned_signatures = signatures_from(field(log[i], "mentioned_signatures", lp), lp + ".mentioned_signatures");
    r.function_log.push_back(std::move(e));
  }
  return r;
}

json runset_to_json(const RunSet& runset) {
  const auto& c = runset.config;
  json runs = json::array();
  for (const auto& r : runset.runs) runs.push_back(run_record_to_json(r));
  return {{"format_version", kDocumentFormatVersion},
          {"kind", "autofl-runset"},
          {"bug_id", runset.bug_id},
          {"snapshot_sha256", runset.snapshot_sha256},
          {"config",
           {{"n_budget", c.n_budget},
            {"r_runs", c.r_runs},
            {"tools_enabled", c.tools_enabled},
            {"policy", to_string(c.policy)},
            {"fixed_test", c.fixed_test},
            {"response_byte_limit", c.response_byte_limit},
            {"seed", runset.seed}}},
          {"backend", backend_json(runset.backend)},
          {"runs", std::move(runs)}};
}

RunSet runset_from_json(const json& doc) {
  check_version(doc, "autofl-runset");
  RunSet rs;
  rs.bug_id = field_as<std::string>(doc, "bug_id", "$");
  rs.snapshot_sha256 = field_as<std::string>(doc, "snapshot_sha256", "$");
  const json& c = field(doc, "config", "$");
  rs.config.n_budget = field_as<int>(c, "n_budget", "$.config");
  rs.config.r_runs = field_as<int>(c, "r_runs", "$.config");
  rs.config.tools_enabled = field_as<bool>(c, "tools_enabled", "$.config");
  const auto policy = parse_selection_policy(field_as<std::string>(c, "policy", "$.config"));
  if (!policy) throw FormatError("$.config.policy", "unknown policy");
  rs.config.policy = *policy;
  rs.config.fixed_test = c.value("fixed_test", std::size_t{0});
  rs.config.response_byte_limit = c.value("response_byte_limit", rs.config.response_byte_limit);
  rs.seed = c.value("seed", std::uint64_t{0});
  rs.backend = backend_from(doc.value("backend", json::object()));
  const json& runs = field(doc, "runs", "$");
  if (!runs.is_array()) throw FormatError("$.runs", "expected an array");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    rs.runs.push_back(run_record_from_json(runs[i], "$.runs[" + std::to_string(i) + "]"));
  }
  return rs;
}

json report_to_json(const ReportDocument& doc) {
  const FLReport& r = doc.report;
  json ranked = json::array();
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    const auto& m = r.ranked[i];
    ranked.push_back({{"rank", i + 1},
                      {"signature", m.signature.to_string()},
                      {"score", m.score},
                      {"provenance", to_string(m.provenance)},
                      {"covered", m.covered}});
  }
  return {{"format_version", kDocumentFormatVersion},
          {"kind", "autofl-report"},
          {"bug_id", r.bug_id},
          {"mode", doc.baseline ? "baseline" : "autofl"},
          {"backend", backend_json(doc.backend)},
          {"ranked", std::move(ranked)},
          {"confidence", r.confidence},
          {"run_ids", r.run_ids},
          {"boost_applied", r.boost_applied},
          {"boost_source", r.boost_source}};
}

ReportDocument report_from_json(const json& doc) {
  check_version(doc, "autofl-report");
  ReportDocument out;
  FLReport& r = out.report;
  r.bug_id = field_as<std::string>(doc, "bug_id", "$");
  out.baseline = doc.value("mode", std::string{"autofl"}) == "baseline";
  out.backend = backend_from(doc.value("backend", json::object()));
  const json& ranked = field(doc, "ranked", "$");
  if (!ranked.is_array()) throw FormatError("$.ranked", "expected an array");
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const std::string p = "$.ranked[" + std::to_string(i) + "]";
    RankedMethod m;
    m.signature = signature_field(field(ranked[i], "signature", p), p + ".signature");
    m.score = field_as<double>(ranked[i], "score", p);
    const std::string prov = field_as<std::string>(ranked[i], "provenance", p);
    if (prov != "predicted" && prov != "appended") throw FormatError(p + ".provenance", "unknown provenance");
    m.provenance = prov == "predicted" ? Provenance::predicted : Provenance::appended;
    m.covered = ranked[i].value("covered", false);
    r.ranked.push_back(std::move(m));
  }
  r.confidence = field_as<double>(doc, "confidence", "$");
  r.run_ids = doc.value("run_ids", std::vector<std::string>{});
  r.boost_applied = doc.value("boost_applied", false);
  r.boost_source = doc.value("boost_source", std::string{});
  return out;
}

std::map<std::string, BoostSpec> boost_specs_from_json(const json& doc) {
  auto one = [](const json& obj, const std::string& path) {
    BoostSpec spec;
    spec.source = obj.value("source", std::string{"other"});
    const json& boosts = field(obj, "boosts", path);
    if (!boosts.is_object()) throw FormatError(path + ".boosts", "expected an object keyed by run id");
    for (const auto& [run_id, value] : boosts.items()) {
      if (!value.is_number()) throw FormatError(path + ".boosts." + run_id, "expected a number");
      spec.by_run_id[run_id] = value.get<double>();
    }
    return spec;
  };
  if (!doc.is_object()) throw FormatError("$", "expected an object");
  std::map<std::string, BoostSpec> out;
  if (const auto bugs = doc.find("bugs"); bugs != doc.end()) {
    if (!bugs->is_object()) throw FormatError("$.bugs", "expected an object");
    for (const auto& [bug, spec] : bugs->items()) out[bug] = one(spec, "$.bugs." + bug);
  } else {
    out[""] = one(doc, "$");
  }
  return out;
}

std::map<std::string, std::set<MethodSignature>> truth_from_json(const json& doc, std::vector<std::string>& problems) {
  const json& bugs = field(doc, "bugs", "$");
  if (!bugs.is_object()) throw FormatError("$.bugs", "expected an object");
  std::map<std::string, std::set<MethodSignature>> out;
  for (const auto& [bug, list] : bugs.items()) {
    if (!list.is_array()) throw FormatError("$.bugs." + bug, "expected an array");
    std::set<MethodSignature> truth;
    bool ok = true;
    for (const auto& entry : list) {
      const auto sig = entry.is_string() ? parse_signature(entry.get<std::string>()) : std::nullopt;
      if (!sig) {
        problems.push_back(bug + ": unresolvable ground-truth entry " + entry.dump());
        ok = false;
        continue;
      }
      truth.insert(*sig);
    }
    if (ok) out.emplace(bug, std::move(truth));
  }
  return out;
}

std::vector<LabeledExplanation> labels_from_json(const json& doc) {
  const json& labels = field(doc, "labels", "$");
  if (!labels.is_array()) throw FormatError("$.labels", "expected an array");
  std::vector<LabeledExplanation> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string p = "$.labels[" + std::to_string(i) + "]";
    LabeledExplanation item;
    item.bug_id = field_as<std::string>(labels[i], "bug_id", p);
    item.run_id = field_as<std::string>(labels[i], "run_id", p);
    for (const auto& [key, value] : labels[i].items()) {
      if (key == "bug_id" || key == "run_id") continue;
      if (value.is_boolean()) {
        item.labels[key] = value.get<bool>() ? 1.0 : 0.0;
      } else if (value.is_number()) {
        item.labels[key] = value.get<double>();
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& path) { write_text(doc.dump(2) + "\n", path); }

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw PersistenceError("cannot write " + path.string());
}

}  // namespace autofl

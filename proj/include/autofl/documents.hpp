#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "autofl/aggregator.hpp"
#include "autofl/eval_harness.hpp"
#include "autofl/orchestrator.hpp"

// Persisted documents: run-sets, reports, boost sidecars, truth and label
// files. All writers emit sorted keys so identical inputs give identical bytes.
namespace autofl {

inline constexpr int kDocumentFormatVersion = 1;

/// Where the replies of a campaign came from.
struct BackendInfo {
  std::string kind;  // mock | replay | live
  std::string model;
  std::optional<double> temperature;
};

struct RunSet {
  std::string bug_id;
  std::string snapshot_sha256;
  RunConfig config;
  std::uint64_t seed = 0;
  BackendInfo backend;
  std::vector<RunRecord> runs;
};

struct ReportDocument {
  FLReport report;
  bool baseline = false;
  BackendInfo backend;
};

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& doc, const std::string& path);

nlohmann::json runset_to_json(const RunSet& runset);
RunSet runset_from_json(const nlohmann::json& doc);

nlohmann::json report_to_json(const ReportDocument& doc);
ReportDocument report_from_json(const nlohmann::json& doc);

/// Boost sidecar: either a single {source, boosts: {run_id: value}} object or
/// {bugs: {bug_id: {source, boosts}}}. A single object is stored under "".
struct BoostSpec {
  std::string source = "other";
  std::map<std::string, double> by_run_id;
};
std::map<std::string, BoostSpec> boost_specs_from_json(const nlohmann::json& doc);

/// {bugs: {bug_id: [signature, ...]}}. Unparseable signatures are reported in
/// `problems` and the bug is left out.
std::map<std::string, std::set<MethodSignature>> truth_from_json(const nlohmann::json& doc,
                                                                  std::vector<std::string>& problems);

/// {labels: [{bug_id, run_id, <label>: bool|number, ...}]}.
std::vector<LabeledExplanation> labels_from_json(const nlohmann::json& doc);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace autofl

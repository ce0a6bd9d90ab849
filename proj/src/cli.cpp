#include "autofl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "autofl/aggregator.hpp"
#include "autofl/documents.hpp"
#include "autofl/errors.hpp"
#include "autofl/eval_harness.hpp"
#include "autofl/http_backend.hpp"
#include "autofl/llm_backend.hpp"
#include "autofl/orchestrator.hpp"
#include "autofl/repo_model.hpp"

namespace autofl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ValidateOptions {
  std::string snapshot;
};

struct RunOptions {
  std::string snapshot;
  std::string backend;
  std::string live_config;
  std::string record;
  std::string out_dir;
  std::string boost;
  RunConfig config;
  bool no_tools = false;
  std::string policy = "round_robin";
  std::uint64_t seed = 0;
};

struct AggregateOptions {
  std::string snapshot;
  std::string runset;
  std::string boost;
  std::string out;
};

struct EvalOptions {
  std::string reports;
  std::string truth;
  std::string runsets;
  std::string boost;
  std::string labels;
  std::string out_dir;
  std::vector<std::size_t> ks{1, 2, 3, 4, 5};
  std::size_t permutations = kDefaultPermutations;
  std::uint64_t seed = 0;
};

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json correlation_json(const CorrelationTest& t) {
  json doc{{"n", t.n}};
  doc["rho"] = t.rho ? json(*t.rho) : json(nullptr);
  doc["p_value"] = t.p_value ? json(*t.p_value) : json(nullptr);
  doc["defined"] = t.rho.has_value();
  return doc;
}

std::string rho_text(const CorrelationTest& t) {
  if (!t.rho) return "undefined";
  std::string s = fixed(*t.rho, 4);
  if (t.p_value) s += " (p=" + fixed(*t.p_value, 4) + ")";
  return s;
}

// --- validate -------------------------------------------------------------

int cmd_validate(const ValidateOptions& opts, std::ostream& out, std::ostream& err) {
  std::optional<RepoSnapshot> snapshot;
  try {
    snapshot = parse_snapshot(read_json(opts.snapshot));
  } catch (const FormatError& e) {
    out << "FAIL format: " << e.what() << '\n';
    err << "error: malformed snapshot field " << e.field() << '\n';
    return 1;
  }
  out << "PASS format\n";
  bool failed = false;
  for (const auto& check : check_snapshot(*snapshot)) {
    if (check.passed) {
      out << "PASS " << check.name << '\n';
    } else if (check.severity == CheckSeverity::warning) {
      out << "WARN " << check.name << ": " << check.detail << '\n';
    } else {
      out << "FAIL " << check.name << ": " << check.detail << '\n';
      failed = true;
    }
  }
  return failed ? 1 : 0;
}

// --- run ------------------------------------------------------------------

struct BackendSetup {
  BackendFactory factory;
  BackendInfo info;
  std::shared_ptr<TranscriptRecorder> recorder;
};

BackendSetup make_backends(const RunOptions& opts) {
  BackendSetup setup;
  const std::string& spec = opts.backend;
  if (spec.starts_with("mock:")) {
    auto scenario = std::make_shared<MockScenario>(load_scenario(spec.substr(5)));
    setup.info = {"mock", "", std::nullopt};
    setup.factory = [scenario](std::size_t k) -> std::shared_ptr<ChatBackend> {
      return std::make_shared<MockBackend>(scenario->runs[k % scenario->runs.size()]);
    };
  } else if (spec.starts_with("replay:")) {
    auto transcript = std::make_shared<Transcript>(load_transcript(spec.substr(7)));
    setup.info = {"replay", transcript->metadata.model, transcript->metadata.temperature};
    setup.factory = [transcript](std::size_t k) -> std::shared_ptr<ChatBackend> {
      return std::make_shared<ReplayBackend>(k < transcript->runs.size() ? transcript->runs[k]
                                                                         : std::vector<TranscriptExchange>{});
    };
  } else if (spec == "live") {
    const LiveConfig config = opts.live_config.empty() ? LiveConfig{} : load_live_config(opts.live_config);
    std::shared_ptr<ChatBackend> client = HttpChatBackend::from_environment(config);
    setup.info = {"live", config.model, config.temperature};
    setup.factory = [client](std::size_t) { return client; };
  } else {
    throw std::invalid_argument("--backend must be live, mock:<scenario> or replay:<transcript>");
  }

  if (!opts.record.empty()) {
    setup.recorder = std::make_shared<TranscriptRecorder>(
        TranscriptMetadata{setup.info.model, setup.info.temperature.value_or(0.0), opts.seed}, fs::path(opts.record));
    auto inner = setup.factory;
    auto recorder = setup.recorder;
    setup.factory = [inner, recorder](std::size_t k) -> std::shared_ptr<ChatBackend> {
      return std::make_shared<RecordingBackend>(inner(k), recorder, k);
    };
  }
  return setup;
}

std::optional<BoostVector> read_boost(const std::string& path, const std::string& bug_id,
                                      std::span<const RunRecord> records) {
  if (path.empty()) return std::nullopt;
  const auto specs = boost_specs_from_json(read_json(path));
  auto it = specs.find(bug_id);
  if (it == specs.end()) it = specs.find("");
  if (it == specs.end()) throw ValidationError("boost file has no entry for bug '" + bug_id + "'");
  return boosts_for(records, it->second.by_run_id, it->second.source);
}

json explanations_json(const std::string& bug_id, std::span<const RunRecord> records) {
  json items = json::array();
  for (const auto& r : records) {
    json e{{"run_id", r.run_id}, {"status", to_string(r.status)}, {"test_ids", r.test_ids}};
    e["explanation"] = r.explanation ? json(*r.explanation) : json(nullptr);
    e["length"] = r.explanation ? explanation_length(*r.explanation) : 0;
    items.push_back(std::move(e));
  }
  return {{"format_version", kDocumentFormatVersion},
          {"kind", "autofl-explanations"},
          {"bug_id", bug_id},
          {"explanations", std::move(items)}};
}

int cmd_run(RunOptions opts, std::ostream& out, std::ostream&) {
  const auto policy = parse_selection_policy(opts.policy);
  if (!policy) throw std::invalid_argument("unknown --policy '" + opts.policy + "'");
  opts.config.policy = *policy;
  opts.config.tools_enabled = !opts.no_tools;
  validate(opts.config);

  const RepoSnapshot snapshot = load_snapshot(opts.snapshot);
  BackendSetup backends = make_backends(opts);
  const auto records = run_campaign(snapshot, opts.config, backends.factory);
  if (backends.recorder) save_transcript(backends.recorder->snapshot(), opts.record);

  const fs::path dir(opts.out_dir);
  fs::create_directories(dir);

  RunSet runset{snapshot.bug_id(), snapshot_digest(snapshot), opts.config, opts.seed, backends.info, records};
  write_json(runset_to_json(runset), dir / "runset.json");

  ReportDocument report{rank(records, snapshot), !opts.config.tools_enabled, backends.info};
  write_json(report_to_json(report), dir / "report.json");
  write_json(explanations_json(snapshot.bug_id(), records), dir / "explanations.json");

  if (const auto boosts = read_boost(opts.boost, snapshot.bug_id(), records)) {
    ReportDocument boosted{rank(records, snapshot, *boosts), report.baseline, backends.info};
    write_json(report_to_json(boosted), dir / "report.boosted.json");
  }

  for (const auto& r : records) {
    out << r.run_id << ' ' << to_string(r.status) << " calls=" << r.llm_calls << " predicted=" << r.predicted.size()
        << '\n';
  }
  const auto& top = report.report.ranked;
  out << "confidence " << fixed(report.report.confidence, 4) << '\n';
  if (!top.empty()) out << "top " << top.front().signature.to_string() << ' ' << fixed(top.front().score, 4) << '\n';
  return 0;
}

// --- aggregate ------------------------------------------------------------

int cmd_aggregate(const AggregateOptions& opts, std::ostream& out, std::ostream&) {
  const RepoSnapshot snapshot = load_snapshot(opts.snapshot);
  const RunSet runset = runset_from_json(read_json(opts.runset));
  if (runset.snapshot_sha256 != snapshot_digest(snapshot)) {
    throw ValidationError("run-set was produced from a different snapshot");
  }
  ReportDocument report{rank(runset.runs, snapshot), !runset.config.tools_enabled, runset.backend};
  if (const auto boosts = read_boost(opts.boost, snapshot.bug_id(), runset.runs)) {
    report.report = rank(runset.runs, snapshot, *boosts);
  }
  write_json(report_to_json(report), opts.out);
  out << "confidence " << fixed(report.report.confidence, 4) << '\n';
  return 0;
}

// --- eval -----------------------------------------------------------------

std::vector<fs::path> json_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string acc_table(std::span<const BugResult> results, std::span<const std::size_t> ks) {
  std::string tsv = "k\tacc\n";
  for (std::size_t k : ks) tsv += std::to_string(k) + "\t" + std::to_string(acc_at_k(results, k)) + "\n";
  return tsv;
}

std::string per_bug_table(std::span<const BugResult> results) {
  std::string tsv = "bug_id\tconfidence\tp_at_1\trr\tap\n";
  for (const auto& r : results) {
    tsv += r.bug_id + "\t" + fixed(r.report.confidence) + "\t" + fixed(r.metrics.p_at_1) + "\t" + fixed(r.metrics.rr) +
           "\t" + fixed(r.metrics.ap) + "\n";
  }
  return tsv;
}

json metrics_summary(std::span<const BugResult> results, std::span<const std::size_t> ks, const EvalOptions& opts) {
  json acc = json::object();
  for (std::size_t k : ks) acc[std::to_string(k)] = acc_at_k(results, k);
  const auto corr = confidence_correlations(results, opts.permutations, opts.seed);
  json bugs = json::array();
  for (const auto& r : results) {
    bugs.push_back({{"bug_id", r.bug_id},
                    {"confidence", r.report.confidence},
                    {"p_at_1", r.metrics.p_at_1},
                    {"rr", r.metrics.rr},
                    {"ap", r.metrics.ap}});
  }
  return {{"bugs_evaluated", results.size()},
          {"acc_at_k", std::move(acc)},
          {"per_bug", std::move(bugs)},
          {"spearman_confidence",
           {{"p_at_1", correlation_json(corr.p_at_1)},
            {"rr", correlation_json(corr.rr)},
            {"ap", correlation_json(corr.ap)}}}};
}

void print_metrics(std::ostream& out, const std::string& title, std::span<const BugResult> results,
                   std::span<const std::size_t> ks, const EvalOptions& opts) {
  out << title << '\n';
  for (std::size_t k : ks) out << "  acc@" << k << " " << acc_at_k(results, k) << '\n';
  const auto corr = confidence_correlations(results, opts.permutations, opts.seed);
  out << "  spearman(confidence, P@1) " << rho_text(corr.p_at_1) << '\n';
  out << "  spearman(confidence, RR) " << rho_text(corr.rr) << '\n';
  out << "  spearman(confidence, AP) " << rho_text(corr.ap) << '\n';
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<std::string> problems;
  const auto truth = truth_from_json(read_json(opts.truth), problems);
  for (const auto& p : problems) err << "warning: " << p << '\n';

  std::map<std::string, ReportDocument> reports;
  for (const auto& file : json_files(opts.reports)) {
    const json doc = read_json(file);
    if (doc.value("kind", std::string{}) != "autofl-report" || doc.value("boost_applied", false)) continue;
    ReportDocument report = report_from_json(doc);
    const std::string bug = report.report.bug_id;
    if (!reports.emplace(bug, std::move(report)).second) {
      throw ValidationError("duplicate report for bug '" + bug + "' in " + file.string());
    }
  }
  if (reports.empty()) throw ValidationError("no reports found in " + opts.reports);

  std::map<std::string, RunSet> runsets;
  const std::string runset_dir = opts.runsets.empty() ? opts.reports : opts.runsets;
  if (!opts.boost.empty() || !opts.labels.empty()) {
    for (const auto& file : json_files(runset_dir)) {
      const json doc = read_json(file);
      if (doc.value("kind", std::string{}) != "autofl-runset") continue;
      RunSet rs = runset_from_json(doc);
      runsets.emplace(rs.bug_id, std::move(rs));
    }
  }

  std::vector<BugResult> results;
  json skipped = json::array();
  for (const auto& [bug, doc] : reports) {
    const auto it = truth.find(bug);
    if (it == truth.end()) {
      err << "warning: " << bug << ": no resolvable ground truth, skipped\n";
      skipped.push_back({{"bug_id", bug}, {"reason", "no resolvable ground truth"}});
      continue;
    }
    if (it->second.empty()) {
      err << "warning: " << bug << ": empty ground truth (omission bug), excluded\n";
      skipped.push_back({{"bug_id", bug}, {"reason", "omission bug"}});
      continue;
    }
    results.push_back(make_bug_result(bug, doc.report, it->second));
  }

  const fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  write_text(acc_table(results, opts.ks), dir / "acc_at_k.tsv");
  write_text(per_bug_table(results), dir / "per_bug.tsv");

  json summary = metrics_summary(results, opts.ks, opts);
  summary["skipped"] = std::move(skipped);
  summary["permutations"] = opts.permutations;
  summary["seed"] = opts.seed;
  print_metrics(out, "metrics", results, opts.ks, opts);

  if (!opts.boost.empty()) {
    const auto specs = boost_specs_from_json(read_json(opts.boost));
    std::vector<BugResult> boosted;
    for (const auto& r : results) {
      const auto spec = specs.find(r.bug_id);
      const auto rs = runsets.find(r.bug_id);
      if (spec == specs.end() || rs == runsets.end()) {
        err << "warning: " << r.bug_id << ": no boost values or run-set, boosted table uses the base report\n";
        boosted.push_back(r);
        continue;
      }
      const BoostVector vec = boosts_for(rs->second.runs, spec->second.by_run_id, spec->second.source);
      boosted.push_back(make_bug_result(r.bug_id, rerank_with_boost(r.report, rs->second.runs, vec), r.ground_truth));
    }
    write_text(acc_table(boosted, opts.ks), dir / "acc_at_k.boosted.tsv");
    write_text(per_bug_table(boosted), dir / "per_bug.boosted.tsv");
    summary["boosted"] = metrics_summary(boosted, opts.ks, opts);
    print_metrics(out, "boosted metrics", boosted, opts.ks, opts);
  }

  if (!opts.labels.empty()) {
    auto labeled = labels_from_json(read_json(opts.labels));
    std::vector<LabeledExplanation> usable;
    for (auto& item : labeled) {
      const auto rs = runsets.find(item.bug_id);
      if (rs == runsets.end()) continue;
      for (const auto& r : rs->second.runs) {
        if (r.run_id == item.run_id && r.explanation) {
          item.text = *r.explanation;
          usable.push_back(item);
        }
      }
    }
    json lengths = json::object();
    for (const auto& [label, test] : length_label_correlations(usable, opts.permutations, opts.seed)) {
      lengths[label] = correlation_json(test);
      out << "  spearman(length, " << label << ") " << rho_text(test) << '\n';
    }
    summary["length_labels"] = std::move(lengths);
  }

  write_json(summary, dir / "summary.json");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage LLM fault localization with tool calls"};
  app.require_subcommand(1);

  ValidateOptions validate_opts;
  auto* validate_cmd = app.add_subcommand("validate", "Check a snapshot file against its invariants");
  validate_cmd->add_option("snapshot", validate_opts.snapshot, "Snapshot file")->required();

  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run a campaign and write run-set, report and explanations");
  run_cmd->add_option("--snapshot", run_opts.snapshot, "Snapshot file")->required();
  run_cmd->add_option("--backend", run_opts.backend, "live | mock:<scenario.json> | replay:<transcript.json>")
      ->required();
  run_cmd->add_option("--live-config", run_opts.live_config, "Endpoint configuration for the live backend");
  run_cmd->add_option("--record", run_opts.record, "Record every exchange to this transcript file");
  run_cmd->add_option("--out", run_opts.out_dir, "Output directory")->required();
  run_cmd->add_option("--boost", run_opts.boost, "Boost sidecar; also writes report.boosted.json");
  run_cmd->add_option("--n-budget", run_opts.config.n_budget, "Maximum LLM-initiated function calls")
      ->capture_default_str();
  run_cmd->add_option("--runs", run_opts.config.r_runs, "Number of runs R")->capture_default_str();
  run_cmd->add_flag("--no-tools", run_opts.no_tools, "Baseline mode: no function calls");
  run_cmd->add_option("--policy", run_opts.policy, "round_robin | fixed | concatenated")->capture_default_str();
  run_cmd->add_option("--fixed-test", run_opts.config.fixed_test, "Failing test index for the fixed policy");
  run_cmd->add_option("--parallel", run_opts.config.parallel, "Concurrent dialogues")->capture_default_str();
  run_cmd->add_option("--response-limit", run_opts.config.response_byte_limit, "Function response byte cap")
      ->capture_default_str();
  run_cmd->add_option("--seed", run_opts.seed, "Seed recorded with the run-set")->capture_default_str();

  AggregateOptions agg_opts;
  auto* agg_cmd = app.add_subcommand("aggregate", "Re-aggregate an existing run-set into a report");
  agg_cmd->add_option("--snapshot", agg_opts.snapshot, "Snapshot file")->required();
  agg_cmd->add_option("--runset", agg_opts.runset, "Run-set file")->required();
  agg_cmd->add_option("--boost", agg_opts.boost, "Boost sidecar keyed by run id");
  agg_cmd->add_option("--out", agg_opts.out, "Report file to write")->required();

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Score reports against ground truth");
  eval_cmd->add_option("--reports", eval_opts.reports, "Directory searched for report documents")->required();
  eval_cmd->add_option("--truth", eval_opts.truth, "Ground-truth file")->required();
  eval_cmd->add_option("--runsets", eval_opts.runsets, "Directory searched for run-sets (default: --reports)");
  eval_cmd->add_option("--boost", eval_opts.boost, "Per-bug boost file; adds a boosted metrics table");
  eval_cmd->add_option("--labels", eval_opts.labels, "Explanation labels for the length feature");
  eval_cmd->add_option("--k", eval_opts.ks, "Cut-offs for acc@k")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--permutations", eval_opts.permutations, "Permutations for p-values")->capture_default_str();
  eval_cmd->add_option("--seed", eval_opts.seed, "Permutation seed")->capture_default_str();
  eval_cmd->add_option("--out", eval_opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*validate_cmd) return cmd_validate(validate_opts, out, err);
    if (*run_cmd) return cmd_run(run_opts, out, err);
    if (*agg_cmd) return cmd_aggregate(agg_opts, out, err);
    if (*eval_cmd) return cmd_eval(eval_opts, out, err);
  } catch (const FormatError& e) {
    err << "error: malformed field " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace autofl

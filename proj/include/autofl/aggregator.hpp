#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autofl/orchestrator.hpp"
#include "autofl/repo_model.hpp"

namespace autofl {

enum class Provenance { predicted, appended };

std::string_view to_string(Provenance provenance);

struct RankedMethod {
  MethodSignature signature;
  double score = 0.0;
  Provenance provenance = Provenance::predicted;
  bool covered = false;  // covered by at least one failing test

  friend bool operator==(const RankedMethod&, const RankedMethod&) = default;
};

struct FLReport {
  std::string bug_id;
  std::vector<RankedMethod> ranked;
  double confidence = 0.0;
  std::vector<std::string> run_ids;
  bool boost_applied = false;
  std::string boost_source;

  friend bool operator==(const FLReport&, const FLReport&) = default;
};

/// Per-run multiplicative boost inputs, one value per run in run order.
struct BoostVector {
  std::vector<double> values;
  std::string source = "other";
};

using ScoreMap = std::map<MethodSignature, double>;

/// Prediction set that a run contributes: its answer when ok, nothing otherwise.
std::span<const MethodSignature> effective_prediction(const RunRecord& record);

/// Each ok run spreads 1/R evenly over its predicted methods; erroneous runs
/// still count towards R.
ScoreMap score_methods(std::span<const RunRecord> records);

/// min(1, score * prod over runs predicting m of (1 + boost)). Throws
/// ValidationError when the vector length differs from the number of runs or a
/// value is negative or not finite.
ScoreMap boost(std::span<const RunRecord> records, const ScoreMap& base, const BoostVector& boosts);

/// Predicted methods by score, ties by earliest run then answer position;
/// then never-predicted covered methods by number of covering failing tests,
/// mention count in the function logs, and source order.
FLReport rank(std::span<const RunRecord> records, const RepoSnapshot& snapshot);

/// Same ordering with boosted scores.
FLReport rank(std::span<const RunRecord> records, const RepoSnapshot& snapshot, const BoostVector& boosts);

/// Highest score among ranked methods covered by a failing test, 0 if none.
double confidence(const FLReport& report, const RepoSnapshot& snapshot);

/// Re-scores an existing report with boosts without the snapshot, using the
/// `covered` flags stored in the report. The appended segment is kept as is.
FLReport rerank_with_boost(const FLReport& report, std::span<const RunRecord> records, const BoostVector& boosts);

/// Looks up one boost per record by run id. Missing ids are a ValidationError.
BoostVector boosts_for(std::span<const RunRecord> records, const std::map<std::string, double>& by_run_id,
                       std::string source);

}  // namespace autofl

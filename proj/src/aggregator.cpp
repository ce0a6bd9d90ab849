#include "autofl/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "autofl/errors.hpp"

namespace autofl {

namespace {

// Earliest (run index, answer position) at which a method was predicted.
using FirstSeen = std::map<MethodSignature, std::pair<std::size_t, std::size_t>>;

FirstSeen first_appearance(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->run_index < b->run_index; });
  FirstSeen seen;
  for (const auto* r : ordered) {
    const auto preds = effective_prediction(*r);
    for (std::size_t pos = 0; pos < preds.size(); ++pos) seen.emplace(preds[pos], std::make_pair(r->run_index, pos));
  }
  return seen;
}

std::vector<RankedMethod> predicted_segment(const ScoreMap& scores, const FirstSeen& seen,
                                            const std::function<bool(const MethodSignature&)>& is_covered) {
  std::vector<RankedMethod> out;
  for (const auto& [sig, first] : seen) {
    const auto it = scores.find(sig);
    out.push_back({sig, it == scores.end() ? 0.0 : it->second, Provenance::predicted, is_covered(sig)});
  }
  std::sort(out.begin(), out.end(), [&](const RankedMethod& a, const RankedMethod& b) {
    if (a.score != b.score) return a.score > b.score;
    return seen.at(a.signature) < seen.at(b.signature);
  });
  return out;
}

double max_covered_score(const std::vector<RankedMethod>& ranked) {
  double best = 0.0;
  for (const auto& m : ranked) {
    if (m.covered) best = std::max(best, m.score);
  }
  return best;
}

std::vector<std::string> run_ids_of(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->run_index < b->run_index; });
  std::vector<std::string> ids;
  for (const auto* r : ordered) ids.push_back(r->run_id);
  return ids;
}

FLReport build_report(std::span<const RunRecord> records, const RepoSnapshot& snapshot, const ScoreMap& scores) {
  const FirstSeen seen = first_appearance(records);
  auto is_covered = [&](const MethodSignature& sig) {
    const auto* m = snapshot.find(sig);
    return m != nullptr && !m->covered_by.empty();
  };

  FLReport report;
  report.bug_id = snapshot.bug_id();
  report.run_ids = run_ids_of(records);
  report.ranked = predicted_segment(scores, seen, is_covered);

  std::map<MethodSignature, std::size_t> mentions;
  for (const auto& r : records) {
    for (const auto& entry : r.function_log) {
      for (const auto& sig : entry.mentioned_signatures) ++mentions[sig];
    }
  }

  std::vector<const MethodRecord*> appended;
  for (const auto& m : snapshot.methods()) {
    if (!m.covered_by.empty() && !seen.contains(m.signature)) appended.push_back(&m);
  }
  std::sort(appended.begin(), appended.end(), [&](const MethodRecord* a, const MethodRecord* b) {
    if (a->covered_by.size() != b->covered_by.size()) return a->covered_by.size() > b->covered_by.size();
    const auto ma = mentions.contains(a->signature) ? mentions.at(a->signature) : 0;
    const auto mb = mentions.contains(b->signature) ? mentions.at(b->signature) : 0;
    if (ma != mb) return ma > mb;
    return snapshot.source_rank(*a) < snapshot.source_rank(*b);
  });
  for (const auto* m : appended) report.ranked.push_back({m->signature, 0.0, Provenance::appended, true});

  report.confidence = max_covered_score(report.ranked);
  return report;
}

}  // namespace

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::predicted ? "predicted" : "appended";
}

std::span<const MethodSignature> effective_prediction(const RunRecord& record) {
  if (record.status != RunStatus::ok) return {};
  return record.predicted;
}

ScoreMap score_methods(std::span<const RunRecord> records) {
  ScoreMap scores;
  if (records.empty()) return scores;
  const double runs = static_cast<double>(records.size());
  // Summation follows run order so the result does not depend on record order.
  std::vector<const RunRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->run_index < b->run_index; });
  for (const auto* r : ordered) {
    const auto preds = effective_prediction(*r);
    if (preds.empty()) continue;
    const double share = 1.0 / static_cast<double>(preds.size());
    for (const auto& sig : preds) scores[sig] += share;
  }
  for (auto& [sig, s] : scores) s /= runs;
  return scores;
}

ScoreMap boost(std::span<const RunRecord> records, const ScoreMap& base, const BoostVector& boosts) {
  if (boosts.values.size() != records.size()) {
    throw ValidationError("boost vector has " + std::to_string(boosts.values.size()) + " values for " +
                          std::to_string(records.size()) + " runs");
  }
  for (double b : boosts.values) {
    if (!std::isfinite(b) || b < 0.0) throw ValidationError("boost values must be finite and non-negative");
  }
  ScoreMap out = base;
  for (auto& [sig, score] : out) {
    double factor = 1.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto preds = effective_prediction(records[i]);
      if (std::find(preds.begin(), preds.end(), sig) != preds.end()) factor *= 1.0 + boosts.values[i];
    }
    score = std::min(1.0, score * factor);
  }
  return out;
}

FLReport rank(std::span<const RunRecord> records, const RepoSnapshot& snapshot) {
  return build_report(records, snapshot, score_methods(records));
}

FLReport rank(std::span<const RunRecord> records, const RepoSnapshot& snapshot, const BoostVector& boosts) {
  FLReport report = build_report(records, snapshot, boost(records, score_methods(records), boosts));
  report.boost_applied = true;
  report.boost_source = boosts.source;
  return report;
}

double confidence(const FLReport& report, const RepoSnapshot& snapshot) {
  double best = 0.0;
  for (const auto& m : report.ranked) {
    const auto* rec = snapshot.find(m.signature);
    if (rec != nullptr && !rec->covered_by.empty()) best = std::max(best, m.score);
  }
  return best;
}

FLReport rerank_with_boost(const FLReport& report, std::span<const RunRecord> records, const BoostVector& boosts) {
  std::map<MethodSignature, bool> covered;
  for (const auto& m : report.ranked) covered[m.signature] = m.covered;
  auto is_covered = [&](const MethodSignature& sig) {
    const auto it = covered.find(sig);
    return it != covered.end() && it->second;
  };

  FLReport out;
  out.bug_id = report.bug_id;
  out.run_ids = report.run_ids;
  out.ranked = predicted_segment(boost(records, score_methods(records), boosts), first_appearance(records), is_covered);
  for (const auto& m : report.ranked) {
    if (m.provenance == Provenance::appended) out.ranked.push_back(m);
  }
  out.confidence = max_covered_score(out.ranked);
  out.boost_applied = true;
  out.boost_source = boosts.source;
  return out;
}

BoostVector boosts_for(std::span<const RunRecord> records, const std::map<std::string, double>& by_run_id,
                       std::string source) {
  BoostVector v;
  v.source = std::move(source);
  for (const auto& r : records) {
    const auto it = by_run_id.find(r.run_id);
    if (it == by_run_id.end()) throw ValidationError("no boost value for run '" + r.run_id + "'");
    v.values.push_back(it->second);
  }
  return v;
}

}  // namespace autofl

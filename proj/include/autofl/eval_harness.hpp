#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autofl/aggregator.hpp"

namespace autofl {

struct RankingMetrics {
  double p_at_1 = 0.0;
  double rr = 0.0;
  double ap = 0.0;
};

/// P@1, reciprocal rank of the best-placed truth method, and the mean
/// precision at the ranks of the truth methods that appear in the list
/// (0 when none appear). Ties never occur: the list order is the ranking.
RankingMetrics per_bug_metrics(std::span<const MethodSignature> ranked, const std::set<MethodSignature>& truth);
RankingMetrics per_bug_metrics(const FLReport& report, const std::set<MethodSignature>& truth);

struct BugResult {
  std::string bug_id;
  FLReport report;
  std::set<MethodSignature> ground_truth;
  RankingMetrics metrics;
};

BugResult make_bug_result(std::string bug_id, FLReport report, std::set<MethodSignature> truth);

/// Bugs with a truth method at list position <= k. Bugs with empty ground
/// truth (omission bugs) are not counted. Throws std::invalid_argument for k == 0.
std::size_t acc_at_k(std::span<const BugResult> results, std::size_t k);

/// 1-based ranks, tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of the average-rank vectors. nullopt when fewer than two
/// points or either series has no variance. Throws std::invalid_argument on
/// length mismatch.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct CorrelationTest {
  std::size_t n = 0;
  std::optional<double> rho;
  std::optional<double> p_value;  // two-sided, permutation based
};

inline constexpr std::size_t kDefaultPermutations = 10000;

/// p = (1 + #{|rho_perm| >= |rho|}) / (1 + permutations), shuffling ys.
CorrelationTest spearman_permutation_test(std::span<const double> xs, std::span<const double> ys,
                                          std::size_t permutations = kDefaultPermutations,
                                          std::uint64_t seed = 0);

/// Explanation length feature: number of Unicode code points.
std::size_t explanation_length(std::string_view text);

struct MetricCorrelations {
  CorrelationTest p_at_1;
  CorrelationTest rr;
  CorrelationTest ap;
};

/// Spearman correlation between report confidence and each per-bug metric.
MetricCorrelations confidence_correlations(std::span<const BugResult> results, std::size_t permutations,
                                           std::uint64_t seed);

/// One explanation with its manually assigned quality labels.
struct LabeledExplanation {
  std::string bug_id;
  std::string run_id;
  std::string text;
  std::map<std::string, double> labels;
};

/// Spearman correlation between explanation length and each label present.
std::map<std::string, CorrelationTest> length_label_correlations(std::span<const LabeledExplanation> items,
                                                                 std::size_t permutations, std::uint64_t seed);

}  // namespace autofl

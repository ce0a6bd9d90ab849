#include "autofl/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace autofl {

namespace {

// Sum of hits/rank terms kept as a reduced fraction so that the final mean is
// one correctly rounded division. Falls back to floating point on overflow.
class PrecisionSum {
 public:
  void add(std::uint64_t num, std::uint64_t den) {
    approx_ += static_cast<double>(num) / static_cast<double>(den);
    if (!exact_) return;
    const std::uint64_t g = std::gcd(den_, den);
    std::uint64_t left = 0, right = 0, scale = 0, sum = 0;
    if (__builtin_mul_overflow(num_, den / g, &left) || __builtin_mul_overflow(num, den_ / g, &right) ||
        __builtin_add_overflow(left, right, &sum) || __builtin_mul_overflow(den_, den / g, &scale)) {
      exact_ = false;
      return;
    }
    const std::uint64_t r = std::gcd(sum, scale);
    num_ = sum / r;
    den_ = scale / r;
  }

  double mean(std::uint64_t count) const {
    std::uint64_t den = 0;
    if (exact_ && !__builtin_mul_overflow(den_, count, &den)) {
      return static_cast<double>(num_) / static_cast<double>(den);
    }
    return approx_ / static_cast<double>(count);
  }

 private:
  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
  bool exact_ = true;
  double approx_ = 0.0;
};

}  // namespace

RankingMetrics per_bug_metrics(std::span<const MethodSignature> ranked, const std::set<MethodSignature>& truth) {
  RankingMetrics m;
  if (ranked.empty() || truth.empty()) return m;
  m.p_at_1 = truth.contains(ranked.front()) ? 1.0 : 0.0;
  std::uint64_t hits = 0;
  PrecisionSum precision;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!truth.contains(ranked[i])) continue;
    ++hits;
    if (hits == 1) m.rr = 1.0 / static_cast<double>(i + 1);
    precision.add(hits, i + 1);
  }
  if (hits > 0) m.ap = precision.mean(hits);
  return m;
}

RankingMetrics per_bug_metrics(const FLReport& report, const std::set<MethodSignature>& truth) {
  std::vector<MethodSignature> ranked;
  ranked.reserve(report.ranked.size());
  for (const auto& r : report.ranked) ranked.push_back(r.signature);
  return per_bug_metrics(ranked, truth);
}

BugResult make_bug_result(std::string bug_id, FLReport report, std::set<MethodSignature> truth) {
  BugResult result{std::move(bug_id), std::move(report), std::move(truth), {}};
  result.metrics = per_bug_metrics(result.report, result.ground_truth);
  return result;
}

std::size_t acc_at_k(std::span<const BugResult> results, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  std::size_t count = 0;
  for (const auto& r : results) {
    if (r.ground_truth.empty()) continue;
    const std::size_t limit = std::min(k, r.report.ranked.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (r.ground_truth.contains(r.report.ranked[i].signature)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("spearman: series lengths differ");
  if (xs.size() < 2) return std::nullopt;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

CorrelationTest spearman_permutation_test(std::span<const double> xs, std::span<const double> ys,
                                          std::size_t permutations, std::uint64_t seed) {
  CorrelationTest test;
  test.n = xs.size();
  test.rho = spearman(xs, ys);
  if (!test.rho || permutations == 0) return test;

  const auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  const double observed = std::abs(*test.rho);
  constexpr double kSlack = 1e-12;
  std::mt19937_64 rng(seed);
  std::size_t extreme = 0;
  for (std::size_t i = 0; i < permutations; ++i) {
    std::shuffle(ry.begin(), ry.end(), rng);
    const auto rho = pearson(rx, ry);
    if (rho && std::abs(*rho) >= observed - kSlack) ++extreme;
  }
  test.p_value = static_cast<double>(extreme + 1) / static_cast<double>(permutations + 1);
  return test;
}

std::size_t explanation_length(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

MetricCorrelations confidence_correlations(std::span<const BugResult> results, std::size_t permutations,
                                           std::uint64_t seed) {
  std::vector<double> conf;
  std::vector<double> p1;
  std::vector<double> rr;
  std::vector<double> ap;
  for (const auto& r : results) {
    if (r.ground_truth.empty()) continue;
    conf.push_back(r.report.confidence);
    p1.push_back(r.metrics.p_at_1);
    rr.push_back(r.metrics.rr);
    ap.push_back(r.metrics.ap);
  }
  return {spearman_permutation_test(conf, p1, permutations, seed),
          spearman_permutation_test(conf, rr, permutations, seed),
          spearman_permutation_test(conf, ap, permutations, seed)};
}

std::map<std::string, CorrelationTest> length_label_correlations(std::span<const LabeledExplanation> items,
                                                                 std::size_t permutations, std::uint64_t seed) {
  std::set<std::string> names;
  for (const auto& item : items) {
    for (const auto& [name, value] : item.labels) names.insert(name);
  }
  std::map<std::string, CorrelationTest> out;
  for (const auto& name : names) {
    std::vector<double> lengths;
    std::vector<double> values;
    for (const auto& item : items) {
      const auto it = item.labels.find(name);
      if (it == item.labels.end()) continue;
      lengths.push_back(static_cast<double>(explanation_length(item.text)));
      values.push_back(it->second);
    }
    out.emplace(name, spearman_permutation_test(lengths, values, permutations, seed));
  }
  return out;
}

}  // namespace autofl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "primelearn/dataset.hpp"
#include "primelearn/numtheory.hpp"

// Measurement: confusion-derived metrics, rank-based AUC, block-count
// distribution divergences, and the false-positive factor-structure analysis.
// Undefined quantities (degenerate denominators, single-class AUC) are
// reported as NaN markers, never as 0.

namespace primelearn::analysis {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double v) { return !std::isnan(v); }

struct MetricsReport {
  // Prime is the positive class; the non-prime counts are the mirror image.
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision_prime = kUndefined, recall_prime = kUndefined, f1_prime = kUndefined;
  double precision_nonprime = kUndefined, recall_nonprime = kUndefined,
         f1_nonprime = kUndefined;
  double accuracy = kUndefined;
  double auc = kUndefined;

  std::uint64_t population() const { return tp + fp + tn + fn; }

  static MetricsReport from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn,
                                   std::uint64_t fn) {
    MetricsReport r;
    r.tp = tp;
    r.fp = fp;
    r.tn = tn;
    r.fn = fn;
    auto ratio = [](std::uint64_t num, std::uint64_t den) {
      return den == 0 ? kUndefined : static_cast<double>(num) / static_cast<double>(den);
    };
    r.precision_prime = ratio(tp, tp + fp);
    r.recall_prime = ratio(tp, tp + fn);
    r.precision_nonprime = ratio(tn, tn + fn);
    r.recall_nonprime = ratio(tn, tn + fp);
    auto f1 = [](double p, double rec) {
      if (!is_defined(p) || !is_defined(rec) || p + rec == 0.0) return kUndefined;
      return 2.0 * p * rec / (p + rec);
    };
    r.f1_prime = f1(r.precision_prime, r.recall_prime);
    r.f1_nonprime = f1(r.precision_nonprime, r.recall_nonprime);
    r.accuracy = ratio(tp + tn, r.population());
    return r;
  }
};

// Confusion-derived metrics (AUC left undefined; see roc_auc).
inline MetricsReport classification_metrics(const std::vector<std::uint8_t>& pred,
                                            const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("classification_metrics: length mismatch");
  if (pred.empty()) throw std::invalid_argument("classification_metrics: empty input");
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i])
      pred[i] ? ++tp : ++fn;
    else
      pred[i] ? ++fp : ++tn;
  }
  return MetricsReport::from_counts(tp, fp, tn, fn);
}

// AUC as the Mann-Whitney statistic P(s+ > s-) + 0.5 P(s+ = s-), computed
// from average ranks; ties are handled exactly.
inline double roc_auc(const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::uint64_t n_pos = 0;
  for (std::uint8_t t : truth) n_pos += t ? 1 : 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return kUndefined;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (truth[idx[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// --------------------------------------------------------------------------
// Distributions of per-block prime counts.

struct CountDistribution {
  std::vector<std::int64_t> support;  // sorted, unique
  std::vector<double> probs;

  static CountDistribution from_counts(const std::vector<std::uint32_t>& counts) {
    if (counts.empty()) throw std::invalid_argument("CountDistribution: no blocks");
    std::map<std::int64_t, std::uint64_t> hist;
    for (std::uint32_t c : counts) ++hist[static_cast<std::int64_t>(c)];
    CountDistribution dist;
    for (const auto& [value, freq] : hist) {
      dist.support.push_back(value);
      dist.probs.push_back(static_cast<double>(freq) / static_cast<double>(counts.size()));
    }
    return dist;
  }

  static CountDistribution from_blocks(const numtheory::BlockCounts& blocks) {
    return from_counts(blocks.counts);
  }

  double mean() const {
    double m = 0;
    for (std::size_t i = 0; i < support.size(); ++i)
      m += static_cast<double>(support[i]) * probs[i];
    return m;
  }

  void validate() const {
    if (support.size() != probs.size() || support.empty())
      throw std::invalid_argument("CountDistribution: malformed");
    double total = 0;
    for (double p : probs) {
      if (p < 0) throw std::invalid_argument("CountDistribution: negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("CountDistribution: probabilities must sum to 1");
    if (!std::is_sorted(support.begin(), support.end()))
      throw std::invalid_argument("CountDistribution: support must be sorted");
  }
};

namespace detail {

inline std::vector<std::int64_t> union_support(const CountDistribution& p,
                                               const CountDistribution& q) {
  std::vector<std::int64_t> sup;
  sup.reserve(p.support.size() + q.support.size());
  std::merge(p.support.begin(), p.support.end(), q.support.begin(), q.support.end(),
             std::back_inserter(sup));
  sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
  return sup;
}

inline double prob_at(const CountDistribution& d, std::int64_t value) {
  const auto it = std::lower_bound(d.support.begin(), d.support.end(), value);
  if (it == d.support.end() || *it != value) return 0.0;
  return d.probs[static_cast<std::size_t>(it - d.support.begin())];
}

}  // namespace detail

// Jensen-Shannon divergence with base-2 logarithms (bounded by 1).
inline double js_divergence(const CountDistribution& p, const CountDistribution& q) {
  p.validate();
  q.validate();
  double js = 0;
  for (std::int64_t value : detail::union_support(p, q)) {
    const double pp = detail::prob_at(p, value);
    const double qq = detail::prob_at(q, value);
    const double mid = 0.5 * (pp + qq);
    if (pp > 0) js += 0.5 * pp * std::log2(pp / mid);
    if (qq > 0) js += 0.5 * qq * std::log2(qq / mid);
  }
  return js;
}

// sqrt of the base-2 divergence; the metric form, emitted for transparency.
inline double js_distance(const CountDistribution& p, const CountDistribution& q) {
  return std::sqrt(std::max(0.0, js_divergence(p, q)));
}

// 1-D optimal transport on integer support: sum over the integer grid of
// |CDF_p - CDF_q| (CDFs are constant between support points).
inline double wasserstein1(const CountDistribution& p, const CountDistribution& q) {
  p.validate();
  q.validate();
  const auto sup = detail::union_support(p, q);
  double cdf_p = 0, cdf_q = 0, total = 0;
  for (std::size_t i = 0; i + 1 < sup.size(); ++i) {
    cdf_p += detail::prob_at(p, sup[i]);
    cdf_q += detail::prob_at(q, sup[i]);
    total += std::abs(cdf_p - cdf_q) * static_cast<double>(sup[i + 1] - sup[i]);
  }
  return total;
}

// --------------------------------------------------------------------------
// False-positive structure by number of prime factors.

struct FprByOmega {
  struct Bucket {
    std::uint64_t total = 0;
    std::uint64_t misclassified = 0;
    double fpr = kUndefined;
  };
  // Key: Omega(n). Bucket 0 holds the units {0, 1} when the range includes
  // them; composites land at Omega >= 2.
  std::map<int, Bucket> buckets;
};

// Buckets every non-prime in the range by Omega and computes the per-bucket
// false-positive rate. fp_set must be sorted absolute values, all non-prime.
inline FprByOmega fpr_by_factor_count(const std::vector<std::uint64_t>& fp_set,
                                      const dataset::RangeSpec& range) {
  range.validate();
  if (!std::is_sorted(fp_set.begin(), fp_set.end()))
    throw std::invalid_argument("fpr_by_factor_count: fp_set must be sorted");
  const auto bitmap = numtheory::sieve_range(range.abs_lo(), range.abs_hi());
  for (std::uint64_t v : fp_set) {
    if (v < range.abs_lo() || v >= range.abs_hi())
      throw std::invalid_argument("fpr_by_factor_count: fp value outside range");
    if (bitmap.test(v))
      throw std::invalid_argument("fpr_by_factor_count: fp_set contains a prime");
  }
  FprByOmega result;
  std::size_t fp_cursor = 0;
  for (std::uint64_t v = range.abs_lo(); v < range.abs_hi(); ++v) {
    if (bitmap.test(v)) continue;
    const int omega = v < 2 ? 0 : numtheory::count_prime_factors(v);
    auto& bucket = result.buckets[omega];
    ++bucket.total;
    while (fp_cursor < fp_set.size() && fp_set[fp_cursor] < v) ++fp_cursor;
    if (fp_cursor < fp_set.size() && fp_set[fp_cursor] == v) ++bucket.misclassified;
  }
  for (auto& [omega, bucket] : result.buckets)
    bucket.fpr = bucket.total == 0
                     ? kUndefined
                     : static_cast<double>(bucket.misclassified) / static_cast<double>(bucket.total);
  return result;
}

// Consistency of false-positive sets across evaluations: intersection over
// union of all sets, and the mean pairwise Jaccard index. Pairs where both
// sets are empty are skipped; all-empty input yields NaN markers.
struct ConsistencyReport {
  double intersection_over_union = kUndefined;
  double mean_pairwise_jaccard = kUndefined;
};

inline ConsistencyReport fp_consistency(const std::vector<std::vector<std::uint64_t>>& sets) {
  if (sets.size() < 2) throw std::invalid_argument("fp_consistency: need at least 2 sets");
  for (const auto& s : sets)
    if (!std::is_sorted(s.begin(), s.end()))
      throw std::invalid_argument("fp_consistency: sets must be sorted");

  auto intersect_size = [](const std::vector<std::uint64_t>& a,
                           const std::vector<std::uint64_t>& b) {
    std::size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j])
        ++i;
      else if (a[i] > b[j])
        ++j;
      else {
        ++common;
        ++i;
        ++j;
      }
    }
    return common;
  };

  ConsistencyReport report;

  std::vector<std::uint64_t> all_union = sets[0];
  std::vector<std::uint64_t> all_inter = sets[0];
  for (std::size_t i = 1; i < sets.size(); ++i) {
    std::vector<std::uint64_t> tmp;
    std::set_union(all_union.begin(), all_union.end(), sets[i].begin(), sets[i].end(),
                   std::back_inserter(tmp));
    all_union = std::move(tmp);
    tmp.clear();
    std::set_intersection(all_inter.begin(), all_inter.end(), sets[i].begin(), sets[i].end(),
                          std::back_inserter(tmp));
    all_inter = std::move(tmp);
  }
  if (!all_union.empty())
    report.intersection_over_union =
        static_cast<double>(all_inter.size()) / static_cast<double>(all_union.size());

  double jaccard_sum = 0;
  std::size_t jaccard_pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      const std::size_t common = intersect_size(sets[i], sets[j]);
      const std::size_t unified = sets[i].size() + sets[j].size() - common;
      if (unified == 0) continue;
      jaccard_sum += static_cast<double>(common) / static_cast<double>(unified);
      ++jaccard_pairs;
    }
  if (jaccard_pairs > 0) report.mean_pairwise_jaccard = jaccard_sum / jaccard_pairs;
  return report;
}

}  // namespace primelearn::analysis

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qafe/error.hpp"

namespace qafe {

using json = nlohmann::json;

/// A metric score joined with its gold judgment.
struct ScoredExample {
  std::string example_id;
  std::string dataset;
  std::string system;
  std::string doc_id;  // groups summaries of one source document
  double metric_score = 0.0;
  std::optional<int> label;
  std::optional<double> human_score;
};

// ---------------------------------------------------------------------------
// Binary classification
// ---------------------------------------------------------------------------

struct ConfusionCounts {
  long tp = 0, fn = 0, tn = 0, fp = 0;
};

inline ConfusionCounts confusion(const std::vector<bool>& predictions,
                                 const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw Error(ErrorCode::MisalignedInputs, "predictions vs labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      (predictions[i] ? c.tp : c.fn)++;
    else
      (predictions[i] ? c.fp : c.tn)++;
  }
  return c;
}

/// (TPR + TNR) / 2. Requires both classes among the labels.
inline double balanced_accuracy(const std::vector<bool>& predictions,
                                const std::vector<int>& labels) {
  ConfusionCounts c = confusion(predictions, labels);
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
    throw Error(ErrorCode::DegenerateLabels, "labels contain a single class");
  double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return (tpr + tnr) / 2.0;
}

inline std::vector<bool> predict_at(const std::vector<double>& scores,
                                    double threshold) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold;
  return out;
}

struct ThresholdChoice {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

/// Maximizes validation balanced accuracy over the midpoints between
/// consecutive distinct scores plus -inf/+inf sentinels; ties go to the
/// smallest threshold.
inline ThresholdChoice select_threshold(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::MisalignedInputs, "scores vs labels");
  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back((distinct[i] + distinct[i + 1]) / 2.0);
  candidates.push_back(std::numeric_limits<double>::infinity());

  ThresholdChoice best;
  best.balanced_accuracy = -1.0;
  for (double t : candidates) {
    double acc = balanced_accuracy(predict_at(scores, t), labels);
    if (acc > best.balanced_accuracy) {
      best.threshold = t;
      best.balanced_accuracy = acc;
    }
  }
  return best;
}

/// Seeded 80/20 shuffle split; the tune side must keep both classes.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
ablation_split(const std::vector<int>& labels, unsigned seed) {
  const std::size_t n = labels.size();
  if (n < 5) throw Error(ErrorCode::DegenerateSplit, "need at least 5 examples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_tune = (n * 8) / 10;
  std::vector<std::size_t> tune(order.begin(), order.begin() + n_tune);
  std::vector<std::size_t> eval(order.begin() + n_tune, order.end());
  bool pos = false, neg = false;
  for (std::size_t i : tune) (labels[i] == 1 ? pos : neg) = true;
  if (!pos || !neg)
    throw Error(ErrorCode::DegenerateSplit, "tune side lost a class");
  return {std::move(tune), std::move(eval)};
}

// ---------------------------------------------------------------------------
// Bootstrap significance
// ---------------------------------------------------------------------------

struct BootstrapVerdict {
  double observed_diff = 0.0;  // balanced accuracy A minus B
  double ci_low_05 = 0.0, ci_high_05 = 0.0;  // Bonferroni-corrected 0.05 level
  double ci_low_01 = 0.0, ci_high_01 = 0.0;  // Bonferroni-corrected 0.01 level
  bool significant_05 = false;
  bool significant_01 = false;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::pair<double, double> percentile_interval(
    const std::vector<double>& sorted, double alpha) {
  const std::size_t n = sorted.size();
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, n - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

}  // namespace detail

/// Paired bootstrap of the balanced-accuracy difference between two metrics
/// on one test set, each with its own pre-selected threshold. Confidence
/// intervals are two-sided percentile intervals at 0.05 and 0.01 after
/// Bonferroni division by `comparisons`. Resamples draw from a counter-based
/// stream, so the result is independent of worker count.
inline BootstrapVerdict bootstrap_compare(
    const std::vector<double>& scores_a, const std::vector<double>& scores_b,
    const std::vector<int>& labels, double threshold_a, double threshold_b,
    int resamples = 10000, int comparisons = 1, std::uint64_t seed = 0,
    int workers = 1) {
  const std::size_t n = labels.size();
  if (scores_a.size() != n || scores_b.size() != n)
    throw Error(ErrorCode::MisalignedInputs, "bootstrap arrays differ in size");
  if (resamples < 1000)
    throw Error(ErrorCode::ConfigError, "resamples must be >= 1000");
  {
    bool pos = false, neg = false;
    for (int l : labels) (l == 1 ? pos : neg) = true;
    if (!pos || !neg)
      throw Error(ErrorCode::DegenerateLabels, "bootstrap needs both classes");
  }

  BootstrapVerdict verdict;
  verdict.observed_diff =
      balanced_accuracy(predict_at(scores_a, threshold_a), labels) -
      balanced_accuracy(predict_at(scores_b, threshold_b), labels);

  std::vector<double> diffs(static_cast<std::size_t>(resamples));
  auto run_range = [&](int from, int to) {
    std::vector<std::size_t> idx(n);
    std::vector<bool> pa(n), pb(n);
    std::vector<int> lab(n);
    for (int r = from; r < to; ++r) {
      std::mt19937_64 rng(detail::splitmix64(
          seed ^ detail::splitmix64(static_cast<std::uint64_t>(r) + 1)));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      // Redraw until the resample keeps both classes.
      while (true) {
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
          idx[i] = pick(rng);
          (labels[idx[i]] == 1 ? pos : neg) = true;
        }
        if (pos && neg) break;
      }
      for (std::size_t i = 0; i < n; ++i) {
        pa[i] = scores_a[idx[i]] >= threshold_a;
        pb[i] = scores_b[idx[i]] >= threshold_b;
        lab[i] = labels[idx[i]];
      }
      diffs[static_cast<std::size_t>(r)] =
          balanced_accuracy(pa, lab) - balanced_accuracy(pb, lab);
    }
  };

  workers = std::max(1, workers);
  if (workers == 1) {
    run_range(0, resamples);
  } else {
    std::vector<std::thread> pool;
    int chunk = (resamples + workers - 1) / workers;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(run_range, w * chunk,
                        std::min(resamples, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }

  std::sort(diffs.begin(), diffs.end());
  double m = static_cast<double>(std::max(1, comparisons));
  std::tie(verdict.ci_low_05, verdict.ci_high_05) =
      detail::percentile_interval(diffs, 0.05 / m);
  std::tie(verdict.ci_low_01, verdict.ci_high_01) =
      detail::percentile_interval(diffs, 0.01 / m);
  verdict.significant_05 = verdict.ci_low_05 > 0.0 || verdict.ci_high_05 < 0.0;
  verdict.significant_01 = verdict.ci_low_01 > 0.0 || verdict.ci_high_01 < 0.0;
  return verdict;
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

enum class Coefficient { Pearson, Spearman, Kendall };

inline Coefficient coefficient_from_name(const std::string& name) {
  if (name == "pearson") return Coefficient::Pearson;
  if (name == "spearman") return Coefficient::Spearman;
  if (name == "kendall") return Coefficient::Kendall;
  throw Error(ErrorCode::ConfigError, "unknown coefficient: " + name);
}

namespace detail {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorCode::InsufficientVariance, "constant array");
  return sxy / std::sqrt(sxx * syy);
}

// Average (fractional) ranks, ties sharing their mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double kendall_tau_b(const std::vector<double>& x,
                            const std::vector<double>& y) {
  const std::size_t n = x.size();
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx = x[i] - x[j];
      double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) { ++ties_x; continue; }
      if (dy == 0.0) { ++ties_y; continue; }
      if ((dx > 0) == (dy > 0))
        ++concordant;
      else
        ++discordant;
    }
  }
  double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  long long txy = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (x[i] == x[j] && y[i] == y[j]) ++txy;
    }
  double n1 = static_cast<double>(ties_x + txy);
  double n2 = static_cast<double>(ties_y + txy);
  double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (denom == 0.0)
    throw Error(ErrorCode::InsufficientVariance, "constant array");
  return static_cast<double>(concordant - discordant) / denom;
}

}  // namespace detail

/// Instance-level correlation over pooled pairs.
inline double correlate(const std::vector<double>& metric_scores,
                        const std::vector<double>& human_scores,
                        Coefficient coefficient) {
  if (metric_scores.size() != human_scores.size())
    throw Error(ErrorCode::MisalignedInputs, "correlate arrays differ in size");
  if (metric_scores.size() < 2)
    throw Error(ErrorCode::InsufficientVariance, "need at least 2 pairs");
  switch (coefficient) {
    case Coefficient::Pearson:
      return detail::pearson(metric_scores, human_scores);
    case Coefficient::Spearman:
      return detail::pearson(detail::average_ranks(metric_scores),
                             detail::average_ranks(human_scores));
    case Coefficient::Kendall:
      return detail::kendall_tau_b(metric_scores, human_scores);
  }
  throw Error(ErrorCode::ConfigError, "unknown coefficient");
}

struct SummaryLevelResult {
  double mean = 0.0;
  std::size_t qualifying_groups = 0;
  std::size_t skipped_groups = 0;
};

/// Summary-level correlation: coefficient within each source-document group
/// with >= 2 systems and variance on both sides, averaged over qualifying
/// groups. Zero-variance groups are skipped and counted.
inline SummaryLevelResult correlate_summary_level(
    const std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>&
        groups,
    Coefficient coefficient) {
  SummaryLevelResult result;
  double total = 0.0;
  for (const auto& [doc, pair] : groups) {
    const auto& [metric, human] = pair;
    if (metric.size() < 2) {
      ++result.skipped_groups;
      continue;
    }
    try {
      total += correlate(metric, human, coefficient);
      ++result.qualifying_groups;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientVariance) throw;
      ++result.skipped_groups;
    }
  }
  if (result.qualifying_groups == 0)
    throw Error(ErrorCode::NoQualifyingGroups, "no group qualifies");
  result.mean = total / static_cast<double>(result.qualifying_groups);
  return result;
}

// ---------------------------------------------------------------------------
// Benchmark aggregation and statistics validation
// ---------------------------------------------------------------------------

struct BenchmarkResult {
  std::map<std::string, double> per_dataset_balanced_accuracy;
  std::map<std::string, double> chosen_thresholds;
  std::map<std::string, ConfusionCounts> confusion_counts;
  std::map<std::string, json> significance;
  double benchmark_average = 0.0;
};

/// Threshold from the valid split, balanced accuracy on the test split,
/// unweighted mean over datasets.
inline BenchmarkResult run_benchmark(
    const std::map<std::string,
                   std::pair<std::vector<ScoredExample>, std::vector<ScoredExample>>>&
        per_dataset_valid_test) {
  BenchmarkResult result;
  double total = 0.0;
  for (const auto& [dataset, splits] : per_dataset_valid_test) {
    const auto& [valid, test] = splits;
    auto unpack = [](const std::vector<ScoredExample>& xs) {
      std::vector<double> scores;
      std::vector<int> labels;
      for (const auto& x : xs) {
        if (!x.label)
          throw Error(ErrorCode::MissingField, "label missing: " + x.example_id);
        scores.push_back(x.metric_score);
        labels.push_back(*x.label);
      }
      return std::make_pair(scores, labels);
    };
    auto [vscores, vlabels] = unpack(valid);
    auto [tscores, tlabels] = unpack(test);
    ThresholdChoice choice = select_threshold(vscores, vlabels);
    auto preds = predict_at(tscores, choice.threshold);
    result.chosen_thresholds[dataset] = choice.threshold;
    result.confusion_counts[dataset] = confusion(preds, tlabels);
    result.per_dataset_balanced_accuracy[dataset] =
        balanced_accuracy(preds, tlabels);
    total += result.per_dataset_balanced_accuracy[dataset];
  }
  if (!result.per_dataset_balanced_accuracy.empty())
    result.benchmark_average =
        total /
        static_cast<double>(result.per_dataset_balanced_accuracy.size());
  return result;
}

struct DatasetStats {
  long n_valid = 0;
  long n_test = 0;
  double pct_positive_valid = 0.0;  // one-decimal percentage
};

/// Published benchmark statistics used for ingest sanity checks.
inline const std::map<std::string, DatasetStats>& expected_benchmark_stats() {
  static const std::map<std::string, DatasetStats> stats{
      {"CGS", {1281, 400, 49.7}},      {"XSF", {996, 996, 9.4}},
      {"Polytope", {634, 634, 87.2}},  {"FactCC", {931, 503, 85.8}},
      {"SummEval", {850, 850, 90.6}},  {"FRANK", {671, 1575, 33.2}}};
  return stats;
}

struct StatsMismatch {
  std::string dataset;
  std::string field;
  std::string expected;
  std::string actual;
};

struct StatsReport {
  std::vector<StatsMismatch> mismatches;
  std::vector<std::string> skipped;  // datasets without reference stats
};

/// Advisory comparison of ingested counts against the reference table;
/// never fails the run.
inline StatsReport validate_benchmark_stats(
    const std::map<std::string, DatasetStats>& ingested) {
  StatsReport report;
  const auto& expected = expected_benchmark_stats();
  for (const auto& [dataset, actual] : ingested) {
    auto it = expected.find(dataset);
    if (it == expected.end()) {
      report.skipped.push_back(dataset);
      continue;
    }
    const DatasetStats& ref = it->second;
    auto note = [&](const std::string& field, const std::string& exp,
                    const std::string& act) {
      report.mismatches.push_back({dataset, field, exp, act});
    };
    if (actual.n_valid != ref.n_valid)
      note("n_valid", std::to_string(ref.n_valid), std::to_string(actual.n_valid));
    if (actual.n_test != ref.n_test)
      note("n_test", std::to_string(ref.n_test), std::to_string(actual.n_test));
    double rounded = std::round(actual.pct_positive_valid * 10.0) / 10.0;
    if (std::abs(rounded - ref.pct_positive_valid) > 0.05)
      note("pct_positive_valid", std::to_string(ref.pct_positive_valid),
           std::to_string(rounded));
  }
  return report;
}

}  // namespace qafe

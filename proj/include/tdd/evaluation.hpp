#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdd/features.hpp"
#include "tdd/gbm.hpp"

namespace tdd {

/// (0.5 - y)^2 from the expert label. Throws DataError outside [0,1].
double label_uncertainty_weight(double label);

struct EvalWeights {
  std::vector<double> w1;  // sampling weight
  std::vector<double> w2;  // label-uncertainty weight
  std::vector<double> w;   // w1 * w2
};

EvalWeights combine_weights(std::span<const double> w1, std::span<const double> w2);

inline constexpr double kMinInclusionProb = 1e-3;

struct SamplingWeights {
  std::vector<double> inclusion_prob;  // fitted, one per matrix row
  std::vector<std::size_t> included;   // row indices flagged as included
  std::vector<double> w1;              // 1 / clamp(p, 1e-3, 1), aligned with `included`
};

/// Fits the boosted model to inclusion flags over every row of `all` and
/// returns reciprocal fitted probabilities for the included rows. Throws
/// DataError when every row or no row is included.
SamplingWeights estimate_sampling_weights(const FeatureMatrix& all, const std::vector<bool>& included,
                                          const TrainConfig& config);

/// Weighted metrics on expert labels binarized at > 0.5 and predictions at
/// >= threshold. Empty `weights` means all ones. Absent when undefined.
std::optional<double> weighted_accuracy(std::span<const double> scores, std::span<const double> labels,
                                        std::span<const double> weights, double threshold = 0.5);
std::optional<double> weighted_precision(std::span<const double> scores, std::span<const double> labels,
                                         std::span<const double> weights, double threshold = 0.5);
std::optional<double> weighted_recall(std::span<const double> scores, std::span<const double> labels,
                                      std::span<const double> weights, double threshold = 0.5);

/// Weighted probability that a positive outranks a negative (ties count
/// half), by one sorted sweep. Absent when either class has zero weight.
std::optional<double> try_weighted_auroc(std::span<const double> scores, std::span<const double> labels,
                                         std::span<const double> weights);

/// As above but throws DataError on one-class input.
double weighted_auroc(std::span<const double> scores, std::span<const double> labels,
                      std::span<const double> weights);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Interval&) const = default;
};

/// Metric evaluated on a multiset of row indices.
using IndexMetric = std::function<std::optional<double>(std::span<const std::size_t>)>;

struct BootstrapResult {
  Interval ci;
  std::size_t replicates = 0;
  std::size_t undefined = 0;
};

/// Percentile bootstrap over `n` items. Replicates where the metric is
/// undefined are dropped; more than half undefined throws DataError.
/// Replicate b draws from mix_seed(seed, b), so the result does not depend
/// on `threads` (the metric must then be safe to call concurrently).
BootstrapResult bootstrap_ci(std::size_t n, const IndexMetric& metric, std::size_t replicates,
                             std::uint64_t seed, std::size_t threads = 1);

struct MetricValue {
  std::optional<double> value;
  std::optional<Interval> ci;
};

struct MetricReport {
  MetricValue accuracy;
  MetricValue precision;
  MetricValue recall;
  MetricValue auroc;
  double threshold = 0.5;
  bool weighted = false;
};

struct ReportOptions {
  bool with_ci = true;
  std::size_t replicates = 500;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

/// All four metrics, with bootstrap intervals widened where necessary so
/// that each contains its point estimate. Empty weights = unweighted.
MetricReport evaluate_metrics(std::span<const double> scores, std::span<const double> labels,
                              std::span<const double> weights, const ReportOptions& options);

/// Bootstrap interval of metric(a) - metric(b) on shared resamples.
std::optional<Interval> paired_difference_ci(
    std::span<const double> scores_a, std::span<const double> scores_b, std::span<const double> labels,
    std::span<const double> weights,
    const std::function<std::optional<double>(std::span<const double>, std::span<const double>,
                                              std::span<const double>)>& metric,
    std::size_t replicates, std::uint64_t seed);

/// Seeded fold assignment: shuffle, then fold = position mod k.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed);

struct CvResult {
  std::vector<MetricReport> folds;
  MetricReport mean;                 // mean of each defined per-fold value
  std::vector<double> out_of_fold;   // held-out score for every row
  std::vector<std::size_t> fold_of;  // fold index per row
};

/// k-fold cross-validation of the boosted model. `eval_weights` (may be
/// empty) weight the per-fold metrics.
CvResult cross_validate(const FeatureMatrix& x, std::span<const double> labels, std::span<const double> eval_weights,
                        const TrainConfig& config, std::size_t k, std::uint64_t seed);

enum class CurveVariant { model, optimal, random };

std::string_view to_string(CurveVariant variant);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct Curve {
  CurveVariant variant = CurveVariant::model;
  std::vector<CurvePoint> points;
};

struct RecallCurves {
  Curve model;
  Curve optimal;
  Curve random;
};

/// TD found after examining the top m tickets, m = 0..n, by descending score
/// (ties by id), by the labels themselves, and along the random diagonal.
RecallCurves cumulative_recall_curves(std::span<const std::string> ids, std::span<const double> scores,
                                      std::span<const double> labels);

struct PrevalenceEstimate {
  double naive_rate = 0.0;
  double corrected_rate = 0.0;
  double printed_form_rate = 0.0;  // sum p y / sum p, kept for comparison
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_labeled = 0;
  std::size_t n_total = 0;
  std::size_t replicates = 0;
  std::size_t undefined = 0;
  bool refit = false;
};

/// sum(y/p) / sum(1/p).
double inverse_probability_rate(std::span<const double> labels, std::span<const double> probs);

/// Fixed inclusion probabilities; the labeled set is bootstrapped.
PrevalenceEstimate estimate_prevalence(std::span<const double> labels, std::span<const double> inclusion_probs,
                                       std::size_t n_total, std::size_t replicates, std::uint64_t seed);

/// Inclusion probabilities fitted from `all` (rows flagged in `labeled_rows`
/// carry `labels`, aligned); each replicate resamples the whole corpus and
/// refits the inclusion model. Replicates run on all hardware threads.
PrevalenceEstimate estimate_prevalence_refit(const FeatureMatrix& all, std::span<const std::size_t> labeled_rows,
                                             std::span<const double> labels, const TrainConfig& config,
                                             std::size_t replicates, std::uint64_t seed);

}  // namespace tdd

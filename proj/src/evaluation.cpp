#include "tdd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "tdd/errors.hpp"
#include "tdd/rng.hpp"

namespace tdd {
namespace {

void check_inputs(std::span<const double> scores, std::span<const double> labels, std::span<const double> weights) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  if (!weights.empty() && weights.size() != labels.size()) throw DataError("weights and labels differ in length");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weights must be finite and non-negative");
  }
}

double weight_at(std::span<const double> weights, std::size_t i) { return weights.empty() ? 1.0 : weights[i]; }

bool positive_label(double y) { return y > 0.5; }

template <typename T>
std::vector<T> gather(std::span<const T> values, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(values[i]);
  return out;
}

std::vector<double> gather_or_empty(std::span<const double> values, std::span<const std::size_t> idx) {
  return values.empty() ? std::vector<double>{} : gather(values, idx);
}

Interval widen(Interval ci, double point) { return {std::min(ci.lo, point), std::max(ci.hi, point)}; }

}  // namespace

double label_uncertainty_weight(double label) {
  if (!(label >= 0.0 && label <= 1.0)) throw DataError("label out of range [0,1]");
  return (0.5 - label) * (0.5 - label);
}

EvalWeights combine_weights(std::span<const double> w1, std::span<const double> w2) {
  if (w1.size() != w2.size()) throw DataError("weight vectors differ in length");
  EvalWeights out{{w1.begin(), w1.end()}, {w2.begin(), w2.end()}, {}};
  out.w.resize(w1.size());
  for (std::size_t i = 0; i < w1.size(); ++i) out.w[i] = w1[i] * w2[i];
  return out;
}

SamplingWeights estimate_sampling_weights(const FeatureMatrix& all, const std::vector<bool>& included,
                                          const TrainConfig& config) {
  if (included.size() != all.rows()) throw DataError("inclusion flags do not match the matrix");
  const auto n_in = static_cast<std::size_t>(std::count(included.begin(), included.end(), true));
  if (n_in == 0 || n_in == included.size()) {
    throw DataError("sampling-rate regression needs both included and excluded tickets");
  }
  std::vector<double> target(included.size());
  for (std::size_t i = 0; i < included.size(); ++i) target[i] = included[i] ? 1.0 : 0.0;
  const GbmModel model = train_gbm(all, target, config);

  SamplingWeights out;
  out.inclusion_prob = model.predict_proba(all);
  for (std::size_t i = 0; i < included.size(); ++i) {
    if (!included[i]) continue;
    out.included.push_back(i);
    out.w1.push_back(1.0 / std::clamp(out.inclusion_prob[i], kMinInclusionProb, 1.0));
  }
  return out;
}

std::optional<double> weighted_accuracy(std::span<const double> scores, std::span<const double> labels,
                                        std::span<const double> weights, double threshold) {
  check_inputs(scores, labels, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double w = weight_at(weights, i);
    den += w;
    if ((scores[i] >= threshold) == positive_label(labels[i])) num += w;
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

std::optional<double> weighted_precision(std::span<const double> scores, std::span<const double> labels,
                                         std::span<const double> weights, double threshold) {
  check_inputs(scores, labels, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < threshold) continue;
    const double w = weight_at(weights, i);
    den += w;
    if (positive_label(labels[i])) num += w;
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

std::optional<double> weighted_recall(std::span<const double> scores, std::span<const double> labels,
                                      std::span<const double> weights, double threshold) {
  check_inputs(scores, labels, weights);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive_label(labels[i])) continue;
    const double w = weight_at(weights, i);
    den += w;
    if (scores[i] >= threshold) num += w;
  }
  if (!(den > 0.0)) return std::nullopt;
  return num / den;
}

std::optional<double> try_weighted_auroc(std::span<const double> scores, std::span<const double> labels,
                                         std::span<const double> weights) {
  check_inputs(scores, labels, weights);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double total_pos = 0.0, total_neg = 0.0, neg_below = 0.0, sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const double w = weight_at(weights, order[j]);
      (positive_label(labels[order[j]]) ? pos : neg) += w;
      ++j;
    }
    sum += pos * neg_below + 0.5 * pos * neg;
    neg_below += neg;
    total_pos += pos;
    total_neg += neg;
    i = j;
  }
  if (!(total_pos > 0.0) || !(total_neg > 0.0)) return std::nullopt;
  return std::clamp(sum / (total_pos * total_neg), 0.0, 1.0);
}

double weighted_auroc(std::span<const double> scores, std::span<const double> labels,
                      std::span<const double> weights) {
  auto v = try_weighted_auroc(scores, labels, weights);
  if (!v) throw DataError("AUROC needs positive and negative examples with non-zero weight");
  return *v;
}

BootstrapResult bootstrap_ci(std::size_t n, const IndexMetric& metric, std::size_t replicates, std::uint64_t seed,
                             std::size_t threads) {
  if (n == 0) throw DataError("bootstrap of an empty data set");
  if (replicates == 0) throw UsageError("bootstrap needs at least one replicate");
  std::vector<std::optional<double>> results(replicates);
  auto run = [&](std::size_t first, std::size_t stride) {
    std::vector<std::size_t> idx(n);
    for (std::size_t b = first; b < replicates; b += stride) {
      Rng rng(mix_seed(seed, b));
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
      results[b] = metric(idx);
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, replicates);
  if (threads == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          run(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  BootstrapResult out;
  out.replicates = replicates;
  std::vector<double> values;
  values.reserve(replicates);
  for (const auto& r : results) {
    if (r) {
      values.push_back(*r);
    } else {
      ++out.undefined;
    }
  }
  if (2 * out.undefined > replicates) {
    throw DataError("bootstrap: metric undefined in " + std::to_string(out.undefined) + " of " +
                    std::to_string(replicates) + " replicates");
  }
  out.ci = {percentile(values, 0.025), percentile(values, 0.975)};
  return out;
}

MetricReport evaluate_metrics(std::span<const double> scores, std::span<const double> labels,
                              std::span<const double> weights, const ReportOptions& options) {
  check_inputs(scores, labels, weights);
  using Fn = std::function<std::optional<double>(std::span<const double>, std::span<const double>,
                                                 std::span<const double>)>;
  const double t = options.threshold;
  const Fn fns[4] = {
      [t](auto s, auto y, auto w) { return weighted_accuracy(s, y, w, t); },
      [t](auto s, auto y, auto w) { return weighted_precision(s, y, w, t); },
      [t](auto s, auto y, auto w) { return weighted_recall(s, y, w, t); },
      [](auto s, auto y, auto w) { return try_weighted_auroc(s, y, w); },
  };

  MetricReport report;
  report.threshold = t;
  report.weighted = !weights.empty();
  MetricValue* slots[4] = {&report.accuracy, &report.precision, &report.recall, &report.auroc};
  for (int m = 0; m < 4; ++m) {
    MetricValue& mv = *slots[m];
    mv.value = fns[m](scores, labels, weights);
    if (!options.with_ci || !mv.value) continue;
    const Fn& fn = fns[m];
    IndexMetric metric = [&](std::span<const std::size_t> idx) {
      const auto s = gather(scores, idx);
      const auto y = gather(labels, idx);
      const auto w = gather_or_empty(weights, idx);
      return fn(s, y, w);
    };
    try {
      mv.ci = widen(bootstrap_ci(scores.size(), metric, options.replicates, options.seed).ci, *mv.value);
    } catch (const DataError&) {
      mv.ci.reset();
    }
  }
  return report;
}

std::optional<Interval> paired_difference_ci(
    std::span<const double> scores_a, std::span<const double> scores_b, std::span<const double> labels,
    std::span<const double> weights,
    const std::function<std::optional<double>(std::span<const double>, std::span<const double>,
                                              std::span<const double>)>& metric,
    std::size_t replicates, std::uint64_t seed) {
  check_inputs(scores_a, labels, weights);
  check_inputs(scores_b, labels, weights);
  const auto a = metric(scores_a, labels, weights);
  const auto b = metric(scores_b, labels, weights);
  if (!a || !b) return std::nullopt;
  IndexMetric diff = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    const auto y = gather(labels, idx);
    const auto w = gather_or_empty(weights, idx);
    const auto ra = metric(gather(scores_a, idx), y, w);
    const auto rb = metric(gather(scores_b, idx), y, w);
    if (!ra || !rb) return std::nullopt;
    return *ra - *rb;
  };
  try {
    return widen(bootstrap_ci(labels.size(), diff, replicates, seed).ci, *a - *b);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("cross-validation needs k >= 2");
  if (n < k) throw DataError("fewer rows than folds");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.below(i))]);
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[perm[pos]] = pos % k;
  return fold;
}

CvResult cross_validate(const FeatureMatrix& x, std::span<const double> labels, std::span<const double> eval_weights,
                        const TrainConfig& config, std::size_t k, std::uint64_t seed) {
  if (labels.size() != x.rows()) throw DataError("label count does not match row count");
  CvResult out;
  out.fold_of = assign_folds(x.rows(), k, seed);
  out.out_of_fold.assign(x.rows(), 0.0);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < x.rows(); ++i) (out.fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const FeatureMatrix train_x = x.subset(train_rows);
    const auto train_y = gather(labels, train_rows);
    const GbmModel model = train_gbm(train_x, train_y, config);
    std::vector<double> scores;
    for (std::size_t r : test_rows) {
      scores.push_back(model.predict_proba(x.row(r)));
      out.out_of_fold[r] = scores.back();
    }
    const auto test_y = gather(labels, test_rows);
    const auto test_w = gather_or_empty(eval_weights, test_rows);
    ReportOptions opts;
    opts.with_ci = false;
    out.folds.push_back(evaluate_metrics(scores, test_y, test_w, opts));
  }

  out.mean.weighted = !eval_weights.empty();
  auto average = [&](MetricValue MetricReport::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const MetricReport& r : out.folds) {
      if ((r.*field).value) {
        sum += *(r.*field).value;
        ++n;
      }
    }
    MetricValue mv;
    if (n > 0) mv.value = sum / static_cast<double>(n);
    return mv;
  };
  out.mean.accuracy = average(&MetricReport::accuracy);
  out.mean.precision = average(&MetricReport::precision);
  out.mean.recall = average(&MetricReport::recall);
  out.mean.auroc = average(&MetricReport::auroc);
  return out;
}

std::string_view to_string(CurveVariant variant) {
  switch (variant) {
    case CurveVariant::model: return "model";
    case CurveVariant::optimal: return "optimal";
    case CurveVariant::random: return "random";
  }
  return "unknown";
}

RecallCurves cumulative_recall_curves(std::span<const std::string> ids, std::span<const double> scores,
                                      std::span<const double> labels) {
  if (ids.size() != scores.size() || scores.size() != labels.size()) {
    throw DataError("curve inputs differ in length");
  }
  if (ids.empty()) throw DataError("curve of an empty set");
  const std::size_t n = ids.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  std::vector<int> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = positive_label(labels[i]) ? 1 : 0;
  const double total = std::accumulate(truth.begin(), truth.end(), 0.0);

  RecallCurves c;
  c.model.variant = CurveVariant::model;
  c.optimal.variant = CurveVariant::optimal;
  c.random.variant = CurveVariant::random;
  double found = 0.0;
  c.model.points.push_back({0.0, 0.0});
  for (std::size_t m = 0; m < n; ++m) {
    found += truth[order[m]];
    c.model.points.push_back({static_cast<double>(m + 1), found});
  }
  for (std::size_t m = 0; m <= n; ++m) {
    c.optimal.points.push_back({static_cast<double>(m), std::min(static_cast<double>(m), total)});
    c.random.points.push_back({static_cast<double>(m), total * static_cast<double>(m) / static_cast<double>(n)});
  }
  return c;
}

double inverse_probability_rate(std::span<const double> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) throw DataError("labels and probabilities differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(probs[i] > 0.0 && probs[i] <= 1.0)) throw DataError("inclusion probabilities must lie in (0,1]");
    num += labels[i] / probs[i];
    den += 1.0 / probs[i];
  }
  if (!(den > 0.0)) throw DataError("prevalence of an empty sample");
  return num / den;
}

namespace {

PrevalenceEstimate point_estimate(std::span<const double> labels, std::span<const double> probs,
                                  std::size_t n_total) {
  if (labels.empty()) throw DataError("prevalence needs labeled tickets");
  for (double y : labels) {
    if (!(y >= 0.0 && y <= 1.0)) throw DataError("label out of range [0,1]");
  }
  PrevalenceEstimate est;
  est.n_labeled = labels.size();
  est.n_total = n_total;
  est.naive_rate = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
  est.corrected_rate = inverse_probability_rate(labels, probs);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    num += probs[i] * labels[i];
    den += probs[i];
  }
  est.printed_form_rate = num / den;
  return est;
}

}  // namespace

PrevalenceEstimate estimate_prevalence(std::span<const double> labels, std::span<const double> inclusion_probs,
                                       std::size_t n_total, std::size_t replicates, std::uint64_t seed) {
  PrevalenceEstimate est = point_estimate(labels, inclusion_probs, n_total);
  IndexMetric metric = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    return inverse_probability_rate(gather(labels, idx), gather(inclusion_probs, idx));
  };
  const BootstrapResult b = bootstrap_ci(labels.size(), metric, replicates, seed);
  const Interval ci = widen(b.ci, est.corrected_rate);
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.replicates = b.replicates;
  est.undefined = b.undefined;
  return est;
}

PrevalenceEstimate estimate_prevalence_refit(const FeatureMatrix& all, std::span<const std::size_t> labeled_rows,
                                             std::span<const double> labels, const TrainConfig& config,
                                             std::size_t replicates, std::uint64_t seed) {
  if (labeled_rows.size() != labels.size()) throw DataError("labeled rows and labels differ in length");
  const std::size_t n = all.rows();
  std::vector<bool> included(n, false);
  std::vector<double> label_of(n, 0.0);
  for (std::size_t i = 0; i < labeled_rows.size(); ++i) {
    if (labeled_rows[i] >= n) throw DataError("labeled row out of range");
    included[labeled_rows[i]] = true;
    label_of[labeled_rows[i]] = labels[i];
  }
  const SamplingWeights sw = estimate_sampling_weights(all, included, config);
  std::vector<double> probs, ordered_labels;
  for (std::size_t k = 0; k < sw.included.size(); ++k) {
    probs.push_back(1.0 / sw.w1[k]);
    ordered_labels.push_back(label_of[sw.included[k]]);
  }
  PrevalenceEstimate est = point_estimate(ordered_labels, probs, n);
  est.refit = true;

  IndexMetric metric = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    const FeatureMatrix sample = all.subset(idx);
    std::vector<bool> inc(idx.size());
    std::size_t n_in = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) n_in += (inc[i] = included[idx[i]]) ? 1 : 0;
    if (n_in == 0 || n_in == idx.size()) return std::nullopt;
    const SamplingWeights rep = estimate_sampling_weights(sample, inc, config);
    std::vector<double> y, p;
    for (std::size_t k = 0; k < rep.included.size(); ++k) {
      y.push_back(label_of[idx[rep.included[k]]]);
      p.push_back(1.0 / rep.w1[k]);
    }
    return inverse_probability_rate(y, p);
  };
  const BootstrapResult b =
      bootstrap_ci(n, metric, replicates, seed, std::max(1u, std::thread::hardware_concurrency()));
  const Interval ci = widen(b.ci, est.corrected_rate);
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.replicates = b.replicates;
  est.undefined = b.undefined;
  return est;
}

}  // namespace tdd

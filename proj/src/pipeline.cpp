#include "tdd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include <json.hpp>

#include "tdd/errors.hpp"
#include "tdd/rng.hpp"

namespace tdd {

using json = nlohmann::ordered_json;

namespace {

enum SeedStream : std::uint64_t {
  kCbowStream = 1,
  kDocVecStream,
  kGbmStream,
  kSamplingStream,
  kSplitStream,
  kCvStream,
  kBootstrapStream,
  kDeltaStream,
  kPrevalenceStream,
};

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(std::string(name) + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(name) + ": " + e.what());
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metric_value_json(const MetricValue& mv) {
  json j{{"value", optional_json(mv.value)}};
  j["ci"] = mv.ci ? json::array({mv.ci->lo, mv.ci->hi}) : json(nullptr);
  return j;
}

json metric_report_to_json(const MetricReport& r) {
  return json{{"weighted", r.weighted},
              {"threshold", r.threshold},
              {"accuracy", metric_value_json(r.accuracy)},
              {"precision", metric_value_json(r.precision)},
              {"recall", metric_value_json(r.recall)},
              {"auroc", metric_value_json(r.auroc)}};
}

json prevalence_to_json(const PrevalenceEstimate& p) {
  return json{{"naive_rate", p.naive_rate},
              {"corrected_rate", p.corrected_rate},
              {"printed_form_rate", p.printed_form_rate},
              {"ci", json::array({p.ci_lo, p.ci_hi})},
              {"n_labeled", p.n_labeled},
              {"n_total", p.n_total},
              {"replicates", p.replicates},
              {"undefined_replicates", p.undefined},
              {"refit_per_replicate", p.refit}};
}

using MetricFn =
    std::function<std::optional<double>(std::span<const double>, std::span<const double>, std::span<const double>)>;

const std::vector<std::pair<std::string, MetricFn>>& metric_fns() {
  static const std::vector<std::pair<std::string, MetricFn>> fns = {
      {"accuracy", [](auto s, auto y, auto w) { return weighted_accuracy(s, y, w); }},
      {"precision", [](auto s, auto y, auto w) { return weighted_precision(s, y, w); }},
      {"recall", [](auto s, auto y, auto w) { return weighted_recall(s, y, w); }},
      {"auroc", [](auto s, auto y, auto w) { return try_weighted_auroc(s, y, w); }},
  };
  return fns;
}

}  // namespace

// ---------------------------------------------------------------------------
// Baselines

double baseline_no_td(const Ticket&) { return 0.0; }

bool baseline_keyphrase(std::string_view text, std::size_t k) {
  if (k < 1 || k > kKeyPhrases.size()) throw UsageError("keyphrase k must be in 1..25");
  const auto flags = keyphrase_features(text);
  for (std::size_t i = 0; i < k; ++i) {
    if (flags[i] > 0.0) return true;
  }
  return false;
}

std::vector<double> keyphrase_scores(std::span<const std::string> texts, std::size_t k) {
  std::vector<double> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(baseline_keyphrase(t, k) ? 1.0 : 0.0);
  return out;
}

KeyphraseTuning tune_keyphrase_k(std::span<const std::string> texts, std::span<const double> labels,
                                 std::span<const double> weights, double target_ratio) {
  if (texts.size() != labels.size()) throw DataError("texts and labels differ in length");
  KeyphraseTuning t;
  t.target_ratio = target_ratio;
  // One pass over the texts: the first matching phrase index decides every k.
  std::vector<std::size_t> first_match(texts.size(), kKeyPhrases.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto flags = keyphrase_features(texts[i]);
    for (std::size_t p = 0; p < flags.size(); ++p) {
      if (flags[p] > 0.0) {
        first_match[i] = p;
        break;
      }
    }
  }
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  std::vector<double> scores(texts.size());
  for (std::size_t k = 1; k <= kKeyPhrases.size(); ++k) {
    for (std::size_t i = 0; i < texts.size(); ++i) scores[i] = first_match[i] < k ? 1.0 : 0.0;
    const auto p = weighted_precision(scores, labels, weights);
    const auto r = weighted_recall(scores, labels, weights);
    t.precision.push_back(p);
    t.recall.push_back(r);
    std::optional<double> ratio;
    if (p && r && *r > 0.0) ratio = *p / *r;
    t.ratio.push_back(ratio);
    if (!ratio) continue;
    const double dist = std::abs(*ratio - target_ratio);
    if (!best || dist < best_dist) {
      best = k;
      best_dist = dist;
    }
  }
  if (!best) throw DataError("no key-phrase prefix yields a defined precision/recall ratio");
  t.k = *best;
  return t;
}

// ---------------------------------------------------------------------------
// Active learning

std::vector<std::string> sample_next_batch(std::span<const std::string> ids, std::span<const double> probs,
                                           std::size_t n, double floor, std::uint64_t seed) {
  if (ids.empty()) throw DataError("cannot sample from an empty pool");
  if (ids.size() != probs.size()) throw DataError("ids and probabilities differ in length");
  if (!(floor > 0.0)) throw UsageError("sampling floor must be positive");
  if (n > ids.size()) throw UsageError("batch larger than the unlabeled pool");
  Rng rng(seed);
  // log(u^(1/w)) = log(u)/w orders the same as the key itself.
  std::vector<std::pair<double, std::size_t>> keys(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double w = std::max(probs[i], floor);
    keys[i] = {std::log(rng.uniform_open()) / w, i};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ids[keys[i].second]);
  return out;
}

Curve label_progress_curve(std::vector<LabelRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const LabelRecord& a, const LabelRecord& b) { return a.labeled_at < b.labeled_at; });
  Curve c;
  c.variant = CurveVariant::model;
  double sum = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sum += records[i].label;
    c.points.push_back({static_cast<double>(i + 1), sum});
  }
  return c;
}

double simulated_rater_label(const std::string& ticket_id, int truth, std::uint64_t seed) {
  static constexpr double kTdLevels[] = {1.0, 0.9, 0.8, 0.7, 0.6};
  static constexpr double kTdMass[] = {0.4, 0.25, 0.15, 0.1, 0.1};
  static constexpr double kPlainLevels[] = {0.0, 0.1, 0.2, 0.3, 0.4};
  static constexpr double kPlainMass[] = {0.5, 0.2, 0.15, 0.1, 0.05};
  Rng rng(mix_seed(seed, stable_hash(ticket_id)));
  if (rng.bernoulli(0.03)) return 0.5;
  bool td = truth != 0;
  if (rng.bernoulli(0.05)) td = !td;
  const double* levels = td ? kTdLevels : kPlainLevels;
  const double* mass = td ? kTdMass : kPlainMass;
  double u = rng.uniform();
  for (int i = 0; i < 4; ++i) {
    if (u < mass[i]) return levels[i];
    u -= mass[i];
  }
  return levels[4];
}

std::vector<LabelRecord> simulate_active_learning(const FeatureMatrix& features, const std::map<std::string, int>& truth,
                                                  const ActiveLearningConfig& config) {
  const std::size_t n = features.rows();
  if (config.n_labels > n) throw UsageError("more labels requested than tickets");
  if (config.first_batch == 0 || config.batch_size == 0) throw UsageError("batch sizes must be positive");
  std::vector<bool> labeled(n, false);
  std::vector<double> label_of(n, 0.0);
  std::vector<LabelRecord> records;

  auto label_batch = [&](const std::vector<std::string>& batch) {
    for (const std::string& id : batch) {
      const std::size_t row = *features.row_of(id);
      auto it = truth.find(id);
      if (it == truth.end()) throw DataError("no ground truth for ticket " + id);
      LabelRecord rec;
      rec.ticket_id = id;
      rec.label = simulated_rater_label(id, it->second, config.seed);
      rec.rater = config.rater;
      rec.labeled_at = Timestamp{config.start.seconds + 60 * static_cast<std::int64_t>(records.size())};
      labeled[row] = true;
      label_of[row] = rec.label;
      records.push_back(std::move(rec));
    }
  };

  {
    const std::vector<double> ones(n, 1.0);
    label_batch(sample_next_batch(features.ids, ones, std::min(config.first_batch, config.n_labels), config.floor,
                                  mix_seed(config.seed, 0)));
  }
  for (std::uint64_t round = 1; records.size() < config.n_labels; ++round) {
    std::vector<std::size_t> train_rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      if (labeled[i]) {
        train_rows.push_back(i);
        y.push_back(label_of[i]);
      }
    }
    const GbmModel model = train_gbm(features.subset(train_rows), y, config.gbm);
    std::vector<std::string> pool;
    std::vector<double> probs;
    for (std::size_t i = 0; i < n; ++i) {
      if (labeled[i]) continue;
      pool.push_back(features.ids[i]);
      probs.push_back(model.predict_proba(features.row(i)));
    }
    const std::size_t take = std::min(config.batch_size, config.n_labels - records.size());
    label_batch(sample_next_batch(pool, probs, take, config.floor, mix_seed(config.seed, round)));
  }
  return records;
}

// ---------------------------------------------------------------------------
// End-to-end

EmbeddingArtifacts train_embeddings(const Corpus& corpus, const CbowConfig& cbow, const DocVecConfig& docvec) {
  EmbeddingArtifacts a;
  for (const auto& [id, ticket] : corpus.tickets()) {
    a.ids.push_back(id);
    a.tokens.push_back(tokenize_clean(free_text(ticket)));
  }
  CbowResult w = train_cbow(a.tokens, cbow);
  a.word = std::move(w.embedding);
  a.cbow_loss = std::move(w.epoch_loss);
  a.doc = train_docvecs(a.ids, a.tokens, docvec);
  return a;
}

FeatureMatrix build_feature_matrix(const Corpus& corpus, const WordEmbedding& pretrained,
                                   const EmbeddingArtifacts& embeddings) {
  FeatureContext ctx;
  ctx.pretrained = &pretrained;
  ctx.word_embedding = &embeddings.word;
  ctx.doc_embedding = &embeddings.doc;
  return featurize_corpus(corpus, ctx);
}

FeatureMatrix append_ngram_columns(const FeatureMatrix& base, std::span<const TokenList> tokens,
                                   std::span<const std::string> grams) {
  if (tokens.size() != base.rows()) throw DataError("token lists do not match the feature matrix");
  FeatureMatrix out;
  out.registry = base.registry.with_ngrams(grams);
  out.ids = base.ids;
  out.docvec_sources = base.docvec_sources;
  out.values.reserve(base.rows() * out.registry.size());
  for (std::size_t r = 0; r < base.rows(); ++r) {
    const auto row = base.row(r);
    out.values.insert(out.values.end(), row.begin(), row.end());
    const auto present = enumerate_ngrams(tokens[r], 3);
    for (const auto& g : grams) out.values.push_back(std::binary_search(present.begin(), present.end(), g) ? 1.0 : 0.0);
  }
  return out;
}

PipelineConfig with_derived_seeds(PipelineConfig config) {
  config.cbow.seed = mix_seed(config.seed, kCbowStream);
  config.docvec.seed = mix_seed(config.seed, kDocVecStream);
  config.gbm.seed = mix_seed(config.seed, kGbmStream);
  config.sampling_gbm.seed = mix_seed(config.seed, kSamplingStream);
  return config;
}

RunResult run_end_to_end(const Corpus& corpus, const WordEmbedding& pretrained, const PipelineConfig& config_in,
                         const EmbeddingArtifacts* embeddings) {
  const PipelineConfig config = with_derived_seeds(config_in);
  stage("config", [&] { config.validate(); });

  EmbeddingArtifacts local;
  if (!embeddings) {
    local = stage("embeddings", [&] { return train_embeddings(corpus, config.cbow, config.docvec); });
    embeddings = &local;
  }
  FeatureMatrix features = stage("features", [&] { return build_feature_matrix(corpus, pretrained, *embeddings); });
  if (features.ids != embeddings->ids) throw std::logic_error("embedding and feature row order differ");

  // Holdout = the most recently labeled tickets.
  const auto aggregated = corpus.aggregated_labels();
  std::vector<LabelRecord> by_time;
  for (const auto& [id, rec] : aggregated) by_time.push_back(rec);
  if (by_time.size() < 4) throw DataError("split: need at least four labeled tickets");
  std::stable_sort(by_time.begin(), by_time.end(), [](const LabelRecord& a, const LabelRecord& b) {
    return a.labeled_at != b.labeled_at ? a.labeled_at < b.labeled_at : a.ticket_id < b.ticket_id;
  });
  const bool same_time = by_time.front().labeled_at == by_time.back().labeled_at;
  if (same_time) {
    Rng rng(mix_seed(config.seed, kSplitStream));
    for (std::size_t i = by_time.size(); i > 1; --i) {
      std::swap(by_time[i - 1], by_time[static_cast<std::size_t>(rng.below(i))]);
    }
  }
  const auto n_hold = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(config.holdout_fraction * static_cast<double>(by_time.size())), 1,
                            static_cast<long long>(by_time.size()) - 1));
  std::set<std::string> holdout_set;
  for (std::size_t i = by_time.size() - n_hold; i < by_time.size(); ++i) holdout_set.insert(by_time[i].ticket_id);

  RunResult r;
  std::vector<std::size_t> train_rows, holdout_rows, labeled_rows;
  std::vector<double> y_train, y_hold, y_labeled;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto it = aggregated.find(features.ids[i]);
    if (it == aggregated.end()) continue;
    labeled_rows.push_back(i);
    y_labeled.push_back(it->second.label);
    if (holdout_set.contains(features.ids[i])) {
      holdout_rows.push_back(i);
      y_hold.push_back(it->second.label);
      r.holdout_ids.push_back(features.ids[i]);
    } else {
      train_rows.push_back(i);
      y_train.push_back(it->second.label);
      r.train_ids.push_back(features.ids[i]);
    }
  }
  r.holdout_labels = y_hold;

  if (config.ngrams) {
    features = stage("ngrams", [&] {
      std::vector<TokenList> train_tokens;
      for (std::size_t row : train_rows) train_tokens.push_back(embeddings->tokens[row]);
      const auto grams = select_ngrams(train_tokens, 3, 3);
      return append_ngram_columns(features, embeddings->tokens, grams);
    });
  }

  const FeatureMatrix train_x = features.subset(train_rows);
  r.model = stage("train", [&] { return train_gbm(train_x, y_train, config.gbm); });
  r.all_scores = r.model.predict_proba(features);

  std::vector<double> w2_train;
  for (double y : y_train) w2_train.push_back(label_uncertainty_weight(y));
  r.cv = stage("cross-validation", [&] {
    return cross_validate(train_x, y_train, w2_train, config.gbm, config.cv_folds,
                          mix_seed(config.seed, kCvStream));
  });

  auto texts_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::string> out;
    for (std::size_t row : rows) out.push_back(free_text(*corpus.find(features.ids[row])));
    return out;
  };
  const auto train_texts = texts_of(train_rows);
  const auto hold_texts = texts_of(holdout_rows);

  stage("keyphrase-tuning", [&] {
    const auto p = weighted_precision(r.cv.out_of_fold, y_train, {});
    const auto rc = weighted_recall(r.cv.out_of_fold, y_train, {});
    if (!p || !rc || *rc <= 0.0) throw DataError("main model has no out-of-fold positives to match");
    r.main_ratio = *p / *rc;
    r.tuning = tune_keyphrase_k(train_texts, y_train, {}, r.main_ratio);
    if (config.keyphrase_k > 0) r.tuning.k = config.keyphrase_k;
  });

  stage("evaluation", [&] {
    std::vector<bool> in_holdout(features.rows(), false);
    for (std::size_t row : holdout_rows) in_holdout[row] = true;
    const SamplingWeights sw = estimate_sampling_weights(features, in_holdout, config.sampling_gbm);
    std::vector<double> w2;
    for (double y : y_hold) w2.push_back(label_uncertainty_weight(y));
    r.holdout_weights = combine_weights(sw.w1, w2);

    ReportOptions opts;
    opts.replicates = config.bootstrap_replicates;
    opts.seed = mix_seed(config.seed, kBootstrapStream);
    auto evaluate = [&](std::string name, std::vector<double> scores) {
      ModelEvaluation e;
      e.name = std::move(name);
      e.holdout_scores = std::move(scores);
      e.weighted = evaluate_metrics(e.holdout_scores, y_hold, r.holdout_weights.w, opts);
      e.unweighted = evaluate_metrics(e.holdout_scores, y_hold, {}, opts);
      return e;
    };
    std::vector<double> main_scores;
    for (std::size_t row : holdout_rows) main_scores.push_back(r.all_scores[row]);
    r.main = evaluate("main", main_scores);
    r.keyphrase = evaluate("keyphrase", keyphrase_scores(hold_texts, r.tuning.k));
    std::vector<double> zeros;
    for (std::size_t row : holdout_rows) zeros.push_back(baseline_no_td(*corpus.find(features.ids[row])));
    r.no_td = evaluate("no_td", zeros);

    for (const auto& [name, fn] : metric_fns()) {
      r.delta_vs_keyphrase[name] =
          paired_difference_ci(r.main.holdout_scores, r.keyphrase.holdout_scores, y_hold, r.holdout_weights.w, fn,
                               config.bootstrap_replicates, mix_seed(config.seed, kDeltaStream));
    }
    r.curves = cumulative_recall_curves(r.holdout_ids, r.main.holdout_scores, y_hold);
  });

  {
    std::vector<LabelRecord> recs;
    for (const auto& [id, rec] : aggregated) recs.push_back(rec);
    r.progress = label_progress_curve(std::move(recs));
  }

  r.prevalence = stage("prevalence", [&] {
    const std::uint64_t seed = mix_seed(config.seed, kPrevalenceStream);
    if (config.prevalence_refit) {
      return estimate_prevalence_refit(features, labeled_rows, y_labeled, config.sampling_gbm,
                                       config.prevalence_replicates, seed);
    }
    std::vector<bool> included(features.rows(), false);
    for (std::size_t row : labeled_rows) included[row] = true;
    const SamplingWeights sw = estimate_sampling_weights(features, included, config.sampling_gbm);
    std::vector<double> probs;
    for (double w : sw.w1) probs.push_back(1.0 / w);
    return estimate_prevalence(y_labeled, probs, features.rows(), config.prevalence_replicates, seed);
  });

  r.importance = feature_importance(r.model);
  r.features = std::move(features);
  return r;
}

// ---------------------------------------------------------------------------
// Artifacts

std::string metric_report_json(const MetricReport& report) { return metric_report_to_json(report).dump(2) + "\n"; }

std::string prevalence_json(const PrevalenceEstimate& estimate) { return prevalence_to_json(estimate).dump(2) + "\n"; }

void write_curves_csv(const RecallCurves& curves, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "variant,n_examined,n_td_found\n";
  for (const Curve* c : {&curves.model, &curves.optimal, &curves.random}) {
    for (const auto& p : c->points) out << to_string(c->variant) << ',' << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
  }
}

void write_run_artifacts(const RunResult& r, const PipelineConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_model(r.model, dir / "model.json");
  open_out(dir / "trees.txt") << dump_trees_text(r.model);

  std::map<std::string, double> family_share;
  std::vector<FeatureFamily> family_of(r.features.registry.size());
  for (std::size_t i = 0; i < r.features.registry.size(); ++i) family_of[i] = r.features.registry.features()[i].family;
  json importance = json::array();
  for (const auto& fi : r.importance) {
    const auto idx = r.features.registry.index_of(fi.name);
    const std::string family(idx ? to_string(family_of[*idx]) : "unknown");
    family_share[family] += fi.importance;
    importance.push_back(json{{"feature", fi.name}, {"family", family}, {"importance", fi.importance}});
  }

  std::map<std::string, std::size_t> sources;
  for (DocVecSource s : r.features.docvec_sources) ++sources[std::string(to_string(s))];

  json delta = json::object();
  for (const auto& [name, ci] : r.delta_vs_keyphrase) {
    delta[name] = ci ? json::array({ci->lo, ci->hi}) : json(nullptr);
  }
  json folds = json::array();
  for (const auto& f : r.cv.folds) folds.push_back(metric_report_to_json(f));
  json tuning = json::array();
  for (std::size_t k = 0; k < r.tuning.ratio.size(); ++k) {
    tuning.push_back(json{{"k", k + 1},
                          {"precision", optional_json(r.tuning.precision[k])},
                          {"recall", optional_json(r.tuning.recall[k])},
                          {"ratio", optional_json(r.tuning.ratio[k])}});
  }

  json report{
      {"registry_version", r.features.registry.version()},
      {"n_features", r.features.registry.size()},
      {"n_tickets", r.features.rows()},
      {"n_labeled", r.train_ids.size() + r.holdout_ids.size()},
      {"n_train", r.train_ids.size()},
      {"n_holdout", r.holdout_ids.size()},
      {"n_trees", r.model.trees.size()},
      {"docvec_sources", sources},
      {"holdout",
       json{{"main", json{{"weighted", metric_report_to_json(r.main.weighted)},
                          {"unweighted", metric_report_to_json(r.main.unweighted)}}},
            {"keyphrase", json{{"k", r.tuning.k},
                               {"weighted", metric_report_to_json(r.keyphrase.weighted)},
                               {"unweighted", metric_report_to_json(r.keyphrase.unweighted)}}},
            {"no_td", json{{"weighted", metric_report_to_json(r.no_td.weighted)},
                           {"unweighted", metric_report_to_json(r.no_td.unweighted)}}}}},
      {"delta_main_minus_keyphrase_weighted_ci", delta},
      {"cross_validation",
       json{{"k", r.cv.folds.size()}, {"mean", metric_report_to_json(r.cv.mean)}, {"folds", folds}}},
      {"keyphrase_tuning", json{{"target_ratio", r.main_ratio}, {"chosen_k", r.tuning.k}, {"scan", tuning}}},
      {"prevalence", prevalence_to_json(r.prevalence)},
      {"family_importance", family_share},
      {"importance", importance},
  };
  open_out(dir / "report.json") << report.dump(2) << '\n';

  {
    auto out = open_out(dir / "metrics.csv");
    out << "model,weighting,metric,value,ci_lo,ci_hi\n";
    auto na = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string("NA"); };
    for (const ModelEvaluation* e : {&r.main, &r.keyphrase, &r.no_td}) {
      for (const auto& [weighting, rep] : {std::pair{"weighted", &e->weighted}, std::pair{"unweighted", &e->unweighted}}) {
        const std::pair<const char*, const MetricValue*> rows[] = {
            {"accuracy", &rep->accuracy}, {"precision", &rep->precision}, {"recall", &rep->recall}, {"auroc", &rep->auroc}};
        for (const auto& [metric, mv] : rows) {
          out << e->name << ',' << weighting << ',' << metric << ',' << na(mv->value) << ','
              << (mv->ci ? fmt17(mv->ci->lo) : "NA") << ',' << (mv->ci ? fmt17(mv->ci->hi) : "NA") << '\n';
        }
      }
    }
  }
  write_curves_csv(r.curves, dir / "curves.csv");
  {
    auto out = open_out(dir / "progress.csv");
    out << "n_labeled,cumulative_label\n";
    for (const auto& p : r.progress.points) out << fmt17(p.x) << ',' << fmt17(p.y) << '\n';
  }
  {
    auto out = open_out(dir / "importance.csv");
    out << "rank,feature,family,importance\n";
    for (std::size_t i = 0; i < importance.size(); ++i) {
      out << i + 1 << ',' << importance[i]["feature"].get<std::string>() << ','
          << importance[i]["family"].get<std::string>() << ',' << fmt17(importance[i]["importance"].get<double>())
          << '\n';
    }
  }
  {
    std::set<std::string> train(r.train_ids.begin(), r.train_ids.end());
    std::set<std::string> hold(r.holdout_ids.begin(), r.holdout_ids.end());
    auto out = open_out(dir / "predictions.csv");
    out << "ticket_id,probability,split\n";
    for (std::size_t i = 0; i < r.features.rows(); ++i) {
      const auto& id = r.features.ids[i];
      out << id << ',' << fmt17(r.all_scores[i]) << ','
          << (train.contains(id) ? "train" : hold.contains(id) ? "holdout" : "unlabeled") << '\n';
    }
  }
  {
    auto out = open_out(dir / "keyphrase_tuning.csv");
    out << "k,precision,recall,ratio\n";
    auto na = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string("NA"); };
    for (std::size_t k = 0; k < r.tuning.ratio.size(); ++k) {
      out << k + 1 << ',' << na(r.tuning.precision[k]) << ',' << na(r.tuning.recall[k]) << ',' << na(r.tuning.ratio[k])
          << '\n';
    }
  }
  {
    PipelineConfig recorded = with_derived_seeds(config);
    recorded.out_dir.clear();
    open_out(dir / "run_config.txt") << config_to_text(recorded);
  }
  if (config.write_features) write_feature_csv(r.features, dir / "features.csv");
}

// ---------------------------------------------------------------------------
// Inputs

std::unordered_set<std::string> corpus_words(const Corpus& corpus) {
  std::unordered_set<std::string> words;
  for (const auto& [id, ticket] : corpus.tickets()) {
    for (auto& w : tokenize_words(free_text(ticket))) words.insert(std::move(w));
  }
  for (auto t : kConceptTargets) words.insert(std::string(t));
  return words;
}

LoadedInputs load_inputs(const PipelineConfig& config) {
  if (config.corpus.empty()) throw UsageError("no corpus path configured");
  if (config.pretrained.empty()) throw UsageError("no pretrained embedding path configured");
  LoadedInputs in;
  IngestResult ing = ingest_jsonl(config.corpus);
  in.corpus = std::move(ing.corpus);
  in.skipped_lines = ing.skipped;
  if (!config.labels.empty()) {
    if (!std::filesystem::exists(config.labels)) throw DataError("label journal not found: " + config.labels.string());
    LabelJournal journal(config.labels);
    journal.replay_into(in.corpus);
  }
  const auto words = corpus_words(in.corpus);
  in.pretrained = load_pretrained(config.pretrained, config.pretrained_dim, &words);
  require_concept_targets(in.pretrained);
  return in;
}

}  // namespace tdd

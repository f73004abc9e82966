#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tdd/config.hpp"
#include "tdd/corpus.hpp"
#include "tdd/embeddings.hpp"
#include "tdd/evaluation.hpp"
#include "tdd/features.hpp"
#include "tdd/gbm.hpp"

namespace tdd {

// ---------------------------------------------------------------------------
// Baselines

/// Predicts "no TD" for everything.
double baseline_no_td(const Ticket& ticket);

/// 1 when any of the first k key phrases occurs in `text`. k in 1..25.
bool baseline_keyphrase(std::string_view text, std::size_t k);

std::vector<double> keyphrase_scores(std::span<const std::string> texts, std::size_t k);

struct KeyphraseTuning {
  std::size_t k = 12;
  double target_ratio = 0.0;
  std::vector<std::optional<double>> precision;  // index k-1
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> ratio;
};

/// Scans k = 1..25 and returns the k whose precision/recall ratio on
/// (texts, labels) is nearest `target_ratio`; ties go to the smaller k.
/// Throws DataError when no k has a defined ratio.
KeyphraseTuning tune_keyphrase_k(std::span<const std::string> texts, std::span<const double> labels,
                                 std::span<const double> weights, double target_ratio);

// ---------------------------------------------------------------------------
// Active learning

/// Weighted sampling without replacement (exponential keys) with weight
/// max(p, floor). Returns `n` ids in key order.
std::vector<std::string> sample_next_batch(std::span<const std::string> ids, std::span<const double> probs,
                                           std::size_t n, double floor, std::uint64_t seed);

/// (i, running sum of labels) in labeled_at order (stable for ties).
Curve label_progress_curve(std::vector<LabelRecord> records);

/// Soft label a careful rater would give a ticket of known class, with a
/// little disagreement noise. Deterministic in (seed, ticket id).
double simulated_rater_label(const std::string& ticket_id, int truth, std::uint64_t seed);

struct ActiveLearningConfig {
  std::size_t n_labels = 300;
  std::size_t first_batch = 100;  // drawn uniformly
  std::size_t batch_size = 50;
  double floor = 0.05;
  std::uint64_t seed = 1;
  TrainConfig gbm;
  std::string rater = "simulated-rater";
  Timestamp start{1483228800};  // 2017-01-01T00:00:00Z
};

/// Runs the labeling loop against the simulated rater: a uniform first
/// batch, then model-weighted batches, retraining after each batch.
std::vector<LabelRecord> simulate_active_learning(const FeatureMatrix& features, const std::map<std::string, int>& truth,
                                                  const ActiveLearningConfig& config);

// ---------------------------------------------------------------------------
// End-to-end

/// Token streams and embeddings for a corpus (rows in id order).
struct EmbeddingArtifacts {
  std::vector<std::string> ids;
  std::vector<TokenList> tokens;
  WordEmbedding word;
  DocEmbedding doc;
  std::vector<double> cbow_loss;
};

EmbeddingArtifacts train_embeddings(const Corpus& corpus, const CbowConfig& cbow, const DocVecConfig& docvec);

/// Default-registry features for every ticket.
FeatureMatrix build_feature_matrix(const Corpus& corpus, const WordEmbedding& pretrained,
                                   const EmbeddingArtifacts& embeddings);

/// Appends NGRAM_ columns for `grams` (tokens aligned with matrix rows).
FeatureMatrix append_ngram_columns(const FeatureMatrix& base, std::span<const TokenList> tokens,
                                   std::span<const std::string> grams);

/// Seeds of every stage derived from the global seed.
PipelineConfig with_derived_seeds(PipelineConfig config);

struct ModelEvaluation {
  std::string name;
  std::vector<double> holdout_scores;
  MetricReport weighted;
  MetricReport unweighted;
};

struct RunResult {
  GbmModel model;
  FeatureMatrix features;  // full corpus, final registry
  std::vector<std::string> train_ids;
  std::vector<std::string> holdout_ids;
  std::vector<double> holdout_labels;
  EvalWeights holdout_weights;
  CvResult cv;
  double main_ratio = 0.0;
  KeyphraseTuning tuning;
  ModelEvaluation main;
  ModelEvaluation keyphrase;
  ModelEvaluation no_td;
  std::map<std::string, std::optional<Interval>> delta_vs_keyphrase;  // weighted, main - keyphrase
  RecallCurves curves;
  Curve progress;
  PrevalenceEstimate prevalence;
  std::vector<FeatureImportance> importance;
  std::vector<double> all_scores;  // main model on every ticket
};

/// Features -> holdout split -> main model -> CV and k tuning -> holdout
/// metrics with bootstrap intervals -> curves -> prevalence -> importance.
/// `embeddings` may be supplied to skip retraining them. Errors are
/// rethrown prefixed with the stage name.
RunResult run_end_to_end(const Corpus& corpus, const WordEmbedding& pretrained, const PipelineConfig& config,
                         const EmbeddingArtifacts* embeddings = nullptr);

/// Writes model.json, trees.txt, report.json, metrics.csv, curves.csv,
/// progress.csv, importance.csv, predictions.csv, keyphrase_tuning.csv,
/// run_config.txt and (optionally) features.csv into `dir`.
void write_run_artifacts(const RunResult& result, const PipelineConfig& config, const std::filesystem::path& dir);

std::string metric_report_json(const MetricReport& report);
std::string prevalence_json(const PrevalenceEstimate& estimate);

void write_curves_csv(const RecallCurves& curves, const std::filesystem::path& path);

/// Loads the corpus, replays the label journal (when configured) and loads
/// the pretrained embedding restricted to corpus words plus concept targets.
struct LoadedInputs {
  Corpus corpus;
  WordEmbedding pretrained;
  std::size_t skipped_lines = 0;
};
LoadedInputs load_inputs(const PipelineConfig& config);

/// Restriction set for load_pretrained: every unstemmed corpus word plus the
/// concept targets.
std::unordered_set<std::string> corpus_words(const Corpus& corpus);

}  // namespace tdd

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tdd/embeddings.hpp"
#include "tdd/gbm.hpp"

namespace tdd {

struct PipelineConfig {
  std::filesystem::path corpus;      // ticket JSONL
  std::filesystem::path labels;      // label journal JSONL
  std::filesystem::path pretrained;  // GloVe-style text embedding
  std::filesystem::path out_dir = "out";
  std::size_t pretrained_dim = 100;

  std::uint64_t seed = 42;
  bool ngrams = false;
  double holdout_fraction = 588.0 / 1934.0;
  std::size_t keyphrase_k = 0;  // 0 = tune against the main model

  TrainConfig gbm;
  TrainConfig sampling_gbm;  // inclusion-probability regression
  CbowConfig cbow;
  DocVecConfig docvec;

  double al_floor = 0.05;
  std::size_t al_batch_size = 50;

  std::size_t bootstrap_replicates = 500;
  std::size_t cv_folds = 10;
  bool prevalence_refit = false;  // refit the inclusion model per replicate
  std::size_t prevalence_replicates = 500;
  bool write_features = true;

  /// Throws UsageError when a value is out of range.
  void validate() const;
};

/// Sets one key (dotted "section.key" form) from its text value. Relative
/// paths are resolved against `base_dir` when it is non-empty. Throws
/// UsageError for unknown keys or malformed values.
void apply_config_entry(PipelineConfig& config, std::string_view key, std::string_view value,
                        const std::filesystem::path& base_dir = {});

/// INI-style text: "key = value" lines, "[section]" headers prefixing the
/// following keys, '#' or ';' comments. Unset keys keep their defaults.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {},
                            const std::filesystem::path& base_dir = {});

/// parse_config on a file; relative paths resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

/// Every key with its current value, in the parse_config format.
std::string config_to_text(const PipelineConfig& config);

}  // namespace tdd

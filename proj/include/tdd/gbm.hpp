#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdd/features.hpp"

namespace tdd {

struct TrainConfig {
  std::size_t num_trees = 60;
  std::size_t max_leaves = 9;
  std::size_t min_data_in_leaf = 10;
  double learning_rate = 0.04;
  double l2_reg = 0.0;
  double min_split_gain = 0.0;
  std::uint64_t seed = 0;

  /// Throws UsageError when a field is out of range.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

inline constexpr double kHessianFloor = 1e-12;

double sigmoid(double x);
double logit(double p);

/// Soft-label cross entropy -[y log s(F) + (1-y) log(1-s(F))] and its first
/// two derivatives with respect to the raw score F.
double xentropy_loss(double raw, double label);
double xentropy_gradient(double raw, double label);
double xentropy_hessian(double raw, double label);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (raw score units)
  double gain = 0.0;   // split gain for internal nodes
  std::size_t count = 0;  // training rows reaching the node

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary tree stored as a node array; node 0 is the root. A row goes left
/// when its value is <= threshold.
struct Tree {
  std::vector<TreeNode> nodes;

  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
  std::size_t num_leaves() const;

  bool operator==(const Tree&) const = default;
};

/// Read-only row-major matrix.
struct DataView {
  const double* values = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct SplitCandidate {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;

  bool operator==(const SplitCandidate&) const = default;
};

/// Second-order split gain 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)].
double split_gain(double gl, double hl, double gr, double hr, double l2_reg);

/// Exact best split of the node holding `rows`. Thresholds are midpoints
/// between consecutive distinct values; both children need at least
/// min_data_in_leaf rows; ties go to the lower feature, then the lower
/// threshold. Returns nothing when no split beats min_split_gain.
std::optional<SplitCandidate> best_split(const DataView& x, std::span<const std::size_t> rows,
                                         std::span<const double> gradients, std::span<const double> hessians,
                                         const TrainConfig& config);

class GbmModel {
 public:
  static constexpr int kFormatVersion = 1;

  double base_score = 0.0;
  std::vector<Tree> trees;
  TrainConfig config;
  std::vector<std::string> feature_names;
  std::string registry_version;

  double predict_raw(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const { return sigmoid(predict_raw(x)); }

  /// Scores every row; throws DataError when the matrix registry differs
  /// from the one the model was trained on.
  std::vector<double> predict_proba(const FeatureMatrix& matrix) const;

  void check_registry(const FeatureRegistry& registry) const;

  bool operator==(const GbmModel&) const = default;
};

/// Boosted trees on the xentropy objective. `labels` are soft targets in
/// [0,1]; optional `weights` multiply gradients and hessians. Boosting
/// stops early when a round finds no admissible split.
GbmModel train_gbm(const DataView& x, std::span<const double> labels, const TrainConfig& config,
                   std::span<const double> weights = {});

/// Same, carrying the registry names and version into the model.
GbmModel train_gbm(const FeatureMatrix& matrix, std::span<const double> labels, const TrainConfig& config,
                   std::span<const double> weights = {});

struct FeatureImportance {
  std::string name;
  double importance;  // share of total split gain
};

/// Normalized total split gain per feature, largest first (ties by name).
/// Empty when the model has no splits.
std::vector<FeatureImportance> feature_importance(const GbmModel& model);

std::string model_to_json(const GbmModel& model);
GbmModel model_from_json(std::string_view text);
void save_model(const GbmModel& model, const std::filesystem::path& path);
GbmModel load_model(const std::filesystem::path& path);

/// Indented per-tree rendering with feature names, thresholds and leaf values.
std::string dump_trees_text(const GbmModel& model);

}  // namespace tdd

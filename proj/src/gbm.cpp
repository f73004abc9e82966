#include "tdd/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "tdd/errors.hpp"

namespace tdd {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (max_leaves < 2) throw UsageError("max_leaves must be at least 2");
  if (min_data_in_leaf < 1) throw UsageError("min_data_in_leaf must be at least 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw UsageError("learning_rate must be in (0, 1]");
  if (!(l2_reg >= 0.0)) throw UsageError("l2_reg must be non-negative");
  if (!std::isfinite(min_split_gain)) throw UsageError("min_split_gain must be finite");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double xentropy_loss(double raw, double label) {
  // log(1 + e^F) - y F, written to avoid overflow for large |F|.
  const double softplus = raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return softplus - label * raw;
}

double xentropy_gradient(double raw, double label) { return sigmoid(raw) - label; }

double xentropy_hessian(double raw, double label) {
  (void)label;
  const double p = sigmoid(raw);
  return p * (1.0 - p);
}

std::size_t Tree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

std::size_t Tree::num_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double split_gain(double gl, double hl, double gr, double hr, double l2_reg) {
  auto term = [&](double g, double h) { return g * g / std::max(h + l2_reg, kHessianFloor); };
  return 0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr));
}

namespace {

using RowList = std::vector<std::uint32_t>;

// Features with at most this many distinct values are searched through a
// per-node histogram over their distinct values instead of a sorted list.
constexpr std::size_t kMaxHistogramBins = 64;

/// Column-major copy of the training matrix plus, per feature, its sorted
/// distinct values and each row's rank among them.
struct Columns {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;         // cols x rows
  std::vector<std::uint32_t> codes;   // cols x rows, rank of the value
  std::vector<std::vector<double>> distinct;

  const double* column(std::size_t f) const { return values.data() + f * rows; }
  const std::uint32_t* code_column(std::size_t f) const { return codes.data() + f * rows; }
  bool histogram(std::size_t f) const { return distinct[f].size() <= kMaxHistogramBins; }
};

Columns to_columns(const DataView& x, std::span<const std::uint32_t> rows) {
  Columns c;
  c.rows = x.rows;
  c.cols = x.cols;
  c.values.resize(x.rows * x.cols);
  c.codes.assign(x.rows * x.cols, 0);
  c.distinct.resize(x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t f = 0; f < x.cols; ++f) c.values[f * x.rows + r] = x.at(r, f);
  }
  std::vector<double> vals;
  for (std::size_t f = 0; f < x.cols; ++f) {
    const double* v = c.column(f);
    vals.clear();
    for (std::uint32_t r : rows) vals.push_back(v[r]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::uint32_t* code = c.codes.data() + f * x.rows;
    for (std::uint32_t r : rows) {
      code[r] = static_cast<std::uint32_t>(std::lower_bound(vals.begin(), vals.end(), v[r]) - vals.begin());
    }
    c.distinct[f] = vals;
  }
  return c;
}

/// Rows of `rows` sorted by feature value (stable in row index) for every
/// feature searched through sorted lists; histogram features stay empty.
std::vector<RowList> sort_by_feature(const Columns& cols, const RowList& rows) {
  std::vector<RowList> out(cols.cols);
  for (std::size_t f = 0; f < cols.cols; ++f) {
    if (cols.histogram(f)) continue;
    out[f] = rows;
    const std::uint32_t* code = cols.code_column(f);
    std::stable_sort(out[f].begin(), out[f].end(), [code](std::uint32_t a, std::uint32_t b) { return code[a] < code[b]; });
  }
  return out;
}

double midpoint_threshold(double a, double b) {
  const double t = std::midpoint(a, b);
  return t < b ? t : a;
}

/// Ranks candidates by the cheap score gl^2/hl + gr^2/hr (one division) and
/// keeps every candidate whose score is within rounding of the best. The
/// survivors are settled by exact_gain, so mathematically tied partitions
/// compare equal and go to the lower feature, then the lower threshold.
class SplitTracker {
 public:
  SplitTracker(double total_g, double total_h, const TrainConfig& config)
      : total_g_(total_g), total_h_(total_h), config_(config) {}

  void offer(std::size_t feature, double gl, double hl, double a, double b) {
    const double gr = total_g_ - gl;
    const double hr = total_h_ - hl;
    const double dl = std::max(hl + config_.l2_reg, kHessianFloor);
    const double dr = std::max(hr + config_.l2_reg, kHessianFloor);
    const double score = (gl * gl * dr + gr * gr * dl) / (dl * dr);
    if (near_.empty() || score > best_score_ + slack(best_score_)) {
      near_.clear();
      best_score_ = score;
    } else if (score < best_score_ - slack(best_score_)) {
      return;
    } else {
      best_score_ = std::max(best_score_, score);
    }
    near_.push_back({feature, midpoint_threshold(a, b), score});
  }

  template <typename ExactGain>
  std::optional<SplitCandidate> settle(ExactGain&& exact_gain) const {
    std::optional<SplitCandidate> best;
    for (const Near& c : near_) {
      if (c.score < best_score_ - slack(best_score_)) continue;
      const double gain = exact_gain(c.feature, c.threshold);
      if (!(gain > config_.min_split_gain)) continue;
      const bool better = !best || gain > best->gain ||
                          (gain == best->gain && std::tie(c.feature, c.threshold) < std::tie(best->feature, best->threshold));
      if (better) best = SplitCandidate{c.feature, c.threshold, gain};
    }
    return best;
  }

 private:
  struct Near {
    std::size_t feature;
    double threshold;
    double score;
  };

  static double slack(double score) { return 1e-9 * std::max(std::abs(score), 1e-300); }

  double total_g_;
  double total_h_;
  const TrainConfig& config_;
  std::vector<Near> near_;
  double best_score_ = 0.0;
};

struct Histogram {
  std::vector<std::uint32_t> count;
  std::vector<double> g;
  std::vector<double> h;
};

std::optional<SplitCandidate> search(const Columns& cols, const RowList& rows, const std::vector<RowList>& sorted,
                                     std::span<const double> g, std::span<const double> h, double total_g,
                                     double total_h, const TrainConfig& config) {
  const std::size_t n = rows.size();
  const std::size_t min_leaf = config.min_data_in_leaf;
  if (n < 2 * min_leaf) return std::nullopt;

  SplitTracker tracker(total_g, total_h, config);
  Histogram hist;
  for (std::size_t f = 0; f < cols.cols; ++f) {
    if (cols.histogram(f)) {
      const std::vector<double>& values = cols.distinct[f];
      const std::size_t bins = values.size();
      if (bins < 2) continue;
      hist.count.assign(bins, 0);
      hist.g.assign(bins, 0.0);
      hist.h.assign(bins, 0.0);
      const std::uint32_t* code = cols.code_column(f);
      for (std::uint32_t r : rows) {
        const std::uint32_t b = code[r];
        ++hist.count[b];
        hist.g[b] += g[r];
        hist.h[b] += h[r];
      }
      std::size_t n_left = 0;
      double gl = 0.0, hl = 0.0;
      std::size_t prev = bins;
      for (std::size_t b = 0; b < bins; ++b) {
        if (hist.count[b] == 0) continue;
        if (prev != bins && n_left >= min_leaf) {
          if (n - n_left < min_leaf) break;
          tracker.offer(f, gl, hl, values[prev], values[b]);
        }
        n_left += hist.count[b];
        gl += hist.g[b];
        hl += hist.h[b];
        prev = b;
      }
      continue;
    }
    const RowList& order = sorted[f];
    const std::uint32_t* code = cols.code_column(f);
    const std::vector<double>& values = cols.distinct[f];
    double gl = 0.0, hl = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      gl += g[order[i]];
      hl += h[order[i]];
      const std::size_t n_left = i + 1;
      if (n_left < min_leaf) continue;
      if (n - n_left < min_leaf) break;
      const std::uint32_t a = code[order[i]];
      const std::uint32_t b = code[order[i + 1]];
      if (a == b) continue;
      tracker.offer(f, gl, hl, values[a], values[b]);
    }
  }
  // Gains come from direct left and right sums in row order rather than
  // prefix differences, which lose digits when hessians are tiny.
  return tracker.settle([&](std::size_t feature, double threshold) {
    const double* v = cols.column(feature);
    double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
    for (std::uint32_t r : rows) {
      if (v[r] <= threshold) {
        gl += g[r];
        hl += h[r];
      } else {
        gr += g[r];
        hr += h[r];
      }
    }
    return split_gain(gl, hl, gr, hr, config.l2_reg);
  });
}

struct Leaf {
  int node = 0;
  RowList rows;  // ascending row index
  std::vector<RowList> sorted;
  double g = 0.0;
  double h = 0.0;
  std::optional<SplitCandidate> split;
};

void sum_gh(Leaf& leaf, std::span<const double> g, std::span<const double> h) {
  leaf.g = 0.0;
  leaf.h = 0.0;
  for (std::uint32_t r : leaf.rows) {
    leaf.g += g[r];
    leaf.h += h[r];
  }
}

double leaf_value(double g, double h, const TrainConfig& config) {
  return -config.learning_rate * g / std::max(h + config.l2_reg, kHessianFloor);
}

/// Stable split of `in` by the goes_left mask. Branch-free: both outputs
/// are written every step and only the matching cursor advances.
void partition(const RowList& in, const std::vector<char>& goes_left, std::size_t n_left, RowList& left,
               RowList& right) {
  left.resize(n_left + 1);
  right.resize(in.size() - n_left + 1);
  std::size_t l = 0, r = 0;
  for (std::uint32_t row : in) {
    const std::size_t to_left = static_cast<std::size_t>(goes_left[row]);
    left[l] = row;
    right[r] = row;
    l += to_left;
    r += 1 - to_left;
  }
  left.resize(l);
  right.resize(r);
}

/// Grows one best-first tree; returns the tree and, for each leaf node, its
/// training rows (to update predictions without re-routing).
Tree grow_tree(const Columns& cols, const RowList& all_rows, const std::vector<RowList>& presorted,
               std::span<const double> g, std::span<const double> h, const TrainConfig& config,
               std::vector<std::pair<int, RowList>>& leaf_rows) {
  Tree tree;
  std::vector<Leaf> frontier;
  {
    Leaf root;
    root.rows = all_rows;
    root.sorted = presorted;
    sum_gh(root, g, h);
    root.split = search(cols, root.rows, root.sorted, g, h, root.g, root.h, config);
    tree.nodes.push_back(TreeNode{});
    tree.nodes[0].count = root.rows.size();
    frontier.push_back(std::move(root));
  }

  std::vector<char> goes_left(cols.rows, 0);
  std::size_t n_leaves = 1;
  while (n_leaves < config.max_leaves) {
    std::size_t pick = frontier.size();
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (!frontier[i].split) continue;
      if (pick == frontier.size() || frontier[i].split->gain > frontier[pick].split->gain) pick = i;
    }
    if (pick == frontier.size()) break;

    Leaf parent = std::move(frontier[pick]);
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
    const SplitCandidate s = *parent.split;
    const double* v = cols.column(s.feature);
    for (std::uint32_t r : parent.rows) goes_left[r] = v[r] <= s.threshold ? 1 : 0;

    Leaf left, right;
    std::size_t n_left = 0;
    for (std::uint32_t r : parent.rows) n_left += static_cast<std::size_t>(goes_left[r]);
    left.sorted.resize(cols.cols);
    right.sorted.resize(cols.cols);
    partition(parent.rows, goes_left, n_left, left.rows, right.rows);
    for (std::size_t f = 0; f < cols.cols; ++f) {
      if (!parent.sorted[f].empty()) partition(parent.sorted[f], goes_left, n_left, left.sorted[f], right.sorted[f]);
    }

    const int left_id = static_cast<int>(tree.nodes.size());
    const int right_id = left_id + 1;
    TreeNode& p = tree.nodes[static_cast<std::size_t>(parent.node)];
    p.feature = static_cast<int>(s.feature);
    p.threshold = s.threshold;
    p.gain = s.gain;
    p.left = left_id;
    p.right = right_id;
    tree.nodes.push_back(TreeNode{});
    tree.nodes.back().count = left.rows.size();
    tree.nodes.push_back(TreeNode{});
    tree.nodes.back().count = right.rows.size();

    left.node = left_id;
    right.node = right_id;
    for (Leaf* child : {&left, &right}) {
      sum_gh(*child, g, h);
      child->split = search(cols, child->rows, child->sorted, g, h, child->g, child->h, config);
    }
    frontier.push_back(std::move(left));
    frontier.push_back(std::move(right));
    ++n_leaves;
  }

  leaf_rows.clear();
  for (Leaf& leaf : frontier) {
    tree.nodes[static_cast<std::size_t>(leaf.node)].value = leaf_value(leaf.g, leaf.h, config);
    leaf_rows.emplace_back(leaf.node, std::move(leaf.rows));
  }
  return tree;
}

}  // namespace

std::optional<SplitCandidate> best_split(const DataView& x, std::span<const std::size_t> rows,
                                         std::span<const double> gradients, std::span<const double> hessians,
                                         const TrainConfig& config) {
  RowList list(rows.begin(), rows.end());
  std::sort(list.begin(), list.end());
  const Columns cols = to_columns(x, list);
  double total_g = 0.0, total_h = 0.0;
  for (std::uint32_t r : list) {
    total_g += gradients[r];
    total_h += hessians[r];
  }
  return search(cols, list, sort_by_feature(cols, list), gradients, hessians, total_g, total_h, config);
}

GbmModel train_gbm(const DataView& x, std::span<const double> labels, const TrainConfig& config,
                   std::span<const double> weights) {
  config.validate();
  const std::size_t n = x.rows;
  if (n == 0) throw DataError("cannot train on an empty data set");
  if (labels.size() != n) throw DataError("label count does not match row count");
  if (!weights.empty() && weights.size() != n) throw DataError("weight count does not match row count");
  if (n < config.min_data_in_leaf) throw DataError("fewer rows than min_data_in_leaf");
  for (double y : labels) {
    if (!(y >= 0.0 && y <= 1.0)) throw DataError("labels must lie in [0,1]");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("weights must be finite and non-negative");
  }
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += weight(i);
    swy += weight(i) * labels[i];
  }
  if (!(sw > 0.0)) throw DataError("weights sum to zero");
  const double mean = swy / sw;

  GbmModel model;
  model.config = config;
  model.base_score = std::clamp(logit(std::clamp(mean, 0.0, 1.0)), logit(1e-6), logit(1.0 - 1e-6));

  const bool constant = std::all_of(labels.begin(), labels.end(), [&](double y) { return y == labels[0]; });
  if (constant) return model;

  RowList all(n);
  std::iota(all.begin(), all.end(), 0u);
  const Columns cols = to_columns(x, all);
  const std::vector<RowList> presorted = sort_by_feature(cols, all);

  std::vector<double> raw(n, model.base_score);
  std::vector<double> g(n), h(n);
  std::vector<std::pair<int, RowList>> leaf_rows;
  for (std::size_t t = 0; t < config.num_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      g[i] = (p - labels[i]) * weight(i);
      h[i] = p * (1.0 - p) * weight(i);
    }
    Tree tree = grow_tree(cols, all, presorted, g, h, config, leaf_rows);
    if (tree.nodes.size() == 1) break;
    for (const auto& [node, rows] : leaf_rows) {
      const double v = tree.nodes[static_cast<std::size_t>(node)].value;
      for (std::uint32_t r : rows) raw[r] += v;
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

GbmModel train_gbm(const FeatureMatrix& matrix, std::span<const double> labels, const TrainConfig& config,
                   std::span<const double> weights) {
  GbmModel model = train_gbm(DataView{matrix.values.data(), matrix.rows(), matrix.cols()}, labels, config, weights);
  model.feature_names = matrix.registry.names();
  model.registry_version = matrix.registry.version();
  return model;
}

double GbmModel::predict_raw(std::span<const double> x) const {
  double raw = base_score;
  for (const Tree& t : trees) raw += t.predict(x);
  return raw;
}

void GbmModel::check_registry(const FeatureRegistry& registry) const {
  if (registry.version() != registry_version || registry.names() != feature_names) {
    throw DataError("feature registry mismatch: model expects '" + registry_version + "', data has '" +
                    registry.version() + "'");
  }
}

std::vector<double> GbmModel::predict_proba(const FeatureMatrix& matrix) const {
  check_registry(matrix.registry);
  std::vector<double> out(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) out[i] = predict_proba(matrix.row(i));
  return out;
}

std::vector<FeatureImportance> feature_importance(const GbmModel& model) {
  std::vector<double> totals;
  double sum = 0.0;
  for (const Tree& t : model.trees) {
    for (const TreeNode& n : t.nodes) {
      if (n.is_leaf()) continue;
      const auto f = static_cast<std::size_t>(n.feature);
      if (f >= totals.size()) totals.resize(f + 1, 0.0);
      totals[f] += n.gain;
      sum += n.gain;
    }
  }
  std::vector<FeatureImportance> out;
  if (!(sum > 0.0)) return out;
  for (std::size_t f = 0; f < totals.size(); ++f) {
    if (totals[f] <= 0.0) continue;
    std::string name = f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f);
    out.push_back({std::move(name), totals[f] / sum});
  }
  std::sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    return a.importance != b.importance ? a.importance > b.importance : a.name < b.name;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.num_trees = j.at("num_trees").get<std::size_t>();
  c.max_leaves = j.at("max_leaves").get<std::size_t>();
  c.min_data_in_leaf = j.at("min_data_in_leaf").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.l2_reg = j.at("l2_reg").get<double>();
  c.min_split_gain = j.at("min_split_gain").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void render_node(const GbmModel& model, const Tree& tree, std::size_t i, int depth, std::string& out) {
  const TreeNode& n = tree.nodes[i];
  out.append(static_cast<std::size_t>(2 * depth + 2), ' ');
  if (n.is_leaf()) {
    out += "leaf " + fmt17(n.value) + " (n=" + std::to_string(n.count) + ")\n";
    return;
  }
  const auto f = static_cast<std::size_t>(n.feature);
  const std::string name = f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f);
  out += name + " <= " + fmt17(n.threshold) + " (gain=" + fmt17(n.gain) + ", n=" + std::to_string(n.count) + ")\n";
  render_node(model, tree, static_cast<std::size_t>(n.left), depth + 1, out);
  render_node(model, tree, static_cast<std::size_t>(n.right), depth + 1, out);
}

}  // namespace

// Written by hand so that every real is printed with 17 significant digits.
std::string model_to_json(const GbmModel& model) {
  auto str = [](const std::string& v) { return json(v).dump(); };
  const TrainConfig& c = model.config;
  std::string out = "{\n";
  out += " \"format_version\": " + std::to_string(GbmModel::kFormatVersion) + ",\n";
  out += " \"registry_version\": " + str(model.registry_version) + ",\n";
  out += " \"feature_names\": [";
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    out += (i ? ", " : "") + str(model.feature_names[i]);
  }
  out += "],\n";
  out += " \"base_score\": " + fmt17(model.base_score) + ",\n";
  out += " \"config\": {\"num_trees\": " + std::to_string(c.num_trees) +
         ", \"max_leaves\": " + std::to_string(c.max_leaves) +
         ", \"min_data_in_leaf\": " + std::to_string(c.min_data_in_leaf) +
         ", \"learning_rate\": " + fmt17(c.learning_rate) + ", \"l2_reg\": " + fmt17(c.l2_reg) +
         ", \"min_split_gain\": " + fmt17(c.min_split_gain) + ", \"seed\": " + std::to_string(c.seed) + "},\n";
  out += " \"trees\": [";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    out += t ? ",\n  {\"nodes\": [" : "\n  {\"nodes\": [";
    const auto& nodes = model.trees[t].nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& n = nodes[i];
      out += i ? ",\n   " : "\n   ";
      if (n.is_leaf()) {
        out += "{\"leaf_value\": " + fmt17(n.value) + ", \"count\": " + std::to_string(n.count) + "}";
        continue;
      }
      const auto f = static_cast<std::size_t>(n.feature);
      out += "{\"split_feature\": " + str(f < model.feature_names.size() ? model.feature_names[f] : "f" + std::to_string(f)) +
             ", \"split_index\": " + std::to_string(f) + ", \"threshold\": " + fmt17(n.threshold) +
             ", \"left\": " + std::to_string(n.left) + ", \"right\": " + std::to_string(n.right) +
             ", \"gain\": " + fmt17(n.gain) + ", \"count\": " + std::to_string(n.count) + "}";
    }
    out += "]}";
  }
  out += model.trees.empty() ? "]\n}\n" : "\n ]\n}\n";
  return out;
}

GbmModel model_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != GbmModel::kFormatVersion) {
      throw DataError("unsupported model format version");
    }
    GbmModel m;
    m.registry_version = j.at("registry_version").get<std::string>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.base_score = j.at("base_score").get<double>();
    m.config = config_from_json(j.at("config"));
    for (const json& jt : j.at("trees")) {
      Tree t;
      for (const json& jn : jt.at("nodes")) {
        TreeNode n;
        n.count = jn.at("count").get<std::size_t>();
        if (jn.contains("leaf_value")) {
          n.value = jn.at("leaf_value").get<double>();
        } else {
          n.feature = jn.at("split_index").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
          n.gain = jn.at("gain").get<double>();
        }
        t.nodes.push_back(n);
      }
      const int size = static_cast<int>(t.nodes.size());
      if (size == 0) throw DataError("model tree has no nodes");
      for (const TreeNode& n : t.nodes) {
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)) {
          throw DataError("model tree has an invalid child index");
        }
        if (!n.is_leaf() && !m.feature_names.empty() && static_cast<std::size_t>(n.feature) >= m.feature_names.size()) {
          throw DataError("model tree references an unknown feature");
        }
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const GbmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model: " + path.string());
  out << model_to_json(model);
}

GbmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

std::string dump_trees_text(const GbmModel& model) {
  std::string out = "base_score " + fmt17(model.base_score) + "\n";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    out += "tree " + std::to_string(t) + " (leaves=" + std::to_string(model.trees[t].num_leaves()) + ")\n";
    render_node(model, model.trees[t], 0, 0, out);
  }
  return out;
}

}  // namespace tdd

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "tdd/errors.hpp"
#include "tdd/gbm.hpp"
#include "tdd/rng.hpp"

using namespace tdd;

namespace {

struct Dataset {
  std::size_t rows = 0, cols = 0;
  std::vector<double> x;
  std::vector<double> y;
  DataView view() const { return {x.data(), rows, cols}; }
};

// Mixed columns: small integers (many ties) and continuous values.
Dataset random_dataset(Rng& rng, std::size_t rows, std::size_t cols) {
  Dataset d{rows, cols, std::vector<double>(rows * cols), std::vector<double>(rows)};
  std::vector<int> kind(cols);
  for (auto& k : kind) k = static_cast<int>(rng.below(3));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = rng.uniform(-3, 3);
      if (kind[c] == 1) v = static_cast<double>(rng.below(4));
      if (kind[c] == 2) v = static_cast<double>(rng.below(2));
      d.x[r * cols + c] = v;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double z = d.x[r * cols] + (cols > 1 ? d.x[r * cols + 1] : 0.0) + rng.uniform(-1, 1);
    d.y[r] = rng.bernoulli(0.2) ? rng.uniform() : (z > 0 ? 1.0 : 0.0);
  }
  return d;
}

double mean_loss(const GbmModel& m, const Dataset& d) {
  double s = 0;
  for (std::size_t r = 0; r < d.rows; ++r) {
    s += xentropy_loss(m.predict_raw(std::span<const double>(d.x.data() + r * d.cols, d.cols)), d.y[r]);
  }
  return s / static_cast<double>(d.rows);
}

// Best-first growth built only on the exhaustive split oracle.
Tree reference_tree(const DataView& x, std::span<const double> g, std::span<const double> h, const TrainConfig& c) {
  struct Open {
    int node;
    std::vector<std::size_t> rows;
    std::optional<SplitCandidate> split;
  };
  Tree t;
  std::vector<Open> open;
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  open.push_back({0, all, oracle::exhaustive_best_split(x, all, g, h, c)});
  t.nodes.push_back({});
  t.nodes[0].count = x.rows;
  for (std::size_t leaves = 1; leaves < c.max_leaves; ++leaves) {
    std::size_t pick = open.size();
    for (std::size_t i = 0; i < open.size(); ++i) {
      if (open[i].split && (pick == open.size() || open[i].split->gain > open[pick].split->gain)) pick = i;
    }
    if (pick == open.size()) break;
    Open parent = open[pick];
    open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    std::vector<std::size_t> l, r;
    for (std::size_t row : parent.rows) (x.at(row, parent.split->feature) <= parent.split->threshold ? l : r).push_back(row);
    const int li = static_cast<int>(t.nodes.size());
    TreeNode& p = t.nodes[static_cast<std::size_t>(parent.node)];
    p.feature = static_cast<int>(parent.split->feature);
    p.threshold = parent.split->threshold;
    p.gain = parent.split->gain;
    p.left = li;
    p.right = li + 1;
    t.nodes.push_back({});
    t.nodes.back().count = l.size();
    t.nodes.push_back({});
    t.nodes.back().count = r.size();
    open.push_back({li, l, oracle::exhaustive_best_split(x, l, g, h, c)});
    open.push_back({li + 1, r, oracle::exhaustive_best_split(x, r, g, h, c)});
  }
  for (const Open& o : open) {
    double sg = 0, sh = 0;
    for (std::size_t row : o.rows) {
      sg += g[row];
      sh += h[row];
    }
    t.nodes[static_cast<std::size_t>(o.node)].value = -c.learning_rate * sg / std::max(sh + c.l2_reg, kHessianFloor);
  }
  return t;
}

}  // namespace

TEST_CASE("default training configuration") {
  const TrainConfig c;
  CHECK(c.num_trees == 60);
  CHECK(c.max_leaves == 9);
  CHECK(c.min_data_in_leaf == 10);
  CHECK(c.learning_rate == 0.04);
  CHECK_NOTHROW(c.validate());
  TrainConfig bad;
  bad.max_leaves = 1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.min_data_in_leaf = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = {};
  bad.l2_reg = -1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("sigmoid reference values") {
  CHECK(std::round(sigmoid(-0.76) * 1000) / 1000 == 0.319);
  CHECK(std::round(sigmoid(-0.6) * 1000) / 1000 == 0.354);
  CHECK(sigmoid(0) == 0.5);
  CHECK(sigmoid(800) == 1.0);
  CHECK(sigmoid(-800) == 0.0);
  CHECK(logit(sigmoid(1.25)) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("xentropy derivatives agree with central differences") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double f = rng.uniform(-10, 10);
    const double y = rng.bernoulli(0.3) ? static_cast<double>(rng.below(2)) : rng.uniform();
    const double fd_g = oracle::central_difference([&](double v) { return xentropy_loss(v, y); }, f, 1e-4);
    const double fd_h = oracle::central_difference([&](double v) { return xentropy_gradient(v, y); }, f, 1e-4);
    CHECK(std::abs(xentropy_gradient(f, y) - fd_g) < 1e-6);
    CHECK(std::abs(xentropy_hessian(f, y) - fd_h) < 1e-6);
    CHECK(xentropy_gradient(f, y) == doctest::Approx(sigmoid(f) - y));
  }
  CHECK(std::isfinite(xentropy_loss(1000, 0)));
  CHECK(xentropy_loss(1000, 0) == doctest::Approx(1000));
}

TEST_CASE("best_split matches exhaustive search on few-valued and continuous features") {
  Rng rng(17);
  for (int trial = 0; trial < 400; ++trial) {
    // Larger sets push continuous columns past the histogram bin limit.
    const std::size_t rows = trial % 2 ? 2 + rng.below(49) : 70 + rng.below(150);
    const std::size_t cols = 1 + rng.below(5);
    const Dataset d = random_dataset(rng, rows, cols);
    std::vector<double> g(rows), h(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      g[r] = rng.uniform(-1, 1);
      h[r] = rng.uniform(0.01, 0.25);
    }
    std::vector<std::size_t> subset;
    for (std::size_t r = 0; r < rows; ++r) {
      if (trial % 3 != 0 || rng.bernoulli(0.7)) subset.push_back(r);
    }
    TrainConfig c;
    c.min_data_in_leaf = 1 + rng.below(6);
    c.l2_reg = rng.bernoulli(0.5) ? 0.0 : rng.uniform(0, 2);
    const auto got = best_split(d.view(), subset, g, h, c);
    const auto want = oracle::exhaustive_best_split(d.view(), subset, g, h, c);
    REQUIRE(got.has_value() == want.has_value());
    if (!want) continue;
    CHECK(std::abs(got->gain - want->gain) <= 1e-12);
    CHECK(got->feature == want->feature);
    CHECK(got->threshold == want->threshold);
    const double actual = oracle::split_gain_at(d.view(), subset, g, h, got->feature, got->threshold, c.l2_reg);
    CHECK(std::abs(actual - want->gain) <= 1e-12);
  }
}

TEST_CASE("best_split respects min_data_in_leaf and min_split_gain") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> g{-1, -1, 1, 1}, h{0.25, 0.25, 0.25, 0.25};
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  TrainConfig c;
  c.min_data_in_leaf = 2;
  auto s = best_split({x.data(), 4, 1}, rows, g, h, c);
  REQUIRE(s);
  CHECK(s->threshold == 2.5);
  CHECK(s->gain == doctest::Approx(0.5 * (4 / 0.5 + 4 / 0.5)));
  c.min_data_in_leaf = 3;
  CHECK_FALSE(best_split({x.data(), 4, 1}, rows, g, h, c));
  c.min_data_in_leaf = 1;
  c.min_split_gain = 100;
  CHECK_FALSE(best_split({x.data(), 4, 1}, rows, g, h, c));
}

TEST_CASE("best_split breaks exact ties toward the lower feature and threshold") {
  // Two identical columns, and thresholds 1.5 and 3.5 mirror each other.
  const std::vector<double> x{1, 1, 2, 2, 3, 3, 4, 4};
  const std::vector<double> hh(4, 0.25);
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  TrainConfig c;
  c.min_data_in_leaf = 1;
  const std::vector<double> gg{-1, 0, 0, 1};
  const auto s = best_split({x.data(), 4, 2}, rows, gg, hh, c);
  REQUIRE(s);
  CHECK(s->feature == 0);
  CHECK(s->threshold == 1.5);
}

TEST_CASE("trained trees equal a reference learner built on the split oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const Dataset d = random_dataset(rng, 80 + rng.below(60), 4);
    TrainConfig c;
    c.num_trees = 8;
    c.max_leaves = 5;
    c.min_data_in_leaf = 5;
    c.learning_rate = 0.3;
    const GbmModel m = train_gbm(d.view(), d.y, c);
    double mean = 0;
    for (double v : d.y) mean += v;
    mean /= static_cast<double>(d.rows);
    std::vector<double> raw(d.rows, logit(mean)), g(d.rows), h(d.rows);
    CHECK(m.base_score == doctest::Approx(logit(mean)).epsilon(1e-15));
    REQUIRE(m.trees.size() == c.num_trees);
    for (std::size_t t = 0; t < c.num_trees; ++t) {
      for (std::size_t r = 0; r < d.rows; ++r) {
        g[r] = xentropy_gradient(raw[r], d.y[r]);
        h[r] = xentropy_hessian(raw[r], d.y[r]);
      }
      const Tree ref = reference_tree(d.view(), g, h, c);
      const Tree& got = m.trees[t];
      REQUIRE(ref.nodes.size() == got.nodes.size());
      for (std::size_t r = 0; r < d.rows; ++r) {
        const std::span<const double> row(d.x.data() + r * d.cols, d.cols);
        CHECK(ref.leaf_index(row) == got.leaf_index(row));
        CHECK(std::abs(ref.predict(row) - got.predict(row)) < 1e-12);
        raw[r] += ref.predict(row);
      }
    }
  }
}

TEST_CASE("tree shape constraints hold on every trained tree") {
  Rng rng(8);
  const Dataset d = random_dataset(rng, 400, 5);
  const TrainConfig c;
  const GbmModel m = train_gbm(d.view(), d.y, c);
  REQUIRE_FALSE(m.trees.empty());
  for (const Tree& t : m.trees) {
    CHECK(t.num_leaves() <= 9);
    CHECK(t.nodes[0].count == d.rows);
    std::vector<std::size_t> routed(t.nodes.size(), 0);
    for (std::size_t r = 0; r < d.rows; ++r) ++routed[t.leaf_index(std::span<const double>(d.x.data() + r * 5, 5))];
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const TreeNode& n = t.nodes[i];
      if (n.is_leaf()) {
        CHECK(n.count >= 10);
        CHECK(routed[i] == n.count);
      } else {
        CHECK(t.nodes[static_cast<std::size_t>(n.left)].count + t.nodes[static_cast<std::size_t>(n.right)].count == n.count);
        CHECK(n.gain > 0);
      }
    }
  }
  GbmModel base = m;
  base.trees.clear();
  CHECK(mean_loss(m, d) < mean_loss(base, d));
  CHECK(train_gbm(d.view(), d.y, c) == m);
}

TEST_CASE("constant labels produce a model with no trees") {
  const std::vector<double> x(40, 1.0);
  const std::vector<double> y(20, 1.0);
  const GbmModel m = train_gbm({x.data(), 20, 2}, y, TrainConfig{});
  CHECK(m.trees.empty());
  CHECK(m.predict_proba(std::span<const double>(x.data(), 2)) == doctest::Approx(1 - 1e-6));
}

TEST_CASE("training input validation") {
  const std::vector<double> x(40, 1.0);
  std::vector<double> y(20, 0.0);
  y[0] = 1;
  TrainConfig c;
  CHECK_THROWS_AS(train_gbm({x.data(), 20, 2}, std::span<const double>(y.data(), 19), c), DataError);
  y[1] = 1.5;
  CHECK_THROWS_AS(train_gbm({x.data(), 20, 2}, y, c), DataError);
  y[1] = 0;
  const std::vector<double> w(20, 0.0);
  CHECK_THROWS_AS(train_gbm({x.data(), 20, 2}, y, c, w), DataError);
  CHECK_THROWS_AS(train_gbm({x.data(), 5, 2}, std::span<const double>(y.data(), 5), c), DataError);
}

TEST_CASE("model file round trip is exact and names split features") {
  Rng rng(12);
  const Dataset d = random_dataset(rng, 150, 3);
  FeatureMatrix fm;
  fm.registry = FeatureRegistry::default_registry();
  // Reuse three default columns, zero elsewhere.
  fm.values.assign(150 * fm.registry.size(), 0.0);
  for (std::size_t r = 0; r < 150; ++r) {
    fm.ids.push_back(std::to_string(1000 + r));
    for (std::size_t c = 0; c < 3; ++c) fm.values[r * fm.registry.size() + 19 + c] = d.x[r * 3 + c];
  }
  TrainConfig c;
  c.learning_rate = 0.1 / 3.0;
  c.min_data_in_leaf = 7;
  const GbmModel m = train_gbm(fm, d.y, c);
  REQUIRE_FALSE(m.trees.empty());
  const std::string text = model_to_json(m);
  CHECK(text.find("\"split_feature\": \"n_char") != std::string::npos);
  CHECK(text.find("\"learning_rate\": 0.033333333333333333") != std::string::npos);
  const GbmModel back = model_from_json(text);
  CHECK(back == m);
  CHECK(model_to_json(back) == text);
  CHECK(back.predict_proba(fm) == m.predict_proba(fm));

  const auto path = std::filesystem::temp_directory_path() / "tdd_test_model.json";
  save_model(m, path);
  CHECK(load_model(path) == m);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(model_from_json("{"), DataError);
  CHECK_THROWS_AS(model_from_json(R"({"format_version": 99})"), DataError);

  FeatureMatrix other = fm;
  other.registry = fm.registry.with_ngrams(std::vector<std::string>{"x"});
  CHECK_THROWS_AS(m.predict_proba(other), DataError);

  const std::string dump = dump_trees_text(m);
  CHECK(dump.find("tree 0") != std::string::npos);
  CHECK(dump.find("leaf ") != std::string::npos);
}

TEST_CASE("feature importance is a normalized gain share") {
  Rng rng(4);
  const Dataset d = random_dataset(rng, 300, 4);
  const GbmModel m = train_gbm(d.view(), d.y, TrainConfig{});
  const auto imp = feature_importance(m);
  REQUIRE_FALSE(imp.empty());
  double total = 0;
  for (std::size_t i = 0; i < imp.size(); ++i) {
    total += imp[i].importance;
    if (i) CHECK(imp[i - 1].importance >= imp[i].importance);
  }
  CHECK(total == doctest::Approx(1.0));
  GbmModel empty = m;
  empty.trees.clear();
  CHECK(feature_importance(empty).empty());
}

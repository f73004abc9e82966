#pragma once

// Straightforward reference computations the optimized code is checked against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tdd/gbm.hpp"

namespace tdd::oracle {

template <class F>
double central_difference(F&& f, double x, double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// Every (feature, midpoint) candidate, with sums recomputed from scratch.
inline std::optional<SplitCandidate> exhaustive_best_split(const DataView& x, std::span<const std::size_t> rows,
                                                           std::span<const double> g, std::span<const double> h,
                                                           const TrainConfig& config) {
  std::optional<SplitCandidate> best;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> distinct;
    for (std::size_t r : rows) distinct.push_back(x.at(r, f));
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
      double t = (distinct[k] + distinct[k + 1]) / 2.0;
      if (!(t < distinct[k + 1])) t = distinct[k];
      double gl = 0, hl = 0, gr = 0, hr = 0;
      std::size_t nl = 0, nr = 0;
      for (std::size_t r : rows) {
        if (x.at(r, f) <= t) {
          gl += g[r];
          hl += h[r];
          ++nl;
        } else {
          gr += g[r];
          hr += h[r];
          ++nr;
        }
      }
      if (nl < config.min_data_in_leaf || nr < config.min_data_in_leaf) continue;
      const double gain = split_gain(gl, hl, gr, hr, config.l2_reg);
      if (!(gain > config.min_split_gain)) continue;
      if (!best || gain > best->gain) best = SplitCandidate{f, t, gain};
    }
  }
  return best;
}

/// Gain of one given split, sums recomputed from scratch.
inline double split_gain_at(const DataView& x, std::span<const std::size_t> rows, std::span<const double> g,
                            std::span<const double> h, std::size_t feature, double threshold, double l2_reg) {
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (std::size_t r : rows) {
    if (x.at(r, feature) <= threshold) {
      gl += g[r];
      hl += h[r];
    } else {
      gr += g[r];
      hr += h[r];
    }
  }
  return split_gain(gl, hl, gr, hr, l2_reg);
}

/// Weighted pairwise AUROC over all (positive, negative) pairs.
inline std::optional<double> pairwise_auroc(std::span<const double> s, std::span<const double> y,
                                            std::span<const double> w) {
  double num = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] > 0.5) pos += w[i]; else neg += w[i];
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] > 0.5) || y[j] > 0.5) continue;
      const double wij = w[i] * w[j];
      if (s[i] > s[j]) num += wij;
      else if (s[i] == s[j]) num += 0.5 * wij;
    }
  }
  if (!(pos > 0) || !(neg > 0)) return std::nullopt;
  return num / (pos * neg);
}

}  // namespace tdd::oracle

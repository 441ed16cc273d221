#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

/// Per-feature relevance scores. Raw weights live in [-1,+1] (mean
/// hit/miss difference), `normalized` is their min-max rescale to [0,1].
struct ReliefWeights {
  std::vector<std::string> schema;
  std::vector<double> raw;
  std::vector<double> normalized;
};

/// Linear min-max rescale of the raw weights; a degenerate range maps every
/// feature to 0.5.
inline ReliefWeights normalize(ReliefWeights weights) {
  if (weights.raw.empty())
    throw EmptyInputError("normalize: no features");
  auto [lo_it, hi_it] = std::minmax_element(weights.raw.begin(), weights.raw.end());
  const double lo = *lo_it, hi = *hi_it;
  weights.normalized.resize(weights.raw.size());
  if (hi == lo) {
    std::fill(weights.normalized.begin(), weights.normalized.end(), 0.5);
  } else {
    for (std::size_t j = 0; j < weights.raw.size(); ++j)
      weights.normalized[j] = (weights.raw[j] - lo) / (hi - lo);
  }
  return weights;
}

/// Relief-F: supervised feature weighting. For each sampled instance the
/// k nearest hits (same class) and k nearest misses (other class) are found
/// under the range-normalized Manhattan metric, and every feature is
/// credited with (mean miss difference - mean hit difference). Weights are
/// averaged over iterations, so each component stays in [-1,+1].
///
/// Instances are visited in a seeded random permutation, cycling when
/// iterations exceed the record count. Constant features contribute a
/// difference of 0. Neighbor ties at the k-th rank keep the lower record
/// index. When a class has no other member, its hit term is 0.
inline ReliefWeights relieff(const Dataset& data, int k_neighbors,
                             int iterations, std::uint64_t seed) {
  const int n = static_cast<int>(data.size());
  const std::size_t d = data.dim();
  int pos = 0, neg = 0;
  for (const auto& rec : data.records) (rec.label > 0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0 || n < 2)
    throw InsufficientClassDataError(
        "relieff: need at least one record of each class (have +" +
        std::to_string(pos) + "/-" + std::to_string(neg) + ")");
  if (k_neighbors < 1) throw ConfigError("relieff: k_neighbors must be >= 1");
  if (iterations < 1) throw ConfigError("relieff: iterations must be >= 1");

  // Range normalization makes the weighting invariant to feature scale.
  std::vector<double> range(d, 0.0);
  {
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& rec : data.records)
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], rec.features[j]);
        hi[j] = std::max(hi[j], rec.features[j]);
      }
    for (std::size_t j = 0; j < d; ++j) range[j] = hi[j] - lo[j];
  }
  auto diff = [&](int a, int b, std::size_t j) {
    if (range[j] <= 0.0) return 0.0;
    return std::abs(data.records[static_cast<std::size_t>(a)].features[j] -
                    data.records[static_cast<std::size_t>(b)].features[j]) /
           range[j];
  };

  std::mt19937_64 rng(seed);
  auto order = shuffled_indices(n, rng);

  std::vector<double> w(d, 0.0);
  std::vector<std::pair<double, int>> hits, misses;
  for (int it = 0; it < iterations; ++it) {
    const int i = order[static_cast<std::size_t>(it % n)];
    const int label = data.records[static_cast<std::size_t>(i)].label;
    hits.clear();
    misses.clear();
    for (int b = 0; b < n; ++b) {
      if (b == i) continue;
      double total = 0.0;
      for (std::size_t j = 0; j < d; ++j) total += diff(i, b, j);
      auto& bucket =
          data.records[static_cast<std::size_t>(b)].label == label ? hits : misses;
      bucket.emplace_back(total, b);
    }
    auto take_k = [&](std::vector<std::pair<double, int>>& bucket) {
      const std::size_t k = std::min<std::size_t>(
          bucket.size(), static_cast<std::size_t>(k_neighbors));
      std::partial_sort(bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(k),
                        bucket.end());
      bucket.resize(k);
    };
    take_k(hits);
    take_k(misses);
    for (std::size_t j = 0; j < d; ++j) {
      double hit_mean = 0.0, miss_mean = 0.0;
      for (const auto& [dd, b] : hits) hit_mean += diff(i, b, j);
      for (const auto& [dd, b] : misses) miss_mean += diff(i, b, j);
      if (!hits.empty()) hit_mean /= static_cast<double>(hits.size());
      if (!misses.empty()) miss_mean /= static_cast<double>(misses.size());
      w[j] += miss_mean - hit_mean;
    }
  }
  for (auto& v : w) v /= static_cast<double>(iterations);

  ReliefWeights weights;
  weights.schema = data.schema;
  weights.raw = std::move(w);
  return normalize(std::move(weights));
}

struct SelectionPolicy {
  std::optional<int> top_m;        // keep the m largest normalized weights
  std::optional<double> threshold; // keep normalized weight >= threshold
};

/// Feature retention on normalized weights; never returns an empty set
/// (a threshold that excludes everything falls back to the argmax feature).
/// Result is sorted ascending.
inline std::vector<int> select_features(const ReliefWeights& weights,
                                        const SelectionPolicy& policy) {
  const int d = static_cast<int>(weights.normalized.size());
  std::vector<int> selected;
  if (policy.top_m) {
    const int m = std::min(*policy.top_m, d);
    if (m < 1) throw ConfigError("select_features: top_m must be >= 1");
    std::vector<int> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return weights.normalized[static_cast<std::size_t>(a)] >
             weights.normalized[static_cast<std::size_t>(b)];
    });
    selected.assign(idx.begin(), idx.begin() + m);
  } else if (policy.threshold) {
    for (int j = 0; j < d; ++j)
      if (weights.normalized[static_cast<std::size_t>(j)] >= *policy.threshold)
        selected.push_back(j);
    if (selected.empty()) {
      int best = 0;
      for (int j = 1; j < d; ++j)
        if (weights.normalized[static_cast<std::size_t>(j)] >
            weights.normalized[static_cast<std::size_t>(best)])
          best = j;
      selected.push_back(best);
    }
  } else {
    throw ConfigError("select_features: policy must set top_m or threshold");
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

inline void write_weights_csv(const ReliefWeights& weights, std::ostream& out) {
  out << "feature,raw_weight,normalized_weight\n";
  for (std::size_t j = 0; j < weights.raw.size(); ++j)
    out << weights.schema[j] << ',' << weights.raw[j] << ','
        << weights.normalized[j] << '\n';
}

}  // namespace sectorcast

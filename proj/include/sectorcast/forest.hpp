#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

/// Gini impurity 1 - sum p_c^2 of a binary class distribution.
inline double gini(std::pair<double, double> class_fractions) {
  const auto [p0, p1] = class_fractions;
  if (p0 < 0.0 || p1 < 0.0 || std::abs(p0 + p1 - 1.0) > 1e-9)
    throw InvalidDistributionError("gini: fractions must be >=0 and sum to 1");
  return 1.0 - p0 * p0 - p1 * p1;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int decision = -1;
  std::array<double, 2> class_fractions{0.0, 0.0};  // {P(-1), P(+1)}

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<int> feature_subset;
};

struct ForestConfig {
  int max_depth = 16;
  int min_node_size = 2;
  int features_per_tree = 0;  // 0 -> ceil(sqrt(d))
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::vector<int>> in_bag;  // sorted record indices per tree
  std::vector<double> oob_curve;
  std::size_t dimension = 0;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

namespace detail {

inline std::pair<double, double> class_fractions_of(
    const Dataset& data, const std::vector<int>& indices) {
  double pos = 0;
  for (int i : indices)
    if (data.records[static_cast<std::size_t>(i)].label > 0) pos += 1;
  const double n = static_cast<double>(indices.size());
  return {(n - pos) / n, pos / n};
}

}  // namespace detail

/// Exhaustive best Gini split over the candidate features; thresholds are
/// midpoints of consecutive distinct sorted values. Returns nullopt when no
/// split strictly decreases impurity. Ties break toward the lowest feature
/// index, then the lowest threshold.
inline std::optional<Split> best_split(const Dataset& data,
                                       const std::vector<int>& node_indices,
                                       const std::vector<int>& candidate_features) {
  const std::size_t n = node_indices.size();
  if (n < 2) return std::nullopt;
  const double parent = gini(detail::class_fractions_of(data, node_indices));

  std::optional<Split> best;
  std::vector<std::pair<double, int>> values(n);  // (feature value, label)
  for (int f : candidate_features) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = data.records[static_cast<std::size_t>(node_indices[i])];
      values[i] = {rec.features[static_cast<std::size_t>(f)], rec.label};
    }
    std::sort(values.begin(), values.end());

    double left_pos = 0, left_n = 0;
    double total_pos = 0;
    for (const auto& [v, y] : values) total_pos += y > 0 ? 1 : 0;

    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_n += 1;
      left_pos += values[i].second > 0 ? 1 : 0;
      if (values[i].first == values[i + 1].first) continue;
      const double mid = 0.5 * (values[i].first + values[i + 1].first);
      if (mid <= values[i].first || mid >= values[i + 1].first)
        continue;  // adjacent doubles cannot be separated
      const double right_n = static_cast<double>(n) - left_n;
      const double right_pos = total_pos - left_pos;
      const double gl = 1.0 - std::pow(left_pos / left_n, 2) -
                        std::pow((left_n - left_pos) / left_n, 2);
      const double gr = 1.0 - std::pow(right_pos / right_n, 2) -
                        std::pow((right_n - right_pos) / right_n, 2);
      const double weighted =
          (left_n * gl + right_n * gr) / static_cast<double>(n);
      const double decrease = parent - weighted;
      if (decrease <= 0.0) continue;
      const bool better =
          !best || decrease > best->impurity_decrease + 1e-15 ||
          (std::abs(decrease - best->impurity_decrease) <= 1e-15 &&
           (f < best->feature ||
            (f == best->feature && mid < best->threshold)));
      if (better) best = Split{f, mid, decrease};
    }
  }
  return best;
}

namespace detail {

inline int majority_label(const Dataset& data, const std::vector<int>& indices) {
  int sum = 0;
  for (int i : indices) sum += data.records[static_cast<std::size_t>(i)].label;
  return sum > 0 ? +1 : -1;
}

inline int grow_node(Tree& tree, const Dataset& data, std::vector<int> indices,
                     int depth, const ForestConfig& cfg) {
  TreeNode node;
  auto fractions = class_fractions_of(data, indices);
  node.class_fractions = {fractions.first, fractions.second};
  node.decision = majority_label(data, indices);

  const bool pure = fractions.first == 0.0 || fractions.second == 0.0;
  std::optional<Split> split;
  if (!pure && depth < cfg.max_depth &&
      static_cast<int>(indices.size()) >= cfg.min_node_size)
    split = best_split(data, indices, tree.feature_subset);

  const int node_index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (!split) return node_index;

  std::vector<int> left, right;
  for (int i : indices) {
    const double v = data.records[static_cast<std::size_t>(i)]
                         .features[static_cast<std::size_t>(split->feature)];
    (v <= split->threshold ? left : right).push_back(i);
  }
  tree.nodes[static_cast<std::size_t>(node_index)].feature = split->feature;
  tree.nodes[static_cast<std::size_t>(node_index)].threshold = split->threshold;
  const int l = grow_node(tree, data, std::move(left), depth + 1, cfg);
  tree.nodes[static_cast<std::size_t>(node_index)].left = l;
  const int r = grow_node(tree, data, std::move(right), depth + 1, cfg);
  tree.nodes[static_cast<std::size_t>(node_index)].right = r;
  return node_index;
}

}  // namespace detail

inline int tree_decide(const Tree& tree, const std::vector<double>& x) {
  int node = 0;
  while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                   : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].decision;
}

/// Out-of-bag error per forest prefix: entry t is the misclassification
/// rate, over records left out of at least one of the first t+1 bags, of the
/// majority vote of those trees (tie -> -1).
inline std::vector<double> oob_error(const ForestModel& model,
                                     const Dataset& train) {
  const std::size_t n = train.size();
  std::vector<int> votes(n, 0);
  std::vector<bool> seen(n, false);
  std::vector<double> curve;
  curve.reserve(model.trees.size());
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    std::vector<bool> in_bag(n, false);
    for (int i : model.in_bag[t]) in_bag[static_cast<std::size_t>(i)] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      votes[i] += tree_decide(model.trees[t], train.records[i].features);
      seen[i] = true;
    }
    double wrong = 0, counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen[i]) continue;
      counted += 1;
      const int decision = votes[i] > 0 ? +1 : -1;
      if (decision != train.records[i].label) wrong += 1;
    }
    curve.push_back(counted > 0 ? wrong / counted : 0.0);
  }
  return curve;
}

/// Bootstrapped, feature-subsampled Gini forest. Each tree draws n records
/// with replacement and a random feature subset of size ceil(sqrt(d));
/// growth stops at purity, max depth, or min node size. Per-tree seeds are
/// derived from the master seed, so tree t is identical no matter how many
/// trees are grown or in what order.
inline ForestModel train_forest(const Dataset& train, int max_trees,
                                std::uint64_t seed,
                                const ForestConfig& cfg = {}) {
  const int n = static_cast<int>(train.size());
  if (n == 0) throw EmptyTrainingError("train_forest: empty training set");
  if (!has_both_classes(train))
    throw SingleClassTrainingError("train_forest: one class absent");
  if (max_trees < 1) throw ConfigError("train_forest: max_trees must be >= 1");

  const int d = static_cast<int>(train.dim());
  int subset_size = cfg.features_per_tree > 0
                        ? std::min(cfg.features_per_tree, d)
                        : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

  ForestModel model;
  model.dimension = train.dim();
  model.trees.reserve(static_cast<std::size_t>(max_trees));
  model.in_bag.reserve(static_cast<std::size_t>(max_trees));
  for (int t = 0; t < max_trees; ++t) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<int> bag(static_cast<std::size_t>(n));
    for (auto& b : bag)
      b = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    std::sort(bag.begin(), bag.end());

    Tree tree;
    tree.feature_subset = sample_without_replacement(d, subset_size, rng);
    detail::grow_node(tree, train, bag, 0, cfg);
    model.trees.push_back(std::move(tree));

    std::vector<int> unique_bag = bag;
    unique_bag.erase(std::unique(unique_bag.begin(), unique_bag.end()),
                     unique_bag.end());
    model.in_bag.push_back(std::move(unique_bag));
  }
  model.oob_curve = oob_error(model, train);
  return model;
}

/// Sign of the mean per-tree vote; an exact zero mean decides -1.
inline int forest_decide(const ForestModel& model, const std::vector<double>& x) {
  require_dimension(model.dimension, x.size());
  int sum = 0;
  for (const auto& tree : model.trees) sum += tree_decide(tree, x);
  return sum > 0 ? +1 : -1;
}

/// Smallest prefix length t whose OOB error improves by less than `tol`
/// anywhere in the next `window` entries; falls back to the curve length.
inline int select_tree_count(const std::vector<double>& oob_curve,
                             int window = 20, double tol = 0.0025) {
  const int len = static_cast<int>(oob_curve.size());
  if (len < window)
    throw ConfigError("select_tree_count: curve shorter than window");
  for (int t = 1; t + window <= len; ++t) {
    double future_min = oob_curve[static_cast<std::size_t>(t)];
    for (int u = t; u < t + window; ++u)
      future_min = std::min(future_min, oob_curve[static_cast<std::size_t>(u)]);
    if (oob_curve[static_cast<std::size_t>(t - 1)] - future_min < tol) return t;
  }
  return len;
}

inline void write_oob_csv(const std::vector<double>& curve, std::ostream& out) {
  out << "trees,oob_error\n";
  for (std::size_t t = 0; t < curve.size(); ++t)
    out << (t + 1) << ',' << curve[t] << '\n';
}

}  // namespace sectorcast

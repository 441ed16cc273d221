#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/modelsel.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

namespace detail {

inline double squared_distance(const std::vector<double>& a,
                               const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    sq += diff * diff;
  }
  return sq;
}

/// Neighbor order of `x` in `reference`: indices sorted by (distance,
/// record index), so ties at any rank resolve to the lower index.
inline std::vector<std::pair<double, int>> neighbor_order(
    const Dataset& reference, const std::vector<double>& x) {
  std::vector<std::pair<double, int>> order;
  order.reserve(reference.size());
  for (int i = 0; i < static_cast<int>(reference.size()); ++i)
    order.emplace_back(
        squared_distance(reference.records[static_cast<std::size_t>(i)].features, x), i);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

/// Bayes posterior estimate K_C/K: the fraction of the K nearest reference
/// records (Euclidean metric) labeled +1.
inline double knn_posterior(const Dataset& reference,
                            const std::vector<double>& x, int K) {
  const int n = static_cast<int>(reference.size());
  if (K < 1 || K > n)
    throw KTooLargeError("knn_posterior: K=" + std::to_string(K) +
                         " outside 1..n=" + std::to_string(n));
  require_dimension(reference.dim(), x.size());
  auto order = detail::neighbor_order(reference, x);
  int positive = 0;
  for (int r = 0; r < K; ++r)
    if (reference.records[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)]
            .label > 0)
      ++positive;
  return static_cast<double>(positive) / static_cast<double>(K);
}

/// Hard decision at the 0.5 posterior: tie decides -1.
inline int knn_decide(const Dataset& reference, const std::vector<double>& x,
                      int K) {
  return knn_posterior(reference, x, K) > 0.5 ? +1 : -1;
}

struct SelectKResult {
  int k_star = 1;
  std::vector<int> ks;
  std::vector<double> cv_errors;
};

/// First index attaining the curve minimum (the paper's first-minimum rule).
inline int first_minimum(const std::vector<int>& ks,
                         const std::vector<double>& errors) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < errors.size(); ++i)
    if (errors[i] < errors[best]) best = i;
  return ks[best];
}

/// 10-fold cross-validated neighbor count over k = 1..k_max, with k capped
/// at floor(9n/10) so every fold's reference set can honor it. Returns the
/// smallest k achieving the minimum mean error.
inline SelectKResult select_k(const Dataset& train, int k_max = 100,
                              int folds = 10, std::uint64_t seed = 0) {
  const int n = static_cast<int>(train.size());
  if (n < folds)
    throw TooFewRecordsError("select_k: need at least " +
                             std::to_string(folds) + " records, have " +
                             std::to_string(n));
  const int cap = (9 * n) / 10;
  const int k_hi = std::max(1, std::min(k_max, cap));

  FoldPlan plan = kfold_split(n, folds, seed);
  SelectKResult result;
  for (int k = 1; k <= k_hi; ++k) result.ks.push_back(k);
  result.cv_errors.assign(static_cast<std::size_t>(k_hi), 0.0);

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    Dataset reference = subset(train, fold_complement(plan, f));
    Dataset heldout = subset(train, plan.folds[f]);
    std::vector<double> fold_err(static_cast<std::size_t>(k_hi), 0.0);
    for (const auto& rec : heldout.records) {
      auto order = detail::neighbor_order(reference, rec.features);
      int positive = 0;
      for (int k = 1; k <= k_hi; ++k) {
        const int limit = std::min(k, static_cast<int>(order.size()));
        if (k <= limit &&
            reference.records[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)].second)]
                    .label > 0)
          ++positive;
        const double posterior =
            static_cast<double>(positive) / static_cast<double>(limit);
        const int decision = posterior > 0.5 ? +1 : -1;
        if (decision != rec.label) fold_err[static_cast<std::size_t>(k - 1)] += 1.0;
      }
    }
    for (int k = 1; k <= k_hi; ++k)
      result.cv_errors[static_cast<std::size_t>(k - 1)] +=
          fold_err[static_cast<std::size_t>(k - 1)] /
          static_cast<double>(heldout.size()) /
          static_cast<double>(plan.folds.size());
  }
  result.k_star = first_minimum(result.ks, result.cv_errors);
  return result;
}

struct KnnMember {
  std::vector<int> reference;  // sorted indices into the committee's train set
  int k = 1;
};

struct KnnCommittee {
  Dataset train;  // shared standardized reference data
  std::vector<KnnMember> members;
  int k_star = 1;
};

/// Bagged committee of weak k-NN learners: each member holds a uniform
/// random subset (without replacement) of ceil(0.632 n) training records
/// with k* clamped to the subset size.
inline KnnCommittee train_committee(const Dataset& train, int members,
                                    int k_star, std::uint64_t seed) {
  const int n = static_cast<int>(train.size());
  if (n == 0) throw EmptyTrainingError("train_committee: empty training set");
  if (members < 1) throw ConfigError("train_committee: members must be >= 1");
  if (k_star < 1) throw ConfigError("train_committee: k_star must be >= 1");

  const int subset_size =
      std::max(1, static_cast<int>(std::ceil(0.632 * static_cast<double>(n))));
  KnnCommittee committee;
  committee.train = train;
  committee.k_star = k_star;
  committee.members.reserve(static_cast<std::size_t>(members));
  for (int c = 0; c < members; ++c) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    KnnMember member;
    member.reference = sample_without_replacement(n, subset_size, rng);
    member.k = std::min(k_star, subset_size);
    committee.members.push_back(std::move(member));
  }
  return committee;
}

/// Unweighted majority over member hard decisions; tie decides -1.
inline int committee_predict(const KnnCommittee& committee,
                             const std::vector<double>& x) {
  require_dimension(committee.train.dim(), x.size());
  int votes = 0;
  std::vector<std::pair<double, int>> order;
  for (const auto& member : committee.members) {
    order.clear();
    order.reserve(member.reference.size());
    for (int i : member.reference)
      order.emplace_back(
          detail::squared_distance(
              committee.train.records[static_cast<std::size_t>(i)].features, x),
          i);
    const auto kth = order.begin() + member.k;
    std::partial_sort(order.begin(), kth, order.end());
    int positive = 0;
    for (int r = 0; r < member.k; ++r)
      if (committee.train.records[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)]
              .label > 0)
        ++positive;
    const double posterior =
        static_cast<double>(positive) / static_cast<double>(member.k);
    votes += posterior > 0.5 ? +1 : -1;
  }
  return votes > 0 ? +1 : -1;
}

inline void write_kcurve_csv(const SelectKResult& result, std::ostream& out) {
  out << "k,cv_error\n";
  for (std::size_t i = 0; i < result.ks.size(); ++i)
    out << result.ks[i] << ',' << result.cv_errors[i] << '\n';
}

}  // namespace sectorcast

#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/rng.hpp"

namespace sectorcast {

struct FoldPlan {
  std::vector<std::vector<int>> folds;  // disjoint index sets covering 0..n-1
  std::uint64_t seed = 0;
};

/// Random permutation dealt round-robin into k folds; sizes differ by at
/// most one.
inline FoldPlan kfold_split(int n, int k, std::uint64_t seed) {
  if (k < 2 || k > n)
    throw InvalidKError("kfold_split: need 2 <= k <= n, got k=" +
                        std::to_string(k) + ", n=" + std::to_string(n));
  std::mt19937_64 rng(seed);
  auto order = shuffled_indices(n, rng);
  FoldPlan plan;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i)
    plan.folds[static_cast<std::size_t>(i % k)].push_back(order[static_cast<std::size_t>(i)]);
  return plan;
}

inline std::vector<int> fold_complement(const FoldPlan& plan, std::size_t fold) {
  std::vector<int> idx;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    if (f == fold) continue;
    idx.insert(idx.end(), plan.folds[f].begin(), plan.folds[f].end());
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct GridResult {
  std::vector<double> candidates;
  std::vector<double> mean_errors;  // aligned with candidates
  double chosen = 0.0;
  std::vector<std::string> warnings;
};

/// A predictor is the hard +/-1 decision of a fitted learner.
using Predictor = std::function<int(const std::vector<double>&)>;

/// Five-fold selection of the kernel width shared by the SVM and the RVM.
/// `trainer(train, gamma, seed)` must return a Predictor. Folds whose
/// training complement is single-class are skipped with a warning; ties go
/// to the smaller gamma.
template <typename Trainer>
GridResult grid_search_gamma(Trainer&& trainer, const Dataset& train,
                             const std::vector<double>& grid = {0.5, 1.0, 2.0,
                                                                4.0},
                             int folds = 5, std::uint64_t seed = 0) {
  if (grid.empty()) throw ConfigError("grid_search_gamma: empty grid");
  const int n = static_cast<int>(train.size());
  FoldPlan plan = kfold_split(n, folds, derive_seed(seed, 0xF01D));

  GridResult result;
  result.candidates = grid;
  result.mean_errors.assign(grid.size(), 0.0);

  std::vector<std::size_t> usable;
  std::vector<Dataset> complements, heldouts;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    Dataset complement = subset(train, fold_complement(plan, f));
    if (!has_both_classes(complement)) {
      result.warnings.push_back("fold " + std::to_string(f) +
                                " skipped: single-class training complement");
      continue;
    }
    usable.push_back(f);
    complements.push_back(std::move(complement));
    heldouts.push_back(subset(train, plan.folds[f]));
  }
  if (usable.empty())
    throw DegenerateFoldError(
        "grid_search_gamma: every fold has a single-class complement");

  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (std::size_t u = 0; u < usable.size(); ++u) {
      Predictor predict = trainer(complements[u], grid[g],
                                  derive_seed(seed, (g + 1) * 1000 + usable[u]));
      int wrong = 0;
      for (const auto& rec : heldouts[u].records)
        if (predict(rec.features) != rec.label) ++wrong;
      total += static_cast<double>(wrong) /
               static_cast<double>(heldouts[u].records.size());
    }
    result.mean_errors[g] = total / static_cast<double>(usable.size());
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const bool better = result.mean_errors[g] < result.mean_errors[best];
    const bool tie_smaller = result.mean_errors[g] == result.mean_errors[best] &&
                             grid[g] < grid[best];
    if (better || tie_smaller) best = g;
  }
  result.chosen = grid[best];
  return result;
}

inline void write_grid_csv(const GridResult& result, std::ostream& out) {
  out << "gamma,mean_cv_error,chosen\n";
  for (std::size_t g = 0; g < result.candidates.size(); ++g)
    out << result.candidates[g] << ',' << result.mean_errors[g] << ','
        << (result.candidates[g] == result.chosen ? 1 : 0) << '\n';
}

}  // namespace sectorcast

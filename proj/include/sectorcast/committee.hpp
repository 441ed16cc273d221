#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"

namespace sectorcast {

/// A fitted constituent learner reduced to its hard +/-1 decision.
struct TrainedLearner {
  std::string name;
  std::function<int(const std::vector<double>&)> decide;
};

struct CommitteeModel {
  std::vector<TrainedLearner> learners;
  std::vector<double> alphas;    // boosting weights, clamped finite
  std::vector<double> epsilons;  // training error rates behind the alphas
  std::size_t dimension = 0;
};

/// Largest admissible |alpha|; reached when a learner's training error is
/// exactly 0 or 1.
inline double alpha_clamp() { return std::log(1e6); }

/// log((1-eps)/eps) clamped to +/- log(1e6).
inline double boosting_alpha(double epsilon) {
  const double cap = alpha_clamp();
  if (epsilon <= 0.0) return cap;
  if (epsilon >= 1.0) return -cap;
  const double alpha = std::log((1.0 - epsilon) / epsilon);
  return std::clamp(alpha, -cap, cap);
}

/// Evaluates each learner's misclassification count on the training set
/// (unit example weights) and assigns the boosting weights.
inline CommitteeModel fit_committee(std::vector<TrainedLearner> learners,
                                    const Dataset& train) {
  if (train.empty()) throw EmptyTrainingError("fit_committee: empty training set");
  CommitteeModel model;
  model.dimension = train.dim();
  model.alphas.reserve(learners.size());
  model.epsilons.reserve(learners.size());
  for (const auto& learner : learners) {
    int wrong = 0;
    for (const auto& rec : train.records)
      if (learner.decide(rec.features) != rec.label) ++wrong;
    const double epsilon =
        static_cast<double>(wrong) / static_cast<double>(train.size());
    model.epsilons.push_back(epsilon);
    model.alphas.push_back(boosting_alpha(epsilon));
  }
  model.learners = std::move(learners);
  return model;
}

/// Weighted sign vote sign(sum alpha_i yhat_i); an exact zero decides -1.
inline int committee_decide(const CommitteeModel& model,
                            const std::vector<double>& x) {
  require_dimension(model.dimension, x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < model.learners.size(); ++i)
    sum += model.alphas[i] * model.learners[i].decide(x);
  return sum > 0.0 ? +1 : -1;
}

/// Normalized vote margin sum(alpha_i yhat_i) / sum |alpha_i| in [-1,+1];
/// 0 when every alpha is zero.
inline double committee_margin(const CommitteeModel& model,
                               const std::vector<double>& x) {
  require_dimension(model.dimension, x.size());
  double sum = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < model.learners.size(); ++i) {
    sum += model.alphas[i] * model.learners[i].decide(x);
    mass += std::abs(model.alphas[i]);
  }
  return mass > 0.0 ? sum / mass : 0.0;
}

/// 1 - correct/total.
inline double error_rate(const std::vector<int>& predictions,
                         const std::vector<int>& truth) {
  if (predictions.size() != truth.size())
    throw LengthMismatchError("error_rate: prediction/truth length mismatch");
  if (predictions.empty()) throw EmptyInputError("error_rate: empty input");
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == truth[i]) ++correct;
  return 1.0 - static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace sectorcast

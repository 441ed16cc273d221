#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"

namespace sectorcast {

struct KernelParams {
  double gamma = 1.0;
};

/// RBF kernel exp(-gamma * ||x - z||^2).
inline double rbf(const std::vector<double>& x, const std::vector<double>& z,
                  double gamma) {
  require_dimension(x.size(), z.size());
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - z[j];
    sq += diff * diff;
  }
  return std::exp(-gamma * sq);
}

struct SupportVector {
  std::vector<double> x;
  int y = 0;
  double alpha = 0.0;
};

struct SvmModel {
  std::vector<SupportVector> support_vectors;  // alpha > 0 only
  double bias = 0.0;
  KernelParams kernel;
  double C = 2.0;
  bool converged = true;
  std::size_t dimension = 0;
};

struct SvmTrainOptions {
  double tolerance = 1e-3;       // KKT stopping tolerance on m(alpha)-M(alpha)
  long max_pair_updates = 100000;
  // When set, the dual objective is recorded after every pair update
  // (O(n^2) per step; use on small problems only).
  std::vector<double>* objective_trace = nullptr;
};

inline double svm_decision_value(const SvmModel& model,
                                 const std::vector<double>& x) {
  require_dimension(model.dimension, x.size());
  double value = model.bias;
  for (const auto& sv : model.support_vectors)
    value += sv.alpha * sv.y * rbf(x, sv.x, model.kernel.gamma);
  return value;
}

/// sign of the kernel expansion plus bias; an exact zero decides -1.
inline int svm_predict(const SvmModel& model, const std::vector<double>& x) {
  return svm_decision_value(model, x) > 0.0 ? +1 : -1;
}

/// Soft-margin RBF SVM trained by sequential minimal optimization with
/// maximal-violating-pair working set selection. The box constraint
/// 0 <= alpha_i <= C and the equality sum alpha_i y_i = 0 hold throughout;
/// iteration stops when the maximal KKT violation drops below `tolerance`
/// or the pair-update cap is hit (the model is then flagged unconverged).
inline SvmModel train_svm(const Dataset& train, double gamma, double C = 2.0,
                          const SvmTrainOptions& options = {}) {
  const int n = static_cast<int>(train.size());
  if (n == 0) throw EmptyTrainingError("train_svm: empty training set");
  if (!has_both_classes(train))
    throw SingleClassTrainingError("train_svm: one class absent");
  if (gamma <= 0.0) throw ConfigError("train_svm: gamma must be positive");
  if (C <= 0.0) throw ConfigError("train_svm: C must be positive");

  std::vector<double> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    y[static_cast<std::size_t>(i)] = train.records[static_cast<std::size_t>(i)].label;

  // Dense kernel matrix; training sets are quarterly cross-sections.
  std::vector<std::vector<double>> K(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    K[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
    for (int j = 0; j <= i; ++j) {
      const double v = rbf(train.records[static_cast<std::size_t>(i)].features,
                           train.records[static_cast<std::size_t>(j)].features, gamma);
      K[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      K[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
    }
  }

  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  // Gradient of the dual minimization form 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij.
  std::vector<double> grad(static_cast<std::size_t>(n), -1.0);

  auto dual_objective = [&]() {
    double lin = 0.0, quad = 0.0;
    for (int i = 0; i < n; ++i) {
      lin += alpha[static_cast<std::size_t>(i)];
      if (alpha[static_cast<std::size_t>(i)] == 0.0) continue;
      for (int j = 0; j < n; ++j)
        quad += alpha[static_cast<std::size_t>(i)] * alpha[static_cast<std::size_t>(j)] *
                y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
                K[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return lin - 0.5 * quad;
  };

  constexpr double kTau = 1e-12;
  bool converged = false;
  double violation_gap = std::numeric_limits<double>::infinity();
  long updates = 0;
  for (; updates < options.max_pair_updates; ++updates) {
    // Maximal violating pair.
    int i = -1, j = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const double v = -y[ts] * grad[ts];
      const bool in_up = (y[ts] > 0 && alpha[ts] < C) || (y[ts] < 0 && alpha[ts] > 0);
      const bool in_low = (y[ts] < 0 && alpha[ts] < C) || (y[ts] > 0 && alpha[ts] > 0);
      if (in_up && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    violation_gap = m_up - m_low;
    if (violation_gap <= options.tolerance) {
      converged = true;
      break;
    }

    const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
    const double old_ai = alpha[si], old_aj = alpha[sj];
    double quad_coef = K[si][si] + K[sj][sj] - 2.0 * K[si][sj];
    if (quad_coef <= 0.0) quad_coef = kTau;

    if (y[si] != y[sj]) {
      const double delta = (-grad[si] - grad[sj]) / quad_coef;
      const double diff = alpha[si] - alpha[sj];
      alpha[si] += delta;
      alpha[sj] += delta;
      if (diff > 0 && alpha[sj] < 0) {
        alpha[sj] = 0;
        alpha[si] = diff;
      } else if (diff <= 0 && alpha[si] < 0) {
        alpha[si] = 0;
        alpha[sj] = -diff;
      }
      if (diff > 0 && alpha[si] > C) {
        alpha[si] = C;
        alpha[sj] = C - diff;
      } else if (diff <= 0 && alpha[sj] > C) {
        alpha[sj] = C;
        alpha[si] = C + diff;
      }
    } else {
      const double delta = (grad[si] - grad[sj]) / quad_coef;
      const double sum = alpha[si] + alpha[sj];
      alpha[si] -= delta;
      alpha[sj] += delta;
      if (sum > C && alpha[si] > C) {
        alpha[si] = C;
        alpha[sj] = sum - C;
      } else if (sum <= C && alpha[sj] < 0) {
        alpha[sj] = 0;
        alpha[si] = sum;
      }
      if (sum > C && alpha[sj] > C) {
        alpha[sj] = C;
        alpha[si] = sum - C;
      } else if (sum <= C && alpha[si] < 0) {
        alpha[si] = 0;
        alpha[sj] = sum;
      }
    }

    const double dai = alpha[si] - old_ai;
    const double daj = alpha[sj] - old_aj;
    for (int t = 0; t < n; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      grad[ts] += y[ts] * (y[si] * K[ts][si] * dai + y[sj] * K[ts][sj] * daj);
    }
    if (options.objective_trace)
      options.objective_trace->push_back(dual_objective());
  }

  // Bias from margin support vectors; with none, the midpoint of the
  // bound-derived interval [M, m] of admissible biases.
  double bias;
  {
    double sum = 0.0;
    int count = 0;
    for (int t = 0; t < n; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      if (alpha[ts] > 0.0 && alpha[ts] < C) {
        sum += -y[ts] * grad[ts];
        ++count;
      }
    }
    if (count > 0) {
      bias = sum / count;
    } else {
      double m_up = -std::numeric_limits<double>::infinity();
      double m_low = std::numeric_limits<double>::infinity();
      for (int t = 0; t < n; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const double v = -y[ts] * grad[ts];
        const bool in_up = (y[ts] > 0 && alpha[ts] < C) || (y[ts] < 0 && alpha[ts] > 0);
        const bool in_low = (y[ts] < 0 && alpha[ts] < C) || (y[ts] > 0 && alpha[ts] > 0);
        if (in_up) m_up = std::max(m_up, v);
        if (in_low) m_low = std::min(m_low, v);
      }
      bias = 0.5 * (m_up + m_low);
    }
  }

  SvmModel model;
  model.kernel.gamma = gamma;
  model.C = C;
  model.bias = bias;
  model.converged = converged;
  model.dimension = train.dim();
  for (int t = 0; t < n; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    if (alpha[ts] > 0.0)
      model.support_vectors.push_back(
          {train.records[ts].features, train.records[ts].label, alpha[ts]});
  }
  return model;
}

}  // namespace sectorcast

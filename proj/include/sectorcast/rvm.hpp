#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sectorcast/dataset.hpp"
#include "sectorcast/errors.hpp"
#include "sectorcast/svm.hpp"  // rbf, KernelParams

namespace sectorcast {

/// Logistic sigmoid 1/(1+e^-theta).
inline double sigmoid(double theta) {
  if (theta >= 0.0) return 1.0 / (1.0 + std::exp(-theta));
  const double e = std::exp(theta);
  return e / (1.0 + e);
}

struct RelevanceVector {
  std::vector<double> x;
  double weight = 0.0;
  double precision = 0.0;  // alpha_i of the retained basis
};

struct RvmModel {
  std::vector<RelevanceVector> relevance_vectors;
  double bias = 0.0;
  double bias_precision = 0.0;
  KernelParams kernel;
  double threshold = 0.8;
  bool converged = true;
  std::size_t dimension = 0;
  /// Laplace evidence approximation recorded per outer iteration.
  std::vector<double> evidence_trace;
};

struct RvmTrainOptions {
  double threshold = 0.8;
  double prune_precision = 1e12;  // kernel bases with alpha above are dropped
  double precision_ceiling = 1e16;
  double alpha_log_tol = 1e-3;
  int max_outer_iterations = 1000;
  int max_irls_iterations = 50;
  double jitter = 1e-8;
};

inline double rvm_score(const RvmModel& model, const std::vector<double>& x) {
  require_dimension(model.dimension, x.size());
  double score = model.bias;
  for (const auto& rv : model.relevance_vectors)
    score += rv.weight * rbf(x, rv.x, model.kernel.gamma);
  return score;
}

/// sigma of the kernel expansion; always strictly inside (0,1).
inline double rvm_probability(const RvmModel& model,
                              const std::vector<double>& x) {
  double p = sigmoid(rvm_score(model, x));
  const double eps = 1e-15;
  return std::min(1.0 - eps, std::max(eps, p));
}

/// +1 iff the class probability strictly exceeds the threshold.
inline int rvm_predict(const RvmModel& model, const std::vector<double>& x,
                       double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("rvm_predict: threshold must be inside (0,1)");
  return rvm_probability(model, x) > threshold ? +1 : -1;
}

inline int rvm_predict(const RvmModel& model, const std::vector<double>& x) {
  return rvm_predict(model, x, model.threshold);
}

namespace detail {

inline double log_sigmoid(double theta) {
  // Stable log(sigma(theta)).
  return theta >= 0.0 ? -std::log1p(std::exp(-theta))
                      : theta - std::log1p(std::exp(theta));
}

}  // namespace detail

/// Sparse Bayesian RBF classifier in the style of Tipping's relevance
/// vector machine. Labels are remapped {-1,+1} -> {0,1}; the weight
/// posterior is approximated by a Laplace fit (IRLS with step halving on
/// the penalized log-likelihood) and the per-basis precisions follow the
/// evidence updates alpha_i <- gamma_i / w_i^2, gamma_i = 1 - alpha_i
/// Sigma_ii. Kernel bases whose precision exceeds the pruning cap are
/// removed; the bias basis is never pruned. Training is deterministic.
inline RvmModel train_rvm(const Dataset& train, double gamma,
                          const RvmTrainOptions& options = {}) {
  const int n = static_cast<int>(train.size());
  if (n == 0) throw EmptyTrainingError("train_rvm: empty training set");
  if (!has_both_classes(train))
    throw SingleClassTrainingError("train_rvm: one class absent");
  if (gamma <= 0.0) throw ConfigError("train_rvm: gamma must be positive");

  Eigen::VectorXd targets(n);
  for (int i = 0; i < n; ++i)
    targets(i) = train.records[static_cast<std::size_t>(i)].label > 0 ? 1.0 : 0.0;

  // Design matrix: bias column followed by one kernel column per record.
  const int m_full = n + 1;
  Eigen::MatrixXd design(n, m_full);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int j = 0; j < n; ++j)
      design(i, j + 1) = rbf(train.records[static_cast<std::size_t>(i)].features,
                             train.records[static_cast<std::size_t>(j)].features,
                             gamma);
  }

  std::vector<int> active(static_cast<std::size_t>(m_full));
  for (int j = 0; j < m_full; ++j) active[static_cast<std::size_t>(j)] = j;
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(m_full, 1.0);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(m_full);

  RvmModel model;
  model.kernel.gamma = gamma;
  model.threshold = options.threshold;
  model.dimension = train.dim();
  model.converged = false;

  auto penalized_loglik = [&](const Eigen::MatrixXd& phi,
                              const Eigen::VectorXd& a,
                              const Eigen::VectorXd& w) {
    Eigen::VectorXd eta = phi * w;
    double ll = 0.0;
    for (int i = 0; i < n; ++i)
      ll += targets(i) * detail::log_sigmoid(eta(i)) +
            (1.0 - targets(i)) * detail::log_sigmoid(-eta(i));
    return ll - 0.5 * w.dot(a.asDiagonal() * w);
  };

  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    const int m = static_cast<int>(active.size());
    Eigen::MatrixXd phi(n, m);
    Eigen::VectorXd a(m), w(m);
    for (int j = 0; j < m; ++j) {
      const int col = active[static_cast<std::size_t>(j)];
      phi.col(j) = design.col(col);
      a(j) = alpha(col);
      w(j) = weights(col);
    }

    // Laplace approximation: Newton/IRLS for the posterior mode.
    Eigen::MatrixXd hessian(m, m);
    double objective = penalized_loglik(phi, a, w);
    for (int irls = 0; irls < options.max_irls_iterations; ++irls) {
      Eigen::VectorXd eta = phi * w;
      Eigen::VectorXd p(n), b(n);
      for (int i = 0; i < n; ++i) {
        p(i) = sigmoid(eta(i));
        b(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
      }
      Eigen::VectorXd grad = phi.transpose() * (targets - p) - a.asDiagonal() * w;
      hessian = phi.transpose() * b.asDiagonal() * phi;
      hessian.diagonal() += a;

      Eigen::VectorXd step;
      double jitter = 0.0;
      for (;;) {
        Eigen::MatrixXd h = hessian;
        if (jitter > 0.0) h.diagonal().array() += jitter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() == Eigen::Success &&
            (ldlt.vectorD().array() > 0.0).all()) {
          step = ldlt.solve(grad);
          if (step.allFinite()) break;
        }
        jitter = jitter == 0.0 ? options.jitter : jitter * 10.0;
        if (jitter > 1e-2)
          throw NumericalFailureError(
              "train_rvm: Hessian factorization failed after jitter escalation");
      }

      if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
      double scale = 1.0;
      double candidate_obj = 0.0;
      bool improved = false;
      for (int halving = 0; halving < 30; ++halving) {
        Eigen::VectorXd w_try = w + scale * step;
        candidate_obj = penalized_loglik(phi, a, w_try);
        if (std::isfinite(candidate_obj) && candidate_obj >= objective - 1e-12) {
          w = w_try;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved) break;
      const bool converged_irls = std::abs(candidate_obj - objective) < 1e-9;
      objective = candidate_obj;
      if (converged_irls) break;
    }
    if (!w.allFinite())
      throw NumericalFailureError("train_rvm: non-finite posterior mode");

    // Posterior covariance at the mode (recompute Hessian at final w).
    {
      Eigen::VectorXd eta = phi * w;
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) {
        const double p = sigmoid(eta(i));
        b(i) = std::max(p * (1.0 - p), 1e-12);
      }
      hessian = phi.transpose() * b.asDiagonal() * phi;
      hessian.diagonal() += a;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    double jitter = 0.0;
    while (ldlt.info() != Eigen::Success ||
           !(ldlt.vectorD().array() > 0.0).all()) {
      jitter = jitter == 0.0 ? options.jitter : jitter * 10.0;
      if (jitter > 1e-2)
        throw NumericalFailureError(
            "train_rvm: covariance factorization failed after jitter escalation");
      Eigen::MatrixXd h = hessian;
      h.diagonal().array() += jitter;
      ldlt.compute(h);
    }
    Eigen::MatrixXd covariance =
        ldlt.solve(Eigen::MatrixXd::Identity(m, m));

    // Evidence (Laplace) for diagnostics and the monotonicity check.
    {
      double log_det_h = ldlt.vectorD().array().log().sum();
      double evidence = penalized_loglik(phi, a, w) - 0.5 * log_det_h +
                        0.5 * a.array().log().sum();
      model.evidence_trace.push_back(evidence);
    }

    // Evidence-based precision updates and pruning.
    Eigen::VectorXd alpha_new(m);
    for (int j = 0; j < m; ++j) {
      const double quality = 1.0 - a(j) * covariance(j, j);
      const double w2 = w(j) * w(j);
      double updated = w2 > 0.0 ? std::max(quality, 1e-12) / w2
                                : options.precision_ceiling;
      if (!std::isfinite(updated) || updated > options.precision_ceiling)
        updated = options.precision_ceiling;
      alpha_new(j) = std::max(updated, 1e-12);
    }

    std::vector<int> survivors;
    double max_log_change = 0.0;
    for (int j = 0; j < m; ++j) {
      const int col = active[static_cast<std::size_t>(j)];
      const bool prune =
          col != 0 && alpha_new(j) > options.prune_precision;
      if (prune) continue;
      max_log_change = std::max(
          max_log_change, std::abs(std::log(alpha_new(j)) - std::log(a(j))));
      survivors.push_back(col);
      alpha(col) = alpha_new(j);
      weights(col) = w(j);
    }
    const bool pruned_any = survivors.size() != active.size();
    active = std::move(survivors);

    if (!pruned_any && max_log_change < options.alpha_log_tol) {
      model.converged = true;
      break;
    }
  }

  // Assemble the sparse model from the surviving bases.
  for (int col : active) {
    if (col == 0) {
      model.bias = weights(0);
      model.bias_precision = alpha(0);
    } else {
      model.relevance_vectors.push_back(
          {train.records[static_cast<std::size_t>(col - 1)].features,
           weights(col), alpha(col)});
    }
  }
  return model;
}

}  // namespace sectorcast

#pragma once

#include <deque>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "tad/core.hpp"

namespace tad {

struct ConditionalModelConfig {
  /// Lags of the target used as regressors.
  Index ar_order = 1;
  /// Lags of each covariate beyond the contemporaneous value.
  Index covariate_lags = 0;
  double forgetting = 0.999;
  double ridge = 1e-3;
  bool intercept = true;
  /// Rate of the exponentially weighted absolute-residual scale.
  double scale_rate = 0.05;
  double scale_floor = 1e-9;

  void validate(Index covariates) const;
};

/// Scores x_t against a one-step recursive-least-squares prediction from
/// x_{t-1..t-p} and each covariate at t..t-q. Covariates at time t are
/// used; the target only up to t-1.
class ConditionalDetector {
 public:
  ConditionalDetector(const ConditionalModelConfig& config, Index covariates);

  std::optional<double> update(double x, std::span<const double> covariates);

  Index warmup() const { return max_lag() + regressors_; }
  Index regressors() const { return regressors_; }
  const Vector& coefficients() const { return theta_; }
  /// Residual of the most recent update; NaN before the first prediction.
  double last_residual() const { return last_residual_; }

 private:
  Index max_lag() const { return std::max(config_.ar_order, config_.covariate_lags); }
  void solve();

  ConditionalModelConfig config_;
  Index covariates_;
  Index regressors_;
  std::deque<double> x_history_;                 // most recent first
  std::deque<Vector> covariate_history_;         // most recent first
  Eigen::MatrixXd gram_;
  Vector moment_;
  Vector theta_;
  double scale_ = 0.0;
  bool scale_ready_ = false;
  double last_residual_ = kMissing;
  Index seen_ = 0;
};

struct JointModelConfig {
  /// Exponential weight of the mean/covariance update.
  double rate = 0.01;
  double ridge = 1e-6;
  bool difference = true;
  /// Unscored leading points; 0 selects (difference ? 1 : 0) + 10 * dimension.
  Index warmup = 0;
};

/// Mahalanobis distance of the (optionally differenced) vector under an
/// exponentially weighted mean and covariance of the prefix.
class JointDetector {
 public:
  JointDetector(const JointModelConfig& config, Index dimension);

  std::optional<double> update(std::span<const double> v);
  Index warmup() const { return warmup_; }

 private:
  JointModelConfig config_;
  Index dimension_;
  Index warmup_;
  Index seen_ = 0;
  Index updates_ = 0;
  Vector previous_;
  Vector mean_;
  Eigen::MatrixXd cov_;
};

ScoreSequence run_conditional(const ConditionalModelConfig& config, const CovariateSet& data);
ScoreSequence run_joint(const JointModelConfig& config, const CovariateSet& data);

}  // namespace tad

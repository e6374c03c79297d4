#include "tad/conditional.hpp"

#include <cmath>
#include <vector>

namespace tad {

void ConditionalModelConfig::validate(Index covariates) const {
  if (ar_order < 0 || covariate_lags < 0) fail(ErrorKind::spec, "lags must be non-negative");
  if (ar_order + covariates < 1) fail(ErrorKind::spec, "conditional model needs at least one regressor");
  if (!(forgetting > 0.9 && forgetting <= 1.0)) fail(ErrorKind::spec, "forgetting must lie in (0.9, 1]");
  if (!(ridge > 0.0)) fail(ErrorKind::spec, "ridge must be positive");
  if (!(scale_rate > 0.0 && scale_rate <= 1.0)) fail(ErrorKind::spec, "scale rate must lie in (0, 1]");
  if (!(scale_floor > 0.0)) fail(ErrorKind::spec, "scale floor must be positive");
}

ConditionalDetector::ConditionalDetector(const ConditionalModelConfig& config, Index covariates)
    : config_(config), covariates_(covariates) {
  config_.validate(covariates);
  regressors_ = (config_.intercept ? 1 : 0) + config_.ar_order + covariates_ * (config_.covariate_lags + 1);
  gram_ = Eigen::MatrixXd::Zero(regressors_, regressors_);
  moment_ = Vector::Zero(regressors_);
  theta_ = Vector::Zero(regressors_);
}

void ConditionalDetector::solve() {
  // Plain normal equations when they are well posed; the ridge only steps in
  // for (near-)singular Gram matrices.
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram_);
  const Vector d = ldlt.vectorD();
  const double top = d.cwiseAbs().maxCoeff();
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && top > 0 && d.minCoeff() > 1e-10 * top) {
    theta_ = ldlt.solve(moment_);
    return;
  }
  Eigen::MatrixXd regularized = gram_;
  regularized.diagonal().array() += config_.ridge;
  theta_ = regularized.ldlt().solve(moment_);
}

std::optional<double> ConditionalDetector::update(double x, std::span<const double> covariates) {
  if (static_cast<Index>(covariates.size()) != covariates_) {
    fail(ErrorKind::alignment, "covariate vector has the wrong dimension");
  }
  if (!std::isfinite(x)) fail(ErrorKind::input, "conditional detector needs finite target values");
  Vector c(covariates_);
  for (Index j = 0; j < covariates_; ++j) {
    c[j] = covariates[static_cast<std::size_t>(j)];
    if (!std::isfinite(c[j])) fail(ErrorKind::input, "conditional detector needs finite covariates");
  }
  covariate_history_.push_front(std::move(c));
  if (static_cast<Index>(covariate_history_.size()) > config_.covariate_lags + 1) covariate_history_.pop_back();

  std::optional<double> score;
  if (seen_ >= max_lag()) {
    Vector phi(regressors_);
    Index k = 0;
    if (config_.intercept) phi[k++] = 1.0;
    for (Index l = 0; l < config_.ar_order; ++l) phi[k++] = x_history_[static_cast<std::size_t>(l)];
    for (Index j = 0; j < covariates_; ++j) {
      for (Index l = 0; l <= config_.covariate_lags; ++l) phi[k++] = covariate_history_[static_cast<std::size_t>(l)][j];
    }
    const double residual = x - theta_.dot(phi);
    last_residual_ = residual;
    if (seen_ >= warmup()) score = std::abs(residual) / std::max(scale_, config_.scale_floor);
    if (scale_ready_) {
      scale_ += config_.scale_rate * (std::abs(residual) - scale_);
    } else {
      scale_ = std::abs(residual);
      scale_ready_ = true;
    }
    gram_ = config_.forgetting * gram_ + phi * phi.transpose();
    moment_ = config_.forgetting * moment_ + phi * x;
    solve();
  }
  x_history_.push_front(x);
  if (static_cast<Index>(x_history_.size()) > std::max<Index>(config_.ar_order, 1)) x_history_.pop_back();
  ++seen_;
  return score;
}

JointDetector::JointDetector(const JointModelConfig& config, Index dimension)
    : config_(config), dimension_(dimension) {
  if (dimension < 1) fail(ErrorKind::spec, "joint detector needs dimension >= 1");
  if (!(config.rate > 0.0 && config.rate < 1.0)) fail(ErrorKind::spec, "joint rate must lie in (0, 1)");
  if (!(config.ridge > 0.0)) fail(ErrorKind::spec, "ridge must be positive");
  warmup_ = config.warmup > 0 ? config.warmup : (config.difference ? 1 : 0) + 10 * dimension;
  mean_ = Vector::Zero(dimension);
  cov_ = Eigen::MatrixXd::Zero(dimension, dimension);
}

std::optional<double> JointDetector::update(std::span<const double> v) {
  if (static_cast<Index>(v.size()) != dimension_) fail(ErrorKind::alignment, "joint vector has the wrong dimension");
  const Eigen::Map<const Vector> raw(v.data(), dimension_);
  if (!raw.allFinite()) fail(ErrorKind::input, "joint detector needs finite values");
  const Index t = seen_++;
  Vector z = raw;
  if (config_.difference) {
    const Vector prev = previous_;
    previous_ = raw;
    if (t == 0) return std::nullopt;
    z = raw - prev;
  }

  std::optional<double> score;
  if (updates_ == 0) {
    mean_ = z;
  } else {
    const Vector delta = z - mean_;
    if (t >= warmup_) {
      Eigen::MatrixXd s = cov_;
      s.diagonal().array() += config_.ridge;
      score = std::sqrt(std::max(0.0, delta.dot(s.ldlt().solve(delta))));
    }
    mean_ += config_.rate * delta;
    cov_ = (1.0 - config_.rate) * (cov_ + config_.rate * delta * delta.transpose());
  }
  ++updates_;
  return score;
}

namespace {

ScoreSequence from_optional(const std::vector<std::optional<double>>& s) {
  ScoreSequence out;
  out.scores.resize(static_cast<Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.scores[static_cast<Index>(i)] = s[i] ? *s[i] : kMissing;
    if (!s[i]) out.warmup = static_cast<Index>(i) + 1;
  }
  return out;
}

}  // namespace

ScoreSequence run_conditional(const ConditionalModelConfig& config, const CovariateSet& data) {
  const Eigen::MatrixXd m = data.as_matrix();
  ConditionalDetector det(config, data.covariate_count());
  std::vector<std::optional<double>> scores;
  std::vector<double> row(static_cast<std::size_t>(data.covariate_count()));
  for (Index t = 0; t < m.rows(); ++t) {
    for (Index j = 0; j < data.covariate_count(); ++j) row[static_cast<std::size_t>(j)] = m(t, j + 1);
    scores.push_back(det.update(m(t, 0), row));
  }
  return from_optional(scores);
}

ScoreSequence run_joint(const JointModelConfig& config, const CovariateSet& data) {
  const Eigen::MatrixXd m = data.as_matrix();
  JointDetector det(config, m.cols());
  std::vector<std::optional<double>> scores;
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index t = 0; t < m.rows(); ++t) {
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(t, j);
    scores.push_back(det.update(row));
  }
  return from_optional(scores);
}

}  // namespace tad

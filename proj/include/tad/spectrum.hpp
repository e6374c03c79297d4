#pragma once

#include <complex>
#include <memory>
#include <span>

#include "tad/core.hpp"

namespace tad {

/// Discrete Fourier transforms of a fixed length. Lengths whose prime
/// factors are all small go straight to Eigen's FFT; any other length is
/// evaluated through Bluestein's chirp-z convolution so the cost stays
/// O(n log n) for prime sizes.
class DftPlan {
 public:
  explicit DftPlan(Index n);
  ~DftPlan();
  DftPlan(DftPlan&&) noexcept;
  DftPlan& operator=(DftPlan&&) noexcept;

  Index size() const { return n_; }

  Eigen::VectorXcd forward(std::span<const double> x) const;
  Eigen::VectorXcd forward(const Eigen::VectorXcd& x) const;
  /// Unnormalized inverse; divide by size() for the true inverse.
  Eigen::VectorXcd backward(const Eigen::VectorXcd& x) const;

  /// |X_j|^2 for j = 0..n/2.
  Vector power(std::span<const double> x) const;

 private:
  struct Impl;
  Index n_;
  std::unique_ptr<Impl> impl_;
};

/// Biased autocovariance sums r(l) = sum_t y_t y_{t+l} for l = 0..max_lag,
/// computed by a zero-padded FFT.
Vector autocovariance_sums(std::span<const double> centered, Index max_lag);

}  // namespace tad

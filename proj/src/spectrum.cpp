#include "tad/spectrum.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace tad {

namespace {

Index next_pow2(Index n) {
  Index m = 1;
  while (m < n) m <<= 1;
  return m;
}

bool smooth(Index n) {
  for (Index p : {2, 3, 5}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

}  // namespace

struct DftPlan::Impl {
  mutable Eigen::FFT<double> fft;
  bool direct = true;
  Index padded = 0;
  Eigen::VectorXcd chirp;          // exp(-i pi k^2 / n)
  Eigen::VectorXcd kernel_spectrum;  // FFT of the conjugate chirp, length padded
};

DftPlan::DftPlan(Index n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n <= 0) fail(ErrorKind::spec, "transform length must be positive");
  impl_->fft.SetFlag(Eigen::FFT<double>::Unscaled);
  impl_->direct = smooth(n);
  if (impl_->direct) return;

  const Index m = next_pow2(2 * n - 1);
  impl_->padded = m;
  impl_->chirp.resize(n);
  const auto two_n = static_cast<std::int64_t>(2 * n);
  for (Index k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small for large k.
    const auto kk = static_cast<std::int64_t>(k);
    const auto r = static_cast<double>((kk * kk) % two_n);
    const double angle = -std::numbers::pi * r / static_cast<double>(n);
    impl_->chirp[k] = std::polar(1.0, angle);
  }
  Eigen::VectorXcd kernel = Eigen::VectorXcd::Zero(m);
  kernel[0] = std::conj(impl_->chirp[0]);
  for (Index k = 1; k < n; ++k) {
    kernel[k] = std::conj(impl_->chirp[k]);
    kernel[m - k] = kernel[k];
  }
  impl_->kernel_spectrum.resize(m);
  impl_->fft.fwd(impl_->kernel_spectrum, kernel);
}

DftPlan::~DftPlan() = default;
DftPlan::DftPlan(DftPlan&&) noexcept = default;
DftPlan& DftPlan::operator=(DftPlan&&) noexcept = default;

Eigen::VectorXcd DftPlan::forward(const Eigen::VectorXcd& x) const {
  if (x.size() != n_) fail(ErrorKind::spec, "transform input has the wrong length");
  Eigen::VectorXcd out(n_);
  if (n_ == 1) return x;
  if (impl_->direct) {
    impl_->fft.fwd(out, x);
    return out;
  }
  const Index m = impl_->padded;
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(m);
  a.head(n_) = x.cwiseProduct(impl_->chirp);
  Eigen::VectorXcd spec(m);
  impl_->fft.fwd(spec, a);
  spec = spec.cwiseProduct(impl_->kernel_spectrum);
  Eigen::VectorXcd conv(m);
  impl_->fft.inv(conv, spec);
  out = conv.head(n_).cwiseProduct(impl_->chirp) / static_cast<double>(m);
  return out;
}

Eigen::VectorXcd DftPlan::forward(std::span<const double> x) const {
  Eigen::VectorXcd c(static_cast<Index>(x.size()));
  for (Index i = 0; i < c.size(); ++i) c[i] = x[static_cast<std::size_t>(i)];
  return forward(c);
}

Eigen::VectorXcd DftPlan::backward(const Eigen::VectorXcd& x) const {
  return forward(Eigen::VectorXcd(x.conjugate())).conjugate();
}

Vector DftPlan::power(std::span<const double> x) const {
  const Eigen::VectorXcd f = forward(x);
  return f.head(n_ / 2 + 1).cwiseAbs2();
}

Vector autocovariance_sums(std::span<const double> centered, Index max_lag) {
  const auto n = static_cast<Index>(centered.size());
  const Index m = next_pow2(2 * n);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(m);
  for (Index i = 0; i < n; ++i) a[i] = centered[static_cast<std::size_t>(i)];
  Eigen::VectorXcd spec(m);
  fft.fwd(spec, a);
  Eigen::VectorXcd p = spec.cwiseAbs2().cast<std::complex<double>>();
  Eigen::VectorXcd r(m);
  fft.inv(r, p);
  return r.head(max_lag + 1).real() / static_cast<double>(m);
}

}  // namespace tad

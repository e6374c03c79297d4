#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "tad/core.hpp"

namespace tad {

/// Normalized sample autocorrelation at lags 0..max_lag (values[0] == 1).
struct AcfProfile {
  Vector values;

  Index max_lag() const { return values.size() - 1; }
  double operator[](Index lag) const { return values[lag]; }
};

/// min(n / 2, 1000).
Index default_max_lag(Index n);

/// Biased sample ACF with mean removal. Throws degenerate_scale on zero
/// variance and input on missing values.
AcfProfile autocorrelation(std::span<const double> x, Index max_lag);

template <typename Derived>
AcfProfile autocorrelation(const Eigen::MatrixBase<Derived>& x, Index max_lag) {
  const Vector v = x;
  return autocorrelation(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), max_lag);
}

AcfProfile autocorrelation(const TimeSeries& series, Index max_lag);

// Peak selection on an ACF profile. A peak is a lag strictly above its left
// neighbour and strictly above the first differing value to its right, so a
// plateau counts once at its leftmost lag. The last lag is never a peak.

std::vector<Index> acf_peaks(const AcfProfile& acf, Index min_lag = 2);
std::optional<Index> first_acf_peak(const AcfProfile& acf, Index min_lag = 2);
/// Peak with the largest ACF value; ties go to the smaller lag.
std::optional<Index> highest_acf_peak(const AcfProfile& acf, Index min_lag = 2);
/// First peak whose value exceeds every ACF value at all larger lags.
std::optional<Index> first_non_dominated_peak(const AcfProfile& acf, Index min_lag = 2);

struct PeriodEstimate {
  std::optional<Index> period;
  std::string method;
  double elapsed = 0.0;  ///< seconds
};

struct AcfMethodOptions {
  std::optional<Index> max_lag;
  /// Smallest lag considered by the highest-peak rule.
  Index min_lag = 10;
};

struct PeaksOptions {
  std::optional<Index> max_lag;
  Index min_lag = 2;
};

struct FftOptions {
  std::optional<Index> max_lag;
  /// First-difference before the transform instead of only removing the mean.
  bool difference = false;
};

struct AutoperiodOptions {
  std::optional<Index> max_lag;
  Index shuffles = 100;
  double percentile = 0.99;
  std::uint64_t seed = 0;
};

/// Highest ACF peak in [min_lag, max_lag].
PeriodEstimate detect_period_acf(std::span<const double> x, const AcfMethodOptions& options = {});
/// First non-dominated ACF peak.
PeriodEstimate detect_period_peaks(std::span<const double> x, const PeaksOptions& options = {});
/// round(n / j*) for the periodogram bin j* of maximal power among bins whose
/// period lies in [2, max_lag].
PeriodEstimate detect_period_fft(std::span<const double> x, const FftOptions& options = {});
/// Periodogram hints above a permutation threshold, validated on ACF hills.
PeriodEstimate detect_period_autoperiod(std::span<const double> x, const AutoperiodOptions& options = {});

/// Lag of the hill top when the ACF over [lo, hi] is best fit by a rising
/// then falling pair of line segments; nullopt otherwise.
std::optional<Index> acf_hill_top(const AcfProfile& acf, Index lo, Index hi, double hint);

}  // namespace tad

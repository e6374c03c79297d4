#include "tad/periodicity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tad/rng.hpp"
#include "tad/spectrum.hpp"

namespace tad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Mean-removed copy; throws on missing values or zero spread.
Vector centered(std::span<const double> x) {
  const Eigen::Map<const Vector> v(x.data(), static_cast<Index>(x.size()));
  if (v.array().isNaN().any()) fail(ErrorKind::input, "period detection does not accept missing values");
  if (!v.allFinite()) fail(ErrorKind::input, "period detection needs finite values");
  Vector y = v.array() - v.mean();
  const double spread = y.cwiseAbs().maxCoeff();
  if (!(spread > 1e-12 * v.cwiseAbs().maxCoeff())) {
    fail(ErrorKind::degenerate_scale, "series has zero variance");
  }
  return y;
}

AcfProfile normalized_acf(const Vector& y, Index max_lag) {
  Vector r = autocovariance_sums(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), max_lag);
  return AcfProfile{r / r[0]};
}

Index resolve_max_lag(std::optional<Index> requested, Index n) {
  const Index lag = requested.value_or(default_max_lag(n));
  if (lag < 1 || lag >= n) fail(ErrorKind::range, "max_lag must satisfy 1 <= max_lag < n");
  return lag;
}

/// End of the plateau starting at lag i.
Index plateau_end(const AcfProfile& acf, Index i) {
  Index j = i;
  while (j + 1 <= acf.max_lag() && acf[j + 1] == acf[i]) ++j;
  return j;
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

Index default_max_lag(Index n) { return std::min<Index>(n / 2, 1000); }

AcfProfile autocorrelation(std::span<const double> x, Index max_lag) {
  const auto n = static_cast<Index>(x.size());
  if (max_lag < 1 || max_lag >= n) fail(ErrorKind::range, "autocorrelation needs 1 <= max_lag < length");
  return normalized_acf(centered(x), max_lag);
}

AcfProfile autocorrelation(const TimeSeries& series, Index max_lag) {
  const Vector& v = series.values();
  return autocorrelation(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), max_lag);
}

std::vector<Index> acf_peaks(const AcfProfile& acf, Index min_lag) {
  std::vector<Index> peaks;
  Index i = std::max<Index>(min_lag, 1);
  while (i < acf.max_lag()) {
    if (acf[i] > acf[i - 1]) {
      const Index j = plateau_end(acf, i);
      if (j + 1 <= acf.max_lag() && acf[j + 1] < acf[i]) peaks.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

std::optional<Index> first_acf_peak(const AcfProfile& acf, Index min_lag) {
  const auto peaks = acf_peaks(acf, min_lag);
  if (peaks.empty()) return std::nullopt;
  return peaks.front();
}

std::optional<Index> highest_acf_peak(const AcfProfile& acf, Index min_lag) {
  std::optional<Index> best;
  for (Index p : acf_peaks(acf, min_lag)) {
    if (!best || acf[p] > acf[*best]) best = p;
  }
  return best;
}

std::optional<Index> first_non_dominated_peak(const AcfProfile& acf, Index min_lag) {
  const Index L = acf.max_lag();
  // suffix_max[l] = max ACF over lags l..L
  Vector suffix_max(L + 2);
  suffix_max[L + 1] = -std::numeric_limits<double>::infinity();
  for (Index l = L; l >= 0; --l) suffix_max[l] = std::max(acf[l], suffix_max[l + 1]);
  for (Index p : acf_peaks(acf, min_lag)) {
    if (acf[p] > suffix_max[plateau_end(acf, p) + 1]) return p;
  }
  return std::nullopt;
}

PeriodEstimate detect_period_acf(std::span<const double> x, const AcfMethodOptions& options) {
  const auto start = Clock::now();
  const auto n = static_cast<Index>(x.size());
  const AcfProfile acf = autocorrelation(x, resolve_max_lag(options.max_lag, n));
  return {highest_acf_peak(acf, options.min_lag), "acf", seconds_since(start)};
}

PeriodEstimate detect_period_peaks(std::span<const double> x, const PeaksOptions& options) {
  const auto start = Clock::now();
  const auto n = static_cast<Index>(x.size());
  const AcfProfile acf = autocorrelation(x, resolve_max_lag(options.max_lag, n));
  return {first_non_dominated_peak(acf, options.min_lag), "peaks", seconds_since(start)};
}

PeriodEstimate detect_period_fft(std::span<const double> x, const FftOptions& options) {
  const auto start = Clock::now();
  const auto n = static_cast<Index>(x.size());
  if (n < 8) fail(ErrorKind::range, "FFT period detection needs at least 8 points");
  const Index max_lag = resolve_max_lag(options.max_lag, n);
  Vector y = centered(x);
  if (options.difference) {
    Vector d = y.tail(n - 1) - y.head(n - 1);
    y = d.array() - d.mean();
  }
  const Index m = y.size();
  const DftPlan plan(m);
  const Vector power = plan.power(std::span<const double>(y.data(), static_cast<std::size_t>(m)));

  std::optional<Index> best_bin;
  for (Index j = 1; j <= m / 2; ++j) {
    const double period = static_cast<double>(m) / static_cast<double>(j);
    if (period < 2.0 || period > static_cast<double>(max_lag)) continue;
    if (!best_bin || power[j] > power[*best_bin]) best_bin = j;
  }
  std::optional<Index> period;
  if (best_bin) {
    period = static_cast<Index>(std::lround(static_cast<double>(m) / static_cast<double>(*best_bin)));
  }
  return {period, "fft", seconds_since(start)};
}

std::optional<Index> acf_hill_top(const AcfProfile& acf, Index lo, Index hi, double hint) {
  lo = std::max<Index>(lo, 1);
  hi = std::min(hi, acf.max_lag());
  const Index m = hi - lo + 1;
  if (m < 4) return std::nullopt;

  // Prefix sums over (u, a) with u = lag - lo.
  Vector su(m + 1), suu(m + 1), sa(m + 1), saa(m + 1), sua(m + 1);
  su[0] = suu[0] = sa[0] = saa[0] = sua[0] = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double u = static_cast<double>(i);
    const double a = acf[lo + i];
    su[i + 1] = su[i] + u;
    suu[i + 1] = suu[i] + u * u;
    sa[i + 1] = sa[i] + a;
    saa[i + 1] = saa[i] + a * a;
    sua[i + 1] = sua[i] + u * a;
  }
  struct Fit {
    double slope;
    double sse;
  };
  auto fit = [&](Index b, Index e) {  // points b..e inclusive
    const double k = static_cast<double>(e - b + 1);
    const double u = su[e + 1] - su[b], uu = suu[e + 1] - suu[b];
    const double a = sa[e + 1] - sa[b], aa = saa[e + 1] - saa[b];
    const double ua = sua[e + 1] - sua[b];
    const double sxx = uu - u * u / k;
    const double sxy = ua - u * a / k;
    const double syy = aa - a * a / k;
    return Fit{sxy / sxx, std::max(0.0, syy - sxy * sxy / sxx)};
  };

  Index best_split = -1;
  double best_sse = std::numeric_limits<double>::infinity();
  for (Index s = 1; s + 1 < m; ++s) {
    const double sse = fit(0, s).sse + fit(s, m - 1).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_split = s;
    }
  }
  if (best_split < 0) return std::nullopt;
  if (!(fit(0, best_split).slope > 0.0 && fit(best_split, m - 1).slope < 0.0)) return std::nullopt;

  std::optional<Index> nearest;
  for (Index p : acf_peaks(acf, lo)) {
    if (p > hi) break;
    if (!nearest || std::abs(static_cast<double>(p) - hint) < std::abs(static_cast<double>(*nearest) - hint)) {
      nearest = p;
    }
  }
  return nearest;
}

PeriodEstimate detect_period_autoperiod(std::span<const double> x, const AutoperiodOptions& options) {
  const auto start = Clock::now();
  const auto n = static_cast<Index>(x.size());
  if (n < 8) fail(ErrorKind::range, "Autoperiod needs at least 8 points");
  if (options.shuffles < 1 || !(options.percentile > 0.0 && options.percentile < 1.0)) {
    fail(ErrorKind::spec, "Autoperiod needs shuffles >= 1 and percentile in (0, 1)");
  }
  const Index max_lag = resolve_max_lag(options.max_lag, n);
  const Vector y = centered(x);
  const DftPlan plan(n);
  const Vector power = plan.power(std::span<const double>(y.data(), static_cast<std::size_t>(n)));

  Rng rng(options.seed);
  std::vector<double> shuffled(y.data(), y.data() + n);
  std::vector<double> max_power;
  max_power.reserve(static_cast<std::size_t>(options.shuffles));
  for (Index s = 0; s < options.shuffles; ++s) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    const Vector p = plan.power(shuffled);
    max_power.push_back(p.tail(p.size() - 1).maxCoeff());
  }
  const double threshold = quantile(std::move(max_power), options.percentile);

  const AcfProfile acf = normalized_acf(y, max_lag);
  std::optional<Index> best;
  const double nd = static_cast<double>(n);
  for (Index j = 1; j <= n / 2; ++j) {
    if (!(power[j] > threshold)) continue;
    const double hint = nd / static_cast<double>(j);
    const Index lo = std::max<Index>(2, static_cast<Index>(std::floor(nd / static_cast<double>(j + 1))));
    const Index hi = j > 1 ? std::min<Index>(max_lag, static_cast<Index>(std::ceil(nd / static_cast<double>(j - 1))))
                           : max_lag;
    if (lo > max_lag) continue;
    const auto top = acf_hill_top(acf, lo, hi, hint);
    if (top && (!best || acf[*top] > acf[*best] || (acf[*top] == acf[*best] && *top < *best))) best = top;
  }
  return {best, "autoperiod", seconds_since(start)};
}

}  // namespace tad

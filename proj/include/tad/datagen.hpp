#pragma once

#include <cstdint>
#include <optional>

#include "tad/core.hpp"

namespace tad {

/// Synthetic periodicity benchmark: x_t = w(t) + noise * e(t) + strength * w'(t mod k)
/// with w, w' Gaussian random walks and e i.i.d. standard Gaussian.
struct PeriodicGeneratorConfig {
  Index min_length = 60;
  Index max_length = 10000;
  double noise_min = 0.0;
  double noise_max = 10.0;
  double strength_min = 0.0;
  double strength_max = 10.0;
  std::uint64_t seed = 0;

  // Overrides for controlled experiments. Unset means "draw".
  std::optional<Index> length;
  std::optional<Index> period;
  std::optional<double> noise_strength;
  std::optional<double> period_strength;
  /// Set false to zero the trend walk w.
  bool include_trend_walk = true;

  void validate() const;
};

struct LabeledSeries {
  TimeSeries series;
  Labels labels;
  std::optional<Index> true_period;
  double noise_strength = 0.0;
  double period_strength = 0.0;
};

/// True when k satisfies 3 < k < n / 10.
bool valid_period_for_length(Index k, Index n);

/// Draw number `stream` of the generator. Deterministic in (config.seed, stream).
LabeledSeries generate_periodic(const PeriodicGeneratorConfig& config, std::uint64_t stream = 0);

enum class InjectionNoise {
  offset,        ///< x_t +/- delta * sd(x)
  uniform_range, ///< uniform over [min(x), max(x)]
  constant,      ///< replaced by a fixed value
};

struct InjectionConfig {
  double epsilon = 0.01;
  InjectionNoise noise = InjectionNoise::offset;
  double offset_scale = 5.0;
  double constant = 0.0;
  std::uint64_t seed = 0;
};

/// Bernoulli(epsilon) position mask used by inject_point_anomalies. Depends
/// only on (n, epsilon, seed).
Labels anomaly_positions(Index n, double epsilon, std::uint64_t seed);

/// Mixture (1 - eps) p + eps q applied pointwise. Replaced indices are labeled 1.
LabeledSeries inject_point_anomalies(const TimeSeries& series, const InjectionConfig& config);

}  // namespace tad

#include "tad/datagen.hpp"

#include <cmath>

#include "tad/rng.hpp"

namespace tad {

namespace {

// Position and value draws use separate streams so the anomaly mask never
// depends on the series values.
constexpr std::uint64_t kPositionStream = 0x5051;
constexpr std::uint64_t kValueStream = 0x5652;

}  // namespace

bool valid_period_for_length(Index k, Index n) { return k > 3 && 10 * k < n; }

void PeriodicGeneratorConfig::validate() const {
  if (min_length < 41 || max_length < min_length) {
    fail(ErrorKind::spec, "generator length range must satisfy 41 <= min <= max");
  }
  if (noise_min < 0 || noise_max < noise_min || strength_min < 0 || strength_max < strength_min) {
    fail(ErrorKind::spec, "generator strength ranges must be non-negative and ordered");
  }
  if (length && *length < 1) fail(ErrorKind::spec, "generator length override must be positive");
  if (period) {
    const Index n = length.value_or(min_length);
    if (!length || !valid_period_for_length(*period, n)) {
      fail(ErrorKind::spec, "period override needs a length override with 3 < k < n/10");
    }
  }
}

LabeledSeries generate_periodic(const PeriodicGeneratorConfig& config, std::uint64_t stream) {
  config.validate();
  Rng rng(config.seed, stream);

  const Index n = config.length ? *config.length : rng.integer(config.min_length, config.max_length);
  // Largest k with 10k < n.
  const Index k_max = (n - 1) / 10;
  const Index k = config.period ? *config.period : rng.integer(4, k_max);
  const double noise = config.noise_strength ? *config.noise_strength
                                             : rng.uniform(config.noise_min, config.noise_max);
  const double strength = config.period_strength
                              ? *config.period_strength
                              : rng.uniform(config.strength_min, config.strength_max);

  Vector trend(n);
  double level = 0.0;
  for (Index t = 0; t < n; ++t) {
    level += rng.normal();
    trend[t] = level;
  }
  if (!config.include_trend_walk) trend.setZero();

  Vector cycle(k);
  level = 0.0;
  for (Index t = 0; t < k; ++t) {
    level += rng.normal();
    cycle[t] = level;
  }

  Vector x(n);
  for (Index t = 0; t < n; ++t) {
    x[t] = trend[t] + noise * rng.normal() + strength * cycle[t % k];
  }
  return LabeledSeries{TimeSeries(0, 1, std::move(x)), Labels(static_cast<std::size_t>(n), 0), k,
                       noise, strength};
}

Labels anomaly_positions(Index n, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail(ErrorKind::spec, "epsilon must lie in [0, 1]");
  Rng rng(seed, kPositionStream);
  Labels mask(static_cast<std::size_t>(n), 0);
  for (auto& m : mask) m = rng.uniform() < epsilon ? 1 : 0;
  return mask;
}

LabeledSeries inject_point_anomalies(const TimeSeries& series, const InjectionConfig& config) {
  const Index n = series.size();
  if (n < 1) fail(ErrorKind::input, "cannot inject anomalies into an empty series");
  if (series.has_missing()) fail(ErrorKind::input, "cannot inject anomalies into a series with missing values");

  const Vector& x = series.values();
  double scale = 0.0;
  if (config.noise == InjectionNoise::offset) {
    if (n >= 2) scale = std::sqrt((x.array() - x.mean()).square().sum() / static_cast<double>(n - 1));
    if (!(scale > 0.0)) fail(ErrorKind::degenerate_scale, "offset injection needs a series with positive spread");
  }
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();

  Labels labels = anomaly_positions(n, config.epsilon, config.seed);
  Rng rng(config.seed, kValueStream);
  Vector out = x;
  for (Index t = 0; t < n; ++t) {
    if (!labels[static_cast<std::size_t>(t)]) continue;
    switch (config.noise) {
      case InjectionNoise::offset: {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        out[t] = x[t] + sign * config.offset_scale * scale;
        break;
      }
      case InjectionNoise::uniform_range:
        out[t] = rng.uniform(lo, hi);
        break;
      case InjectionNoise::constant:
        out[t] = config.constant;
        break;
    }
  }
  return LabeledSeries{TimeSeries(series.start(), series.interval(), std::move(out)), std::move(labels),
                       std::nullopt, 0.0, 0.0};
}

}  // namespace tad

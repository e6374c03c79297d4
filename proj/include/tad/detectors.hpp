#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include "tad/core.hpp"

namespace tad {

enum class DetectorKind { spectral_residual, ewma_residual, left_discord, kmeans_window };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view name);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::spectral_residual;
  /// Sliding window length; nullopt selects it from the data ("auto").
  std::optional<Index> window = 128;
  /// Points buffered before an automatic window is chosen.
  Index auto_probe = 512;
  /// Window used when the automatic choice finds no period.
  Index auto_fallback = 125;

  // spectral residual
  Index sr_filter_width = 3;
  Index sr_padding = 5;
  Index sr_lookahead = 5;

  // ewma residual
  double ewma_alpha = 0.1;
  double scale_floor = 1e-9;

  // k-means over sliding windows
  Index kmeans_clusters = 2;
  /// Refit every this many points; 0 means every `window` points.
  Index kmeans_cadence = 0;
  Index kmeans_max_train = 512;
  Index kmeans_iterations = 25;

  // left discord
  /// Earlier windows considered; 0 means the whole prefix.
  Index discord_history = 0;

  void validate() const;
};

/// Stateful per-point scorer. The score returned for x_t depends only on
/// x_1..x_t and the configuration; nullopt marks a warmup point.
class StreamingDetector {
 public:
  virtual ~StreamingDetector() = default;

  /// Consumes exactly one point and returns exactly one score.
  virtual std::optional<double> update(double x) = 0;
  /// Leading points that are never scored. For automatic windows this is the
  /// probe length plus the inner detector's warmup, and is only final once
  /// the probe is complete.
  virtual Index warmup() const = 0;
  virtual DetectorKind kind() const = 0;
};

std::unique_ptr<StreamingDetector> make_detector(const DetectorConfig& config);

/// One streaming pass; equivalent to rescoring every prefix from scratch.
ScoreSequence run_streaming(const DetectorConfig& config, std::span<const double> x);
ScoreSequence run_streaming(const DetectorConfig& config, const TimeSeries& series);

/// Fits once on the whole series and scores every point.
ScoreSequence run_batch(const DetectorConfig& config, std::span<const double> x);
ScoreSequence run_batch(const DetectorConfig& config, const TimeSeries& series);

/// Window chosen by the automatic rule for this prefix (first non-dominated
/// ACF peak, else config.auto_fallback).
Index resolve_auto_window(const DetectorConfig& config, std::span<const double> prefix);

/// Spectral-residual saliency of `x`. `x` is extended with `padding`
/// extrapolated points before the transform; the returned map covers only
/// the original points.
Vector spectral_saliency(std::span<const double> x, Index filter_width, Index padding, Index lookahead);

}  // namespace tad

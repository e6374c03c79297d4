#include "tad/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tad/periodicity.hpp"
#include "tad/spectrum.hpp"

namespace tad {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::spectral_residual: return "spectral_residual";
    case DetectorKind::ewma_residual: return "ewma_residual";
    case DetectorKind::left_discord: return "left_discord";
    case DetectorKind::kmeans_window: return "kmeans_window";
  }
  return "unknown";
}

DetectorKind parse_detector_kind(std::string_view name) {
  if (name == "sr" || name == "spectral_residual") return DetectorKind::spectral_residual;
  if (name == "ewma" || name == "ewma_residual") return DetectorKind::ewma_residual;
  if (name == "discord" || name == "left_discord") return DetectorKind::left_discord;
  if (name == "kmeans" || name == "kmeans_window") return DetectorKind::kmeans_window;
  fail(ErrorKind::spec, "unknown detector '" + std::string(name) + "'");
}

void DetectorConfig::validate() const {
  if (window && *window < 2) fail(ErrorKind::spec, "detector window must be at least 2");
  if (!window && (auto_probe < 8 || auto_fallback < 2)) {
    fail(ErrorKind::spec, "automatic window needs auto_probe >= 8 and auto_fallback >= 2");
  }
  if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) fail(ErrorKind::spec, "ewma alpha must lie in (0, 1]");
  if (!(scale_floor > 0.0)) fail(ErrorKind::spec, "scale floor must be positive");
  if (sr_filter_width < 1 || sr_padding < 0 || sr_lookahead < 1) {
    fail(ErrorKind::spec, "spectral residual needs filter width >= 1, padding >= 0, lookahead >= 1");
  }
  if (kmeans_clusters < 1 || kmeans_cadence < 0 || kmeans_max_train < 1 || kmeans_iterations < 1) {
    fail(ErrorKind::spec, "invalid k-means parameters");
  }
  if (discord_history < 0) fail(ErrorKind::spec, "discord history must be non-negative");
}

namespace {

constexpr double kEps = 1e-8;

void check_finite(double x) {
  if (!std::isfinite(x)) fail(ErrorKind::input, "detectors do not accept missing or non-finite values");
}

/// Trailing moving average; the first entries average over what is available.
Vector trailing_average(const Vector& v, Index width) {
  Vector out(v.size());
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= width) acc -= v[i - width];
    out[i] = acc / static_cast<double>(std::min(i + 1, width));
  }
  return out;
}

/// Appends `padding` copies of the value extrapolated from the points before
/// the newest: the value `lookahead` steps back plus the mean gradient times
/// lookahead. Leaving the newest point out of the extrapolation keeps a spike
/// there from being continued into the padding.
Vector extend(std::span<const double> x, Index padding, Index lookahead) {
  const auto n = static_cast<Index>(x.size());
  Vector out(n + padding);
  for (Index i = 0; i < n; ++i) out[i] = x[static_cast<std::size_t>(i)];
  if (padding == 0) return out;
  const Index last = std::max<Index>(n - 2, 0);
  const Index m = std::min(lookahead, last);
  double next = x[static_cast<std::size_t>(last)];
  if (m >= 1) {
    double g = 0.0;
    for (Index i = 1; i <= m; ++i) {
      g += (x[static_cast<std::size_t>(last)] - x[static_cast<std::size_t>(last - i)]) / static_cast<double>(i);
    }
    g /= static_cast<double>(m);
    next = x[static_cast<std::size_t>(last - m + 1)] + g * static_cast<double>(m);
  }
  out.tail(padding).setConstant(next);
  return out;
}

Vector saliency_with_plan(const Vector& extended, const DftPlan& plan, Index filter_width) {
  Eigen::VectorXcd f = plan.forward(std::span<const double>(extended.data(), static_cast<std::size_t>(extended.size())));
  const Index m = f.size();
  Vector mag = f.cwiseAbs();
  std::vector<bool> tiny(static_cast<std::size_t>(m));
  Vector log_mag(m);
  for (Index j = 0; j < m; ++j) {
    tiny[static_cast<std::size_t>(j)] = mag[j] <= kEps;
    if (tiny[static_cast<std::size_t>(j)]) mag[j] = kEps;
    log_mag[j] = tiny[static_cast<std::size_t>(j)] ? 0.0 : std::log(mag[j]);
  }
  const Vector residual = log_mag - trailing_average(log_mag, filter_width);
  for (Index j = 0; j < m; ++j) {
    f[j] = tiny[static_cast<std::size_t>(j)] ? std::complex<double>(0.0, 0.0)
                                             : f[j] * (std::exp(residual[j]) / mag[j]);
  }
  const Eigen::VectorXcd wave = plan.backward(f) / static_cast<double>(m);
  return wave.cwiseAbs();
}

double relative_saliency(double s, double mean) { return std::abs(s - mean) / std::max(mean, kEps); }

// ---------------------------------------------------------------------------

class SpectralResidualDetector final : public StreamingDetector {
 public:
  SpectralResidualDetector(const DetectorConfig& c, Index window)
      : config_(c), window_(window), plan_(window + c.sr_padding) {
    buffer_.reserve(static_cast<std::size_t>(2 * window));
  }

  std::optional<double> update(double x) override {
    check_finite(x);
    buffer_.push_back(x);
    if (static_cast<Index>(buffer_.size()) > 2 * window_) {
      buffer_.erase(buffer_.begin(), buffer_.end() - window_);
    }
    if (static_cast<Index>(buffer_.size()) < window_) return std::nullopt;
    const std::span<const double> w(buffer_.data() + buffer_.size() - static_cast<std::size_t>(window_),
                                    static_cast<std::size_t>(window_));
    const Vector ext = extend(w, config_.sr_padding, config_.sr_lookahead);
    const Vector s = saliency_with_plan(ext, plan_, config_.sr_filter_width).head(window_);
    return relative_saliency(s[window_ - 1], s.mean());
  }

  Index warmup() const override { return window_ - 1; }
  DetectorKind kind() const override { return DetectorKind::spectral_residual; }

 private:
  DetectorConfig config_;
  Index window_;
  DftPlan plan_;
  std::vector<double> buffer_;
};

class EwmaResidualDetector final : public StreamingDetector {
 public:
  explicit EwmaResidualDetector(const DetectorConfig& c) : alpha_(c.ewma_alpha), floor_(c.scale_floor) {}

  std::optional<double> update(double x) override {
    check_finite(x);
    if (!started_) {
      level_ = x;
      started_ = true;
      return std::nullopt;
    }
    const double residual = x - level_;
    // The first residual seeds the scale, so the second point scores 1 (or 0).
    if (!scaled_) {
      scale_ = std::abs(residual);
      scaled_ = true;
    }
    const double score = std::abs(residual) / std::max(scale_, floor_);
    level_ += alpha_ * residual;
    scale_ += alpha_ * (std::abs(residual) - scale_);
    return score;
  }

  Index warmup() const override { return 1; }
  DetectorKind kind() const override { return DetectorKind::ewma_residual; }

 private:
  double alpha_;
  double floor_;
  bool started_ = false;
  bool scaled_ = false;
  double level_ = 0.0;
  double scale_ = 0.0;
};

/// Window statistics shared by the discord and k-means detectors.
struct WindowStats {
  double mean;
  double sd;
};

WindowStats window_stats(const double* w, Index len) {
  const Eigen::Map<const Vector> v(w, len);
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(len));
  return {mean, sd};
}

bool flat(const WindowStats& s) { return !(s.sd > 1e-12 * std::max(1.0, std::abs(s.mean))); }

double window_distance(const double* a, const WindowStats& sa, const double* b, const WindowStats& sb, Index len) {
  double acc = 0.0;
  if (flat(sa) || flat(sb)) {
    for (Index i = 0; i < len; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  } else {
    for (Index i = 0; i < len; ++i) {
      const double d = (a[i] - sa.mean) / sa.sd - (b[i] - sb.mean) / sb.sd;
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

class LeftDiscordDetector final : public StreamingDetector {
 public:
  LeftDiscordDetector(const DetectorConfig& c, Index window) : window_(window), history_(c.discord_history) {}

  std::optional<double> update(double x) override {
    check_finite(x);
    values_.push_back(x);
    const auto t = static_cast<Index>(values_.size()) - 1;
    if (t + 1 >= window_) stats_.push_back(window_stats(values_.data() + (t - window_ + 1), window_));
    if (t + 1 < 2 * window_) return std::nullopt;

    // Windows are indexed by their end e; stats_[e - window_ + 1].
    const double* newest = values_.data() + (t - window_ + 1);
    const WindowStats& sn = stats_.back();
    Index first_end = window_ - 1;
    if (history_ > 0) first_end = std::max(first_end, t - window_ - history_ + 1);
    double best = std::numeric_limits<double>::infinity();
    for (Index e = first_end; e <= t - window_; ++e) {
      const double d = window_distance(newest, sn, values_.data() + (e - window_ + 1),
                                       stats_[static_cast<std::size_t>(e - window_ + 1)], window_);
      best = std::min(best, d);
    }
    return best;
  }

  Index warmup() const override { return 2 * window_ - 1; }
  DetectorKind kind() const override { return DetectorKind::left_discord; }

 private:
  Index window_;
  Index history_;
  std::vector<double> values_;
  std::vector<WindowStats> stats_;
};

/// Lloyd's algorithm over the rows of `windows`. Centroids start from `init`
/// when it has the right shape, else from a deterministic farthest-point seed.
Eigen::MatrixXd lloyd(const Eigen::MatrixXd& windows, Index k, Index iterations, const Eigen::MatrixXd& init) {
  const Index n = windows.rows();
  k = std::min(k, n);
  Eigen::MatrixXd centroids;
  if (init.rows() == k && init.cols() == windows.cols()) {
    centroids = init;
  } else {
    centroids.resize(k, windows.cols());
    centroids.row(0) = windows.row(0);
    Vector nearest = (windows.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (Index c = 1; c < k; ++c) {
      Index far = 0;
      nearest.maxCoeff(&far);
      centroids.row(c) = windows.row(far);
      nearest = nearest.cwiseMin((windows.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
  }
  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  for (Index it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centroids.rowwise() - windows.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, windows.cols());
    Vector counts = Vector::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += windows.row(i);
      counts[assign[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / counts[c];
    }
  }
  return centroids;
}

double nearest_centroid(const Eigen::MatrixXd& centroids, const double* window, Index len) {
  const Eigen::Map<const Eigen::RowVectorXd> w(window, len);
  return std::sqrt((centroids.rowwise() - w).rowwise().squaredNorm().minCoeff());
}

Eigen::MatrixXd collect_windows(const std::vector<double>& values, Index first_end, Index last_end, Index len) {
  Eigen::MatrixXd out(last_end - first_end + 1, len);
  for (Index e = first_end; e <= last_end; ++e) {
    out.row(e - first_end) = Eigen::Map<const Eigen::RowVectorXd>(values.data() + (e - len + 1), len);
  }
  return out;
}

class KMeansWindowDetector final : public StreamingDetector {
 public:
  KMeansWindowDetector(const DetectorConfig& c, Index window)
      : window_(window),
        k_(c.kmeans_clusters),
        cadence_(c.kmeans_cadence > 0 ? c.kmeans_cadence : window),
        max_train_(c.kmeans_max_train),
        iterations_(c.kmeans_iterations) {}

  std::optional<double> update(double x) override {
    check_finite(x);
    values_.push_back(x);
    const auto seen = static_cast<Index>(values_.size());
    const Index t = seen - 1;
    if (seen <= warmup()) return std::nullopt;
    // Refits happen on a fixed index schedule and only see windows ending
    // before t.
    if ((seen - warmup() - 1) % cadence_ == 0) {
      const Index last_end = t - 1;
      const Index first_end = std::max(window_ - 1, last_end - max_train_ + 1);
      centroids_ = lloyd(collect_windows(values_, first_end, last_end, window_), k_, iterations_, centroids_);
    }
    return nearest_centroid(centroids_, values_.data() + (t - window_ + 1), window_);
  }

  Index warmup() const override { return k_ * window_; }
  DetectorKind kind() const override { return DetectorKind::kmeans_window; }

 private:
  Index window_;
  Index k_;
  Index cadence_;
  Index max_train_;
  Index iterations_;
  std::vector<double> values_;
  Eigen::MatrixXd centroids_;
};

std::unique_ptr<StreamingDetector> make_fixed(const DetectorConfig& c, Index window) {
  switch (c.kind) {
    case DetectorKind::spectral_residual: return std::make_unique<SpectralResidualDetector>(c, window);
    case DetectorKind::ewma_residual: return std::make_unique<EwmaResidualDetector>(c);
    case DetectorKind::left_discord: return std::make_unique<LeftDiscordDetector>(c, window);
    case DetectorKind::kmeans_window: return std::make_unique<KMeansWindowDetector>(c, window);
  }
  return nullptr;
}

/// Buffers a probe prefix, picks the window from it, then replays the probe
/// into a fixed-window detector.
class AutoWindowDetector final : public StreamingDetector {
 public:
  explicit AutoWindowDetector(const DetectorConfig& c) : config_(c) {}

  std::optional<double> update(double x) override {
    check_finite(x);
    if (inner_) {
      auto s = inner_->update(x);
      ++seen_;
      return seen_ <= config_.auto_probe ? std::nullopt : s;
    }
    probe_.push_back(x);
    ++seen_;
    if (seen_ < config_.auto_probe) return std::nullopt;
    inner_ = make_fixed(config_, resolve_auto_window(config_, probe_));
    for (double v : probe_) inner_->update(v);
    probe_.clear();
    return std::nullopt;
  }

  Index warmup() const override {
    return inner_ ? std::max(config_.auto_probe, inner_->warmup()) : config_.auto_probe;
  }
  DetectorKind kind() const override { return config_.kind; }

 private:
  DetectorConfig config_;
  std::unique_ptr<StreamingDetector> inner_;
  std::vector<double> probe_;
  Index seen_ = 0;
};

ScoreSequence collect(std::span<const std::optional<double>> scores) {
  ScoreSequence out;
  out.scores.resize(static_cast<Index>(scores.size()));
  bool scored = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i]) {
      scored = true;
      out.scores[static_cast<Index>(i)] = *scores[i];
    } else {
      if (scored) fail(ErrorKind::protocol, "detector emitted a warmup sentinel after scoring began");
      out.scores[static_cast<Index>(i)] = kMissing;
      ++out.warmup;
    }
  }
  return out;
}

std::span<const double> as_span(const TimeSeries& s) {
  return {s.values().data(), static_cast<std::size_t>(s.size())};
}

}  // namespace

Vector spectral_saliency(std::span<const double> x, Index filter_width, Index padding, Index lookahead) {
  const auto n = static_cast<Index>(x.size());
  if (n < 1) return Vector();
  const Vector ext = extend(x, padding, lookahead);
  const DftPlan plan(ext.size());
  return saliency_with_plan(ext, plan, filter_width).head(n);
}

Index resolve_auto_window(const DetectorConfig& config, std::span<const double> prefix) {
  if (prefix.size() < 8) return config.auto_fallback;
  try {
    const auto est = detect_period_peaks(prefix);
    if (est.period && *est.period >= 2) return *est.period;
  } catch (const Error&) {
    // constant probe: no period
  }
  return config.auto_fallback;
}

std::unique_ptr<StreamingDetector> make_detector(const DetectorConfig& config) {
  config.validate();
  if (!config.window && config.kind != DetectorKind::ewma_residual) {
    return std::make_unique<AutoWindowDetector>(config);
  }
  return make_fixed(config, config.window.value_or(2));
}

ScoreSequence run_streaming(const DetectorConfig& config, std::span<const double> x) {
  auto detector = make_detector(config);
  std::vector<std::optional<double>> scores;
  scores.reserve(x.size());
  for (double v : x) scores.push_back(detector->update(v));
  return collect(scores);
}

ScoreSequence run_streaming(const DetectorConfig& config, const TimeSeries& series) {
  return run_streaming(config, as_span(series));
}

ScoreSequence run_batch(const DetectorConfig& config, std::span<const double> x) {
  config.validate();
  for (double v : x) check_finite(v);
  const auto n = static_cast<Index>(x.size());
  std::vector<std::optional<double>> scores(x.size());
  const Index window = config.window ? *config.window
                                     : resolve_auto_window(config, x);

  switch (config.kind) {
    case DetectorKind::spectral_residual: {
      if (n == 0) break;
      const Vector s = spectral_saliency(x, config.sr_filter_width, config.sr_padding, config.sr_lookahead);
      const double mean = s.mean();
      for (Index t = 0; t < n; ++t) scores[static_cast<std::size_t>(t)] = relative_saliency(s[t], mean);
      break;
    }
    case DetectorKind::ewma_residual: {
      // Same one-step forecasts as the streaming form, one global scale.
      std::vector<double> residuals(x.size(), 0.0);
      double level = n > 0 ? x[0] : 0.0;
      double total = 0.0;
      for (Index t = 1; t < n; ++t) {
        const double r = x[static_cast<std::size_t>(t)] - level;
        residuals[static_cast<std::size_t>(t)] = r;
        total += std::abs(r);
        level += config.ewma_alpha * r;
      }
      const double scale = n > 1 ? total / static_cast<double>(n - 1) : 0.0;
      for (Index t = 1; t < n; ++t) {
        scores[static_cast<std::size_t>(t)] =
            std::abs(residuals[static_cast<std::size_t>(t)]) / std::max(scale, config.scale_floor);
      }
      break;
    }
    case DetectorKind::left_discord: {
      if (n < 2 * window) break;
      std::vector<WindowStats> stats;
      for (Index e = window - 1; e < n; ++e) stats.push_back(window_stats(x.data() + (e - window + 1), window));
      for (Index t = window - 1; t < n; ++t) {
        double best = std::numeric_limits<double>::infinity();
        for (Index e = window - 1; e < n; ++e) {
          if (std::abs(e - t) < window) continue;
          best = std::min(best, window_distance(x.data() + (t - window + 1), stats[static_cast<std::size_t>(t - window + 1)],
                                                x.data() + (e - window + 1), stats[static_cast<std::size_t>(e - window + 1)],
                                                window));
        }
        scores[static_cast<std::size_t>(t)] = best;
      }
      break;
    }
    case DetectorKind::kmeans_window: {
      if (n < window) break;
      const std::vector<double> values(x.begin(), x.end());
      const Eigen::MatrixXd windows = collect_windows(values, window - 1, n - 1, window);
      const Eigen::MatrixXd centroids = lloyd(windows, config.kmeans_clusters, config.kmeans_iterations, {});
      for (Index t = window - 1; t < n; ++t) {
        scores[static_cast<std::size_t>(t)] = nearest_centroid(centroids, x.data() + (t - window + 1), window);
      }
      break;
    }
  }
  return collect(scores);
}

ScoreSequence run_batch(const DetectorConfig& config, const TimeSeries& series) {
  return run_batch(config, as_span(series));
}

}  // namespace tad

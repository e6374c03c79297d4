#include "tad/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tad {

std::string_view to_string(ThresholdKind kind) {
  switch (kind) {
    case ThresholdKind::fixed_value: return "fixed_value";
    case ThresholdKind::trailing_percentile: return "trailing_percentile";
    case ThresholdKind::k_sigma: return "k_sigma";
    case ThresholdKind::feedback_adaptive: return "feedback_adaptive";
  }
  return "unknown";
}

ThresholdKind parse_threshold_kind(std::string_view name) {
  if (name == "fixed" || name == "fixed_value") return ThresholdKind::fixed_value;
  if (name == "percentile" || name == "trailing_percentile") return ThresholdKind::trailing_percentile;
  if (name == "ksigma" || name == "k_sigma") return ThresholdKind::k_sigma;
  if (name == "adaptive" || name == "feedback_adaptive") return ThresholdKind::feedback_adaptive;
  fail(ErrorKind::spec, "unknown threshold kind '" + std::string(name) + "'");
}

void ThresholdStrategy::validate() const {
  if (!std::isfinite(value)) fail(ErrorKind::spec, "threshold value must be finite");
  if (!(percentile > 0.0 && percentile < 1.0)) fail(ErrorKind::spec, "percentile must lie in (0, 1)");
  if (horizon < 0 || reservoir < 1) fail(ErrorKind::spec, "horizon must be >= 0 and reservoir >= 1");
  if (!(k > 0.0)) fail(ErrorKind::spec, "k must be positive");
  if (min_history < 1) fail(ErrorKind::spec, "min_history must be at least 1");
  if (!(up > 1.0) || !(down > 0.0 && down <= 1.0)) fail(ErrorKind::spec, "need up > 1 and 0 < down <= 1");
}

Thresholder::Thresholder(ThresholdStrategy strategy)
    : strategy_(strategy), adaptive_(strategy.value), rng_(strategy.seed) {
  strategy_.validate();
}

namespace {

double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void sorted_insert(std::vector<double>& sorted, double v) {
  sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), v), v);
}

void sorted_erase(std::vector<double>& sorted, double v) {
  sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), v));
}

}  // namespace

double Thresholder::current_threshold() const {
  switch (strategy_.kind) {
    case ThresholdKind::fixed_value: return strategy_.value;
    case ThresholdKind::feedback_adaptive: return adaptive_;
    case ThresholdKind::k_sigma: {
      if (absorbed_ < std::max<Index>(strategy_.min_history, 2)) return kMissing;
      const double sd = std::sqrt(m2_ / static_cast<double>(absorbed_));
      return mean_ + strategy_.k * sd;
    }
    case ThresholdKind::trailing_percentile: {
      if (absorbed_ < strategy_.min_history || sorted_.empty()) return kMissing;
      return sorted_quantile(sorted_, strategy_.percentile);
    }
  }
  return kMissing;
}

bool Thresholder::decide(std::optional<double> score) {
  const Index index = position_++;
  if (!score) return false;
  if (!std::isfinite(*score)) fail(ErrorKind::input, "threshold received a non-finite score");
  const double threshold = current_threshold();
  const bool flag = !is_missing(threshold) && *score > threshold;
  if (flag) awaiting_review_.insert(index);
  absorb(*score);
  return flag;
}

void Thresholder::absorb(double score) {
  ++absorbed_;
  switch (strategy_.kind) {
    case ThresholdKind::fixed_value:
    case ThresholdKind::feedback_adaptive:
      break;
    case ThresholdKind::k_sigma: {
      const double delta = score - mean_;
      mean_ += delta / static_cast<double>(absorbed_);
      m2_ += delta * (score - mean_);
      break;
    }
    case ThresholdKind::trailing_percentile: {
      if (strategy_.horizon > 0) {
        trailing_.push_back(score);
        sorted_insert(sorted_, score);
        if (static_cast<Index>(trailing_.size()) > strategy_.horizon) {
          sorted_erase(sorted_, trailing_.front());
          trailing_.pop_front();
        }
      } else if (static_cast<Index>(reservoir_.size()) < strategy_.reservoir) {
        reservoir_.push_back(score);
        sorted_insert(sorted_, score);
      } else {
        // Algorithm R: keep each of the first `absorbed_` scores with equal probability.
        const auto slot = rng_.integer(0, absorbed_ - 1);
        if (slot < strategy_.reservoir) {
          auto& old = reservoir_[static_cast<std::size_t>(slot)];
          sorted_erase(sorted_, old);
          old = score;
          sorted_insert(sorted_, score);
        }
      }
      break;
    }
  }
}

void Thresholder::feedback(Index index, bool is_anomaly) {
  const auto it = awaiting_review_.find(index);
  if (it == awaiting_review_.end()) {
    fail(ErrorKind::protocol, "feedback for point " + std::to_string(index) + " which was not flagged or was already reviewed");
  }
  awaiting_review_.erase(it);
  if (strategy_.kind != ThresholdKind::feedback_adaptive) return;
  adaptive_ *= is_anomaly ? strategy_.down : strategy_.up;
}

double oracle_best_threshold(const ScoreSequence& scores, const Labels& labels) {
  validate_labels(labels, scores.size());
  std::vector<std::pair<double, int>> pts;
  Index positives = 0;
  for (Index t = scores.warmup; t < scores.size(); ++t) {
    pts.emplace_back(scores.scores[t], labels[static_cast<std::size_t>(t)]);
    positives += labels[static_cast<std::size_t>(t)];
  }
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first > b.first; });
  // Flag everything strictly above the threshold; candidate thresholds sit
  // just below each distinct score.
  double best_f1 = -1.0;
  double best = std::numeric_limits<double>::infinity();
  Index tp = 0, fp = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    tp += pts[i].second;
    fp += 1 - pts[i].second;
    if (i + 1 < pts.size() && pts[i + 1].first == pts[i].first) continue;
    const double f1 = positives > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + positives) : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = i + 1 < pts.size() ? pts[i + 1].first : -std::numeric_limits<double>::infinity();
    }
  }
  return best;
}

}  // namespace tad

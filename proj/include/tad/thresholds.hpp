#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include "tad/core.hpp"
#include "tad/rng.hpp"

namespace tad {

enum class ThresholdKind { fixed_value, trailing_percentile, k_sigma, feedback_adaptive };

std::string_view to_string(ThresholdKind kind);
ThresholdKind parse_threshold_kind(std::string_view name);

struct ThresholdStrategy {
  ThresholdKind kind = ThresholdKind::fixed_value;
  /// Fixed threshold, or the starting threshold of feedback_adaptive.
  double value = 0.5;

  // trailing_percentile
  double percentile = 0.999;
  /// Exact quantile over the last `horizon` scores; 0 uses the reservoir.
  Index horizon = 0;
  Index reservoir = 4096;
  std::uint64_t seed = 0;

  // k_sigma
  double k = 3.0;

  /// trailing_percentile and k_sigma stay silent until this many scores.
  Index min_history = 30;

  // feedback_adaptive
  double up = 1.1;
  double down = 0.98;

  void validate() const;
};

/// Turns a score stream into decisions. The threshold at t depends only on
/// earlier scores and on feedback already received.
class Thresholder {
 public:
  explicit Thresholder(ThresholdStrategy strategy);

  /// Decides for the next point, then absorbs its score. A warmup sentinel
  /// always yields 0 and leaves the state untouched.
  bool decide(std::optional<double> score);

  /// One-sided feedback for point `index`, which must have been flagged and
  /// not yet reviewed.
  void feedback(Index index, bool is_anomaly);

  /// Threshold that applies to the next score. NaN while silent.
  double current_threshold() const;
  /// Points seen so far, sentinels included.
  Index position() const { return position_; }
  const ThresholdStrategy& strategy() const { return strategy_; }

 private:
  void absorb(double score);

  ThresholdStrategy strategy_;
  Index position_ = 0;
  Index absorbed_ = 0;
  double adaptive_ = 0.0;
  // k_sigma running moments
  double mean_ = 0.0;
  double m2_ = 0.0;
  // trailing_percentile
  std::deque<double> trailing_;
  std::vector<double> reservoir_;
  std::vector<double> sorted_;
  Rng rng_;
  std::set<Index> awaiting_review_;
};

/// Oracle threshold maximizing point-wise F1 given ground truth. Diagnostic
/// only: it peeks at labels no deployed alerting rule can see.
double oracle_best_threshold(const ScoreSequence& scores, const Labels& labels);

}  // namespace tad

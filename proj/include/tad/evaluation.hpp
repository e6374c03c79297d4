#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tad/core.hpp"
#include "tad/detectors.hpp"
#include "tad/thresholds.hpp"

namespace tad {

/// Per-point cost: lambda_fn for a missed anomaly, lambda_fp for a false alert.
struct LossSpec {
  double lambda_fn = 1.0;
  double lambda_fp = 1.0;

  static LossSpec zero_one() { return {}; }
  void validate() const;
};

struct FeedbackEntry {
  Index index;
  bool label;

  friend bool operator==(const FeedbackEntry&, const FeedbackEntry&) = default;
};

/// Labels revealed so far, in increasing index order.
using FeedbackLog = std::vector<FeedbackEntry>;

struct DelayReport {
  std::vector<Index> delays;  ///< detected events only, in event order
  Index events = 0;
  Index missed = 0;
  double mean_delay = 0.0;  ///< NaN when nothing was detected
};

struct EvalReport {
  std::string protocol;
  double regret = 0.0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  Index true_positives = 0;
  Index false_positives = 0;
  Index false_negatives = 0;
  Index true_negatives = 0;
  Index alert_count = 0;
  Index warmup_excluded = 0;
  DelayReport delay;
  Labels predictions;
};

/// Precision/recall/F1 and loss over non-warmup points. `scored[t] == 0`
/// marks warmup points.
EvalReport score_predictions(std::string protocol, const Labels& predictions, const Labels& labels,
                             const Labels& scored, const LossSpec& loss, Index max_delay);

/// Contiguous runs of 1-labels are events. An event is detected by the first
/// prediction inside [start, end + max_delay]; the delay is measured from start.
DelayReport detection_delay(const Labels& predictions, const Labels& labels, Index max_delay);

/// Thresholds a score sequence; warmup points decide 0.
Labels apply_threshold(const ScoreSequence& scores, const ThresholdStrategy& threshold);

EvalReport evaluate_batch(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                          const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                          Index max_delay = 0);

EvalReport evaluate_streaming(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                              const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                              Index max_delay = 0);

/// Alerting policy for the human-in-the-loop protocol. At step t it sees
/// x_1..x_t and the labels of previously flagged points only.
class HilPolicy {
 public:
  virtual ~HilPolicy() = default;
  /// nullopt marks a warmup point: no alert and excluded from regret.
  virtual std::optional<bool> decide(std::span<const double> prefix, const FeedbackLog& feedback) = 0;
};

class AlwaysFlagPolicy final : public HilPolicy {
 public:
  std::optional<bool> decide(std::span<const double>, const FeedbackLog&) override { return true; }
};

class NeverFlagPolicy final : public HilPolicy {
 public:
  std::optional<bool> decide(std::span<const double>, const FeedbackLog&) override { return false; }
};

/// Streaming detector plus threshold. New feedback entries are forwarded to
/// the threshold before each decision.
class DetectorPolicy final : public HilPolicy {
 public:
  DetectorPolicy(const DetectorConfig& detector, const ThresholdStrategy& threshold);
  std::optional<bool> decide(std::span<const double> prefix, const FeedbackLog& feedback) override;

  const Thresholder& thresholder() const { return threshold_; }

 private:
  std::unique_ptr<StreamingDetector> detector_;
  Thresholder threshold_;
  std::size_t consumed_feedback_ = 0;
  std::size_t consumed_points_ = 0;
};

struct HilResult {
  EvalReport report;
  FeedbackLog feedback;
};

/// Online loop: decide a_t from (x_{<=t}, L_{<t}); if a_t = 1 the true label
/// l_t is revealed and appended to the log before step t + 1.
HilResult run_hil(HilPolicy& policy, const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                  Index max_delay = 0);

/// d x n binary matrix, row i holding the streaming predictions for series i.
using AnomalyMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

AnomalyMatrix run_population(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                             std::span<const TimeSeries> population, unsigned threads = 1);
AnomalyMatrix run_population(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                             const PopulationDataset& population, unsigned threads = 1);

}  // namespace tad

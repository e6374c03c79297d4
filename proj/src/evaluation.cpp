#include "tad/evaluation.hpp"

#include <cmath>

#include "parallel.hpp"

namespace tad {

void LossSpec::validate() const {
  if (!(std::isfinite(lambda_fn) && std::isfinite(lambda_fp) && lambda_fn >= 0 && lambda_fp >= 0)) {
    fail(ErrorKind::spec, "loss weights must be finite and non-negative");
  }
}

DelayReport detection_delay(const Labels& predictions, const Labels& labels, Index max_delay) {
  if (max_delay < 0) fail(ErrorKind::spec, "max_delay must be non-negative");
  validate_labels(predictions, static_cast<Index>(labels.size()));
  const auto n = static_cast<Index>(labels.size());
  DelayReport out;
  double total = 0.0;
  Index t = 0;
  while (t < n) {
    if (!labels[static_cast<std::size_t>(t)]) {
      ++t;
      continue;
    }
    const Index start = t;
    while (t < n && labels[static_cast<std::size_t>(t)]) ++t;
    const Index end = t - 1;
    ++out.events;
    std::optional<Index> hit;
    for (Index u = start; u <= std::min(n - 1, end + max_delay); ++u) {
      if (predictions[static_cast<std::size_t>(u)]) {
        hit = u;
        break;
      }
    }
    if (hit) {
      out.delays.push_back(*hit - start);
      total += static_cast<double>(*hit - start);
    } else {
      ++out.missed;
    }
  }
  out.mean_delay = out.delays.empty() ? kMissing : total / static_cast<double>(out.delays.size());
  return out;
}

EvalReport score_predictions(std::string protocol, const Labels& predictions, const Labels& labels,
                             const Labels& scored, const LossSpec& loss, Index max_delay) {
  loss.validate();
  const auto n = static_cast<Index>(labels.size());
  validate_labels(predictions, n);
  validate_labels(scored, n);
  EvalReport r;
  r.protocol = std::move(protocol);
  r.predictions = predictions;
  for (Index t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (!scored[i]) {
      ++r.warmup_excluded;
      continue;
    }
    const bool a = predictions[i] != 0;
    const bool l = labels[i] != 0;
    r.alert_count += a;
    if (a && l) ++r.true_positives;
    if (a && !l) ++r.false_positives;
    if (!a && l) ++r.false_negatives;
    if (!a && !l) ++r.true_negatives;
  }
  r.regret = loss.lambda_fn * static_cast<double>(r.false_negatives) +
             loss.lambda_fp * static_cast<double>(r.false_positives);
  const auto tp = static_cast<double>(r.true_positives);
  const double flagged = tp + static_cast<double>(r.false_positives);
  const double actual = tp + static_cast<double>(r.false_negatives);
  r.precision = flagged > 0 ? tp / flagged : 1.0;
  r.recall = actual > 0 ? tp / actual : 1.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.delay = detection_delay(predictions, labels, max_delay);
  return r;
}

Labels apply_threshold(const ScoreSequence& scores, const ThresholdStrategy& threshold) {
  Thresholder th(threshold);
  Labels out(static_cast<std::size_t>(scores.size()), 0);
  for (Index t = 0; t < scores.size(); ++t) {
    const std::optional<double> s = scores.scored(t) ? std::optional<double>(scores.scores[t]) : std::nullopt;
    out[static_cast<std::size_t>(t)] = th.decide(s) ? 1 : 0;
  }
  return out;
}

namespace {

Labels scored_mask(const ScoreSequence& s) {
  Labels m(static_cast<std::size_t>(s.size()), 1);
  for (Index t = 0; t < std::min(s.warmup, s.size()); ++t) m[static_cast<std::size_t>(t)] = 0;
  return m;
}

}  // namespace

EvalReport evaluate_batch(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                          const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                          Index max_delay) {
  validate_labels(labels, series.size());
  const ScoreSequence scores = run_batch(detector, series);
  return score_predictions("batch", apply_threshold(scores, threshold), labels, scored_mask(scores), loss,
                           max_delay);
}

EvalReport evaluate_streaming(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                              const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                              Index max_delay) {
  validate_labels(labels, series.size());
  const ScoreSequence scores = run_streaming(detector, series);
  return score_predictions("streaming", apply_threshold(scores, threshold), labels, scored_mask(scores), loss,
                           max_delay);
}

DetectorPolicy::DetectorPolicy(const DetectorConfig& detector, const ThresholdStrategy& threshold)
    : detector_(make_detector(detector)), threshold_(threshold) {}

std::optional<bool> DetectorPolicy::decide(std::span<const double> prefix, const FeedbackLog& feedback) {
  for (; consumed_feedback_ < feedback.size(); ++consumed_feedback_) {
    threshold_.feedback(feedback[consumed_feedback_].index, feedback[consumed_feedback_].label);
  }
  if (prefix.size() != consumed_points_ + 1) {
    fail(ErrorKind::protocol, "detector policy must see the prefix grow one point at a time");
  }
  const auto score = detector_->update(prefix.back());
  ++consumed_points_;
  const bool flag = threshold_.decide(score);
  if (!score) return std::nullopt;
  return flag;
}

HilResult run_hil(HilPolicy& policy, const TimeSeries& series, const Labels& labels, const LossSpec& loss,
                  Index max_delay) {
  const Index n = series.size();
  validate_labels(labels, n);
  HilResult out;
  Labels predictions(static_cast<std::size_t>(n), 0);
  Labels scored(static_cast<std::size_t>(n), 1);
  const double* data = series.values().data();
  for (Index t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const auto decision = policy.decide(std::span<const double>(data, i + 1), out.feedback);
    if (!decision) {
      scored[i] = 0;
      continue;
    }
    if (*decision) {
      predictions[i] = 1;
      // Only flagged points have their label revealed.
      out.feedback.push_back({t, labels[i] != 0});
    }
  }
  out.report = score_predictions("hil", predictions, labels, scored, loss, max_delay);
  return out;
}

AnomalyMatrix run_population(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                             std::span<const TimeSeries> population, unsigned threads) {
  const auto d = static_cast<Index>(population.size());
  if (d == 0) return AnomalyMatrix(0, 0);
  const Index n = population.front().size();
  for (const auto& s : population) {
    if (!aligned(s, population.front())) fail(ErrorKind::alignment, "population series are not aligned");
  }
  AnomalyMatrix out(d, n);
  auto work = [&](Index i) {
    const Labels row = apply_threshold(run_streaming(detector, population[static_cast<std::size_t>(i)]), threshold);
    for (Index t = 0; t < n; ++t) out(i, t) = row[static_cast<std::size_t>(t)];
  };
  detail::parallel_for(d, threads, work);
  return out;
}

AnomalyMatrix run_population(const DetectorConfig& detector, const ThresholdStrategy& threshold,
                             const PopulationDataset& population, unsigned threads) {
  return run_population(detector, threshold, std::span<const TimeSeries>(population.series()), threads);
}

}  // namespace tad

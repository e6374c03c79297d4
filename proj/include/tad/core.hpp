#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tad/error.hpp"

namespace tad {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

/// Integer epoch seconds (UTC).
using Timestamp = std::int64_t;
/// Seconds.
using Duration = std::int64_t;

/// Missing readings are quiet NaNs; no finite reading compares equal to it.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Regularly sampled real-valued sequence. The timestamp of index t is
/// start + t * interval.
class TimeSeries {
 public:
  TimeSeries(Timestamp start, Duration interval, Vector values);

  Timestamp start() const { return start_; }
  Duration interval() const { return interval_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  Timestamp time_at(Index t) const { return start_ + static_cast<Timestamp>(t) * interval_; }
  /// One past the last sample.
  Timestamp end() const { return time_at(size()); }

  bool has_missing() const;

  friend bool operator==(const TimeSeries& a, const TimeSeries& b);

 private:
  Timestamp start_;
  Duration interval_;
  Vector values_;
};

/// Binary per-point labels (ground truth l_t or predictions a_t).
using Labels = std::vector<std::uint8_t>;

void validate_labels(const Labels& labels, Index expected_size);
Index count_ones(const Labels& labels);

/// Per-point scores. Leading `warmup` entries are unscored and hold kMissing;
/// every entry after them is finite.
struct ScoreSequence {
  Vector scores;
  Index warmup = 0;

  Index size() const { return scores.size(); }
  bool scored(Index t) const { return t >= warmup; }
};

struct Event {
  Timestamp time;
  double value;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Sorted point-process records. Construction rejects decreasing timestamps
/// and non-finite values.
class EventStream {
 public:
  EventStream() = default;
  explicit EventStream(std::vector<Event> events);

  const std::vector<Event>& events() const { return events_; }
  Index size() const { return static_cast<Index>(events_.size()); }
  bool empty() const { return events_.empty(); }

 private:
  std::vector<Event> events_;
};

/// Named categorical attributes, one row per series.
struct AttributeTable {
  std::vector<std::string> schema;
  std::vector<std::vector<std::string>> rows;

  Index size() const { return static_cast<Index>(rows.size()); }
  void validate() const;
};

class PopulationDataset {
 public:
  PopulationDataset(std::vector<TimeSeries> series, AttributeTable attributes);

  const std::vector<TimeSeries>& series() const { return series_; }
  const AttributeTable& attributes() const { return attributes_; }
  Index dimension() const { return static_cast<Index>(series_.size()); }
  Index length() const { return series_.empty() ? 0 : series_.front().size(); }

 private:
  std::vector<TimeSeries> series_;
  AttributeTable attributes_;
};

class CovariateSet {
 public:
  CovariateSet(TimeSeries target, std::vector<std::pair<std::string, TimeSeries>> covariates);

  const TimeSeries& target() const { return target_; }
  const std::vector<std::pair<std::string, TimeSeries>>& covariates() const { return covariates_; }
  Index covariate_count() const { return static_cast<Index>(covariates_.size()); }
  Index length() const { return target_.size(); }

  /// Row t as a dense matrix: column 0 is the target, the rest covariates.
  Eigen::MatrixXd as_matrix() const;

 private:
  TimeSeries target_;
  std::vector<std::pair<std::string, TimeSeries>> covariates_;
};

/// First t points of the series; t == size() returns an identical series.
TimeSeries slice_prefix(const TimeSeries& series, Index t);

/// Trims every series to the common time range. All inputs must share an
/// interval and a grid phase.
std::vector<TimeSeries> align(std::span<const TimeSeries> series);

bool aligned(const TimeSeries& a, const TimeSeries& b);

}  // namespace tad

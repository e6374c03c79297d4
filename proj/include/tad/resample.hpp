#pragma once

#include <span>
#include <string_view>

#include "tad/core.hpp"

namespace tad {

enum class Aggregation { mean, sum, count, min, max, last };
enum class EmptyBinPolicy { missing, zero, carry_forward };

Aggregation parse_aggregation(std::string_view name);
EmptyBinPolicy parse_empty_bin_policy(std::string_view name);

/// Bins are [anchor + m * interval, anchor + (m + 1) * interval) and are
/// stamped with their left edge.
struct ResampleSpec {
  Duration interval = 3600;
  Aggregation aggregation = Aggregation::mean;
  EmptyBinPolicy empty_bins = EmptyBinPolicy::missing;
  Timestamp anchor = 0;
  /// carry_forward fills at most this many consecutive empty bins.
  Index max_carry = 5;

  void validate() const;
};

/// Aggregates a point process onto a regular grid covering the first to the
/// last non-empty bin.
TimeSeries resample(const EventStream& events, const ResampleSpec& spec);

/// Smallest candidate interval whose mean events-per-bin reaches
/// min_mean_count; the largest candidate when none does.
Duration suggest_rate(const EventStream& events, std::span<const Duration> candidates,
                      double min_mean_count);

}  // namespace tad

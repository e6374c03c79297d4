#include "tad/resample.hpp"

#include <algorithm>
#include <limits>

namespace tad {

namespace {

Timestamp floor_div(Timestamp a, Duration b) {
  Timestamp q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct Bin {
  double sum = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  double last = 0.0;
  Index count = 0;
};

double aggregate(const Bin& b, Aggregation agg) {
  switch (agg) {
    case Aggregation::mean: return b.sum / static_cast<double>(b.count);
    case Aggregation::sum: return b.sum;
    case Aggregation::count: return static_cast<double>(b.count);
    case Aggregation::min: return b.min;
    case Aggregation::max: return b.max;
    case Aggregation::last: return b.last;
  }
  return kMissing;
}

}  // namespace

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::mean;
  if (name == "sum") return Aggregation::sum;
  if (name == "count") return Aggregation::count;
  if (name == "min") return Aggregation::min;
  if (name == "max") return Aggregation::max;
  if (name == "last") return Aggregation::last;
  fail(ErrorKind::spec, "unknown aggregation '" + std::string(name) + "'");
}

EmptyBinPolicy parse_empty_bin_policy(std::string_view name) {
  if (name == "missing") return EmptyBinPolicy::missing;
  if (name == "zero") return EmptyBinPolicy::zero;
  if (name == "carry_forward" || name == "carry") return EmptyBinPolicy::carry_forward;
  fail(ErrorKind::spec, "unknown empty-bin policy '" + std::string(name) + "'");
}

void ResampleSpec::validate() const {
  if (interval <= 0) fail(ErrorKind::spec, "resample interval must be positive");
  if (max_carry < 0) fail(ErrorKind::spec, "max_carry must be non-negative");
  if (empty_bins == EmptyBinPolicy::zero && aggregation != Aggregation::sum &&
      aggregation != Aggregation::count) {
    fail(ErrorKind::spec, "zero-filled empty bins are only meaningful for sum or count");
  }
}

TimeSeries resample(const EventStream& events, const ResampleSpec& spec) {
  spec.validate();
  if (events.empty()) fail(ErrorKind::input, "cannot resample an empty event stream");

  const auto& ev = events.events();
  const Timestamp first = floor_div(ev.front().time - spec.anchor, spec.interval);
  const Timestamp last = floor_div(ev.back().time - spec.anchor, spec.interval);
  const Index n = static_cast<Index>(last - first + 1);

  std::vector<Bin> bins(static_cast<std::size_t>(n));
  for (const auto& e : ev) {
    auto& b = bins[static_cast<std::size_t>(floor_div(e.time - spec.anchor, spec.interval) - first)];
    b.sum += e.value;
    b.min = std::min(b.min, e.value);
    b.max = std::max(b.max, e.value);
    b.last = e.value;
    ++b.count;
  }

  Vector values(n);
  double carried = kMissing;
  Index gap = 0;
  for (Index m = 0; m < n; ++m) {
    const Bin& b = bins[static_cast<std::size_t>(m)];
    if (b.count > 0) {
      values[m] = aggregate(b, spec.aggregation);
      carried = values[m];
      gap = 0;
      continue;
    }
    switch (spec.empty_bins) {
      case EmptyBinPolicy::missing: values[m] = kMissing; break;
      case EmptyBinPolicy::zero: values[m] = 0.0; break;
      case EmptyBinPolicy::carry_forward:
        ++gap;
        values[m] = gap <= spec.max_carry ? carried : kMissing;
        break;
    }
  }
  return TimeSeries(spec.anchor + first * spec.interval, spec.interval, std::move(values));
}

Duration suggest_rate(const EventStream& events, std::span<const Duration> candidates,
                      double min_mean_count) {
  if (candidates.empty()) fail(ErrorKind::spec, "suggest_rate needs at least one candidate interval");
  if (!(min_mean_count > 0)) fail(ErrorKind::spec, "min_mean_count must be positive");
  if (!std::is_sorted(candidates.begin(), candidates.end()) || candidates.front() <= 0) {
    fail(ErrorKind::spec, "candidate intervals must be positive and ascending");
  }
  if (events.empty()) fail(ErrorKind::input, "cannot suggest a rate for an empty event stream");

  const auto& ev = events.events();
  for (Duration c : candidates) {
    const Timestamp bins = floor_div(ev.back().time, c) - floor_div(ev.front().time, c) + 1;
    const double mean = static_cast<double>(events.size()) / static_cast<double>(bins);
    if (mean >= min_mean_count) return c;
  }
  return candidates.back();
}

}  // namespace tad

#include "tad/core.hpp"

#include <algorithm>
#include <sstream>

namespace tad {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::range: return "range";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::degenerate_scale: return "degenerate_scale";
    case ErrorKind::spec: return "spec";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::input: return "input";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::schema: return "schema";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

TimeSeries::TimeSeries(Timestamp start, Duration interval, Vector values)
    : start_(start), interval_(interval), values_(std::move(values)) {
  if (interval_ <= 0) fail(ErrorKind::spec, "series interval must be positive");
}

bool TimeSeries::has_missing() const { return values_.array().isNaN().any(); }

bool operator==(const TimeSeries& a, const TimeSeries& b) {
  if (a.start_ != b.start_ || a.interval_ != b.interval_ || a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.values_[i];
    const double y = b.values_[i];
    if (is_missing(x) != is_missing(y)) return false;
    if (!is_missing(x) && x != y) return false;
  }
  return true;
}

void validate_labels(const Labels& labels, Index expected_size) {
  if (static_cast<Index>(labels.size()) != expected_size) {
    std::ostringstream os;
    os << "label length " << labels.size() << " does not match series length " << expected_size;
    fail(ErrorKind::alignment, os.str());
  }
  for (auto v : labels) {
    if (v > 1) fail(ErrorKind::input, "labels must be 0 or 1");
  }
}

Index count_ones(const Labels& labels) {
  return static_cast<Index>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

EventStream::EventStream(std::vector<Event> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (!std::isfinite(events_[i].value)) {
      fail(ErrorKind::input, "event " + std::to_string(i) + " has a non-finite value");
    }
    if (i > 0 && events_[i].time < events_[i - 1].time) {
      fail(ErrorKind::ordering, "event timestamps decrease at position " + std::to_string(i));
    }
  }
}

void AttributeTable::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != schema.size()) {
      fail(ErrorKind::schema, "attribute row " + std::to_string(i) + " has " +
                                  std::to_string(rows[i].size()) + " values, schema has " +
                                  std::to_string(schema.size()));
    }
  }
  auto sorted = schema;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(ErrorKind::schema, "duplicate attribute name in schema");
  }
}

bool aligned(const TimeSeries& a, const TimeSeries& b) {
  return a.start() == b.start() && a.interval() == b.interval() && a.size() == b.size();
}

PopulationDataset::PopulationDataset(std::vector<TimeSeries> series, AttributeTable attributes)
    : series_(std::move(series)), attributes_(std::move(attributes)) {
  attributes_.validate();
  if (attributes_.size() != dimension()) {
    fail(ErrorKind::schema, "population has " + std::to_string(dimension()) +
                                " series but " + std::to_string(attributes_.size()) +
                                " attribute rows");
  }
  for (const auto& s : series_) {
    if (!aligned(s, series_.front())) fail(ErrorKind::alignment, "population series are not aligned");
  }
}

CovariateSet::CovariateSet(TimeSeries target,
                           std::vector<std::pair<std::string, TimeSeries>> covariates)
    : target_(std::move(target)), covariates_(std::move(covariates)) {
  for (const auto& [name, s] : covariates_) {
    if (!aligned(s, target_)) fail(ErrorKind::alignment, "covariate '" + name + "' is not aligned with the target");
  }
}

Eigen::MatrixXd CovariateSet::as_matrix() const {
  Eigen::MatrixXd m(length(), 1 + covariate_count());
  m.col(0) = target_.values();
  for (Index j = 0; j < covariate_count(); ++j) m.col(j + 1) = covariates_[j].second.values();
  return m;
}

TimeSeries slice_prefix(const TimeSeries& series, Index t) {
  if (t < 0 || t > series.size()) {
    fail(ErrorKind::range, "prefix length " + std::to_string(t) + " outside [0, " +
                               std::to_string(series.size()) + "]");
  }
  return TimeSeries(series.start(), series.interval(), series.values().head(t));
}

namespace {

Timestamp floor_mod(Timestamp a, Duration m) {
  const Timestamp r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

std::vector<TimeSeries> align(std::span<const TimeSeries> series) {
  if (series.empty()) return {};
  const Duration interval = series.front().interval();
  const Timestamp phase = floor_mod(series.front().start(), interval);
  Timestamp begin = series.front().start();
  Timestamp end = series.front().end();
  for (const auto& s : series) {
    if (s.interval() != interval) {
      fail(ErrorKind::alignment, "cannot align intervals " + std::to_string(interval) + " s and " +
                                     std::to_string(s.interval()) + " s");
    }
    if (floor_mod(s.start(), interval) != phase) {
      fail(ErrorKind::alignment, "series sample grids are offset by a fraction of the interval");
    }
    begin = std::max(begin, s.start());
    end = std::min(end, s.end());
  }
  if (begin >= end) fail(ErrorKind::alignment, "series time ranges do not intersect");

  std::vector<TimeSeries> out;
  out.reserve(series.size());
  const Index length = static_cast<Index>((end - begin) / interval);
  for (const auto& s : series) {
    const Index offset = static_cast<Index>((begin - s.start()) / interval);
    out.emplace_back(begin, interval, s.values().segment(offset, length));
  }
  return out;
}

}  // namespace tad

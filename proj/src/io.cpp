#include "tad/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tad {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2);
}

bool digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_value(std::string_view text) {
  text = trim(text);
  if (text.empty() || text == "nan" || text == "NaN" || text == "NA") return kMissing;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& msg) {
  fail(ErrorKind::format, source + ":" + std::to_string(line) + ": " + msg);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  return out;
}

/// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) lines.emplace_back(number, line);
  }
  return lines;
}

/// Modal positive gap and whether every gap is within 1% of it.
std::pair<Duration, bool> regular_interval(const std::vector<Timestamp>& times) {
  std::map<Duration, Index> counts;
  for (std::size_t i = 1; i < times.size(); ++i) ++counts[times[i] - times[i - 1]];
  Duration modal = 0;
  Index best = 0;
  for (const auto& [gap, c] : counts) {
    if (c > best) {
      best = c;
      modal = gap;
    }
  }
  if (modal <= 0) return {modal, false};
  const double tolerance = 0.01 * static_cast<double>(modal);
  for (const auto& [gap, c] : counts) {
    if (!(std::abs(static_cast<double>(gap - modal)) < tolerance)) return {modal, false};
  }
  return {modal, true};
}

std::uint8_t parse_label(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  if (text == "0" || text == "false") return 0;
  if (text == "1" || text == "true") return 1;
  fail_at(source, line, "label must be 0 or 1, got '" + std::string(text) + "'");
}

std::vector<std::string> lower_header(std::string_view line) {
  auto cells = split_csv_line(line);
  for (auto& c : cells) {
    c = std::string(trim(c));
    std::transform(c.begin(), c.end(), c.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  }
  return cells;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  {
    Timestamp v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc{} && ptr == text.data() + text.size()) return v;
  }
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!digits(text, 0, 4, year) || text.size() < 19 || text[4] != '-' || !digits(text, 5, 2, month) ||
      text[7] != '-' || !digits(text, 8, 2, day) || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      !digits(text, 11, 2, hour) || text[13] != ':' || !digits(text, 14, 2, minute) || text[16] != ':' ||
      !digits(text, 17, 2, second)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    // Sub-second precision is not representable; only zero fractions pass.
    ++pos;
    const std::size_t begin = pos;
    while (pos < text.size() && text[pos] == '0') ++pos;
    if (pos == begin || (pos < text.size() && text[pos] >= '1' && text[pos] <= '9')) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int oh = 0, om = 0;
    if (!digits(text, pos + 1, 2, oh) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
        !digits(text, pos + 4, 2, om) || oh > 23 || om > 59) {
      return std::nullopt;
    }
    offset = (text[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != text.size()) return std::nullopt;
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_timestamp(Timestamp t) {
  std::int64_t days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
  std::int64_t secs = t - days * 86400;
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const TimeSeries& LoadedSeries::series() const {
  if (!regular()) fail(ErrorKind::input, "input is an irregular event stream; resample it first");
  return std::get<TimeSeries>(data);
}

const EventStream& LoadedSeries::events() const {
  if (regular()) fail(ErrorKind::input, "input is a regular series, not an event stream");
  return std::get<EventStream>(data);
}

EventStream LoadedSeries::as_events() const {
  if (!regular()) return std::get<EventStream>(data);
  const auto& s = std::get<TimeSeries>(data);
  std::vector<Event> out;
  for (Index t = 0; t < s.size(); ++t) {
    if (!is_missing(s.values()[t])) out.push_back({s.time_at(t), s.values()[t]});
  }
  return EventStream(std::move(out));
}

LoadedSeries parse_series_csv(std::istream& in, const std::string& source, Duration single_row_interval) {
  const auto lines = read_lines(in);
  if (lines.empty()) fail(ErrorKind::format, source + ": empty file; expected header 'timestamp,value[,label]'");
  const auto header = lower_header(lines.front().second);
  const bool has_label = header.size() == 3 && header[2] == "label";
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "value" || (header.size() == 3 && !has_label) ||
      header.size() > 3) {
    fail_at(source, lines.front().first, "expected header 'timestamp,value[,label]'");
  }
  std::vector<Timestamp> times;
  std::vector<double> values;
  Labels labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [number, line] = lines[r];
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      fail_at(source, number, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    const auto t = parse_timestamp(cells[0]);
    if (!t) fail_at(source, number, "unparseable timestamp '" + cells[0] + "'");
    const auto v = parse_value(cells[1]);
    if (!v) fail_at(source, number, "unparseable value '" + cells[1] + "'");
    if (!times.empty() && *t < times.back()) fail_at(source, number, "timestamps must be non-decreasing");
    times.push_back(*t);
    values.push_back(*v);
    if (has_label) labels.push_back(parse_label(cells[2], source, number));
  }
  if (times.empty()) fail(ErrorKind::format, source + ": header present but no data rows");

  LoadedSeries out{TimeSeries(0, 1, Vector()), std::nullopt};
  if (has_label) out.labels = std::move(labels);
  const auto [modal, regular] = times.size() == 1 ? std::pair{single_row_interval, true} : regular_interval(times);
  if (regular) {
    out.data = TimeSeries(times.front(), modal, Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
    return out;
  }
  std::vector<Event> events;
  events.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (is_missing(values[i])) fail_at(source, lines[i + 1].first, "irregular records cannot hold missing values");
    events.push_back({times[i], values[i]});
  }
  out.data = EventStream(std::move(events));
  return out;
}

LoadedSeries load_series_csv(const std::filesystem::path& path, Duration single_row_interval) {
  auto in = open_input(path);
  return parse_series_csv(in, path.string(), single_row_interval);
}

void write_series_csv(std::ostream& out, const TimeSeries& series, const Labels* labels) {
  if (labels) validate_labels(*labels, series.size());
  out << (labels ? "timestamp,value,label\n" : "timestamp,value\n");
  for (Index t = 0; t < series.size(); ++t) {
    out << series.time_at(t) << ',' << format_double(series.values()[t]);
    if (labels) out << ',' << static_cast<int>((*labels)[static_cast<std::size_t>(t)]);
    out << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const TimeSeries& series, const Labels* labels) {
  auto out = open_output(path);
  write_series_csv(out, series, labels);
}

void write_events_csv(std::ostream& out, const EventStream& events) {
  out << "timestamp,value\n";
  for (const auto& e : events.events()) out << e.time << ',' << format_double(e.value) << '\n';
}

std::vector<std::pair<std::string, TimeSeries>> load_frame_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const auto lines = read_lines(in);
  if (lines.empty()) fail(ErrorKind::format, source + ": empty file; expected header 'timestamp,<column>,...'");
  const auto header = split_csv_line(lines.front().second);
  if (header.size() < 2 || lower_header(lines.front().second)[0] != "timestamp") {
    fail_at(source, lines.front().first, "expected header 'timestamp,<column>,...'");
  }
  const std::size_t width = header.size() - 1;
  std::vector<Timestamp> times;
  std::vector<std::vector<double>> columns(width);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& [number, line] = lines[r];
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) fail_at(source, number, "expected " + std::to_string(header.size()) + " fields");
    const auto t = parse_timestamp(cells[0]);
    if (!t) fail_at(source, number, "unparseable timestamp '" + cells[0] + "'");
    times.push_back(*t);
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_value(cells[c + 1]);
      if (!v) fail_at(source, number, "unparseable value '" + cells[c + 1] + "'");
      columns[c].push_back(*v);
    }
  }
  if (times.empty()) fail(ErrorKind::format, source + ": no data rows");
  Duration interval = 1;
  if (times.size() > 1) {
    const auto [modal, regular] = regular_interval(times);
    if (!regular) fail(ErrorKind::alignment, source + ": multi-column input must be regularly spaced");
    interval = modal;
  }
  std::vector<std::pair<std::string, TimeSeries>> out;
  for (std::size_t c = 0; c < width; ++c) {
    out.emplace_back(std::string(trim(header[c + 1])),
                     TimeSeries(times.front(), interval,
                                Eigen::Map<const Vector>(columns[c].data(), static_cast<Index>(columns[c].size()))));
  }
  return out;
}

Labels load_labels_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const auto lines = read_lines(in);
  if (lines.empty()) fail(ErrorKind::format, source + ": empty file; expected header 'label' or 'timestamp,label'");
  const auto header = lower_header(lines.front().second);
  std::size_t column = 0;
  if (header.size() == 1 && header[0] == "label") {
    column = 0;
  } else if (header.size() >= 2 && header[0] == "timestamp" && header.back() == "label") {
    column = header.size() - 1;
  } else {
    fail_at(source, lines.front().first, "expected header 'label' or 'timestamp,...,label'");
  }
  Labels labels;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r].second);
    if (cells.size() != header.size()) fail_at(source, lines[r].first, "expected " + std::to_string(header.size()) + " fields");
    labels.push_back(parse_label(cells[column], source, lines[r].first));
  }
  return labels;
}

AttributeFile load_attributes_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const auto lines = read_lines(in);
  if (lines.empty()) fail(ErrorKind::format, source + ": empty file; expected header 'series_id,<attribute>,...'");
  const auto header = split_csv_line(lines.front().second);
  if (header.size() < 2 || lower_header(lines.front().second)[0] != "series_id") {
    fail_at(source, lines.front().first, "expected header 'series_id,<attribute>,...'");
  }
  AttributeFile out;
  for (std::size_t c = 1; c < header.size(); ++c) out.table.schema.emplace_back(trim(header[c]));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    auto cells = split_csv_line(lines[r].second);
    if (cells.size() != header.size()) {
      fail(ErrorKind::schema, source + ":" + std::to_string(lines[r].first) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    out.ids.emplace_back(trim(cells[0]));
    std::vector<std::string> row;
    for (std::size_t c = 1; c < cells.size(); ++c) row.emplace_back(trim(cells[c]));
    out.table.rows.push_back(std::move(row));
  }
  out.table.validate();
  return out;
}

MatrixFile load_matrix_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const auto lines = read_lines(in);
  if (lines.empty()) fail(ErrorKind::format, source + ": empty file; expected header 'series_id,<t0>,...'");
  const auto header = split_csv_line(lines.front().second);
  if (header.empty() || lower_header(lines.front().second)[0] != "series_id") {
    fail_at(source, lines.front().first, "expected header 'series_id,<t0>,...'");
  }
  MatrixFile out;
  out.columns.assign(header.begin() + 1, header.end());
  const auto rows = static_cast<Index>(lines.size() - 1);
  const auto cols = static_cast<Index>(out.columns.size());
  out.matrix.resize(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto& [number, line] = lines[static_cast<std::size_t>(r + 1)];
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != cols + 1) fail_at(source, number, "expected " + std::to_string(cols + 1) + " fields");
    out.ids.emplace_back(trim(cells[0]));
    for (Index c = 0; c < cols; ++c) out.matrix(r, c) = parse_label(cells[static_cast<std::size_t>(c + 1)], source, number);
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<std::string>& columns, const AnomalyMatrix& matrix) {
  if (static_cast<Index>(ids.size()) != matrix.rows() || static_cast<Index>(columns.size()) != matrix.cols()) {
    fail(ErrorKind::alignment, "matrix shape does not match its row and column names");
  }
  auto out = open_output(path);
  out << "series_id";
  for (const auto& c : columns) out << ',' << csv_escape(c);
  out << '\n';
  for (Index r = 0; r < matrix.rows(); ++r) {
    out << csv_escape(ids[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < matrix.cols(); ++c) out << ',' << static_cast<int>(matrix(r, c));
    out << '\n';
  }
}

AttributeTable select_rows(const AttributeFile& attributes, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < attributes.ids.size(); ++i) {
    if (!where.emplace(attributes.ids[i], i).second) fail(ErrorKind::schema, "duplicate series_id '" + attributes.ids[i] + "'");
  }
  AttributeTable out{attributes.table.schema, {}};
  for (const auto& id : ids) {
    const auto it = where.find(id);
    if (it == where.end()) fail(ErrorKind::schema, "no attributes for series '" + id + "'");
    out.rows.push_back(attributes.table.rows[it->second]);
  }
  return out;
}

// ---------------------------------------------------------------- config

namespace {

/// Reads known keys from an object and rejects the rest.
class Fields {
 public:
  Fields(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_null() && !j_.is_object()) fail(ErrorKind::spec, what_ + " config must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.emplace_back(key);
    if (j_.is_null() || !j_.contains(key)) return;
    try {
      field = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::spec, what_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& field) {
    seen_.emplace_back(key);
    if (j_.is_null() || !j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_null() || (v.is_string() && v.template get<std::string>() == "auto")) {
      field.reset();
      return;
    }
    T value{};
    get(key, value);
    field = value;
  }

  template <typename E, typename Parse>
  void get_enum(const char* key, E& field, Parse parse) {
    std::string name;
    get(key, name);
    if (!name.empty()) field = parse(name);
  }

  void finish() const {
    if (j_.is_null()) return;
    for (const auto& [key, value] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        fail(ErrorKind::spec, "unknown " + what_ + " config key '" + key + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string what_;
  std::vector<std::string> seen_;
};

InjectionNoise parse_injection_noise(std::string_view name) {
  if (name == "offset") return InjectionNoise::offset;
  if (name == "uniform_range") return InjectionNoise::uniform_range;
  if (name == "constant") return InjectionNoise::constant;
  fail(ErrorKind::spec, "unknown injection noise '" + std::string(name) + "'");
}

std::string_view injection_noise_name(InjectionNoise n) {
  switch (n) {
    case InjectionNoise::offset: return "offset";
    case InjectionNoise::uniform_range: return "uniform_range";
    case InjectionNoise::constant: return "constant";
  }
  return "offset";
}

std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::sum: return "sum";
    case Aggregation::count: return "count";
    case Aggregation::min: return "min";
    case Aggregation::max: return "max";
    case Aggregation::last: return "last";
  }
  return "mean";
}

std::string_view empty_bin_name(EmptyBinPolicy p) {
  switch (p) {
    case EmptyBinPolicy::missing: return "missing";
    case EmptyBinPolicy::zero: return "zero";
    case EmptyBinPolicy::carry_forward: return "carry_forward";
  }
  return "missing";
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

DetectorConfig detector_config(const Json& j, DetectorConfig c) {
  Fields f(j, "detector");
  f.get_enum("kind", c.kind, parse_detector_kind);
  f.get("window", c.window);
  f.get("auto_probe", c.auto_probe);
  f.get("auto_fallback", c.auto_fallback);
  f.get("sr_filter_width", c.sr_filter_width);
  f.get("sr_padding", c.sr_padding);
  f.get("sr_lookahead", c.sr_lookahead);
  f.get("ewma_alpha", c.ewma_alpha);
  f.get("scale_floor", c.scale_floor);
  f.get("kmeans_clusters", c.kmeans_clusters);
  f.get("kmeans_cadence", c.kmeans_cadence);
  f.get("kmeans_max_train", c.kmeans_max_train);
  f.get("kmeans_iterations", c.kmeans_iterations);
  f.get("discord_history", c.discord_history);
  f.finish();
  c.validate();
  return c;
}

ThresholdStrategy threshold_strategy(const Json& j, ThresholdStrategy c) {
  Fields f(j, "threshold");
  f.get_enum("kind", c.kind, parse_threshold_kind);
  f.get("value", c.value);
  f.get("percentile", c.percentile);
  f.get("horizon", c.horizon);
  f.get("reservoir", c.reservoir);
  f.get("seed", c.seed);
  f.get("k", c.k);
  f.get("min_history", c.min_history);
  f.get("up", c.up);
  f.get("down", c.down);
  f.finish();
  c.validate();
  return c;
}

LossSpec loss_spec(const Json& j, LossSpec c) {
  Fields f(j, "loss");
  f.get("lambda_fn", c.lambda_fn);
  f.get("lambda_fp", c.lambda_fp);
  f.finish();
  c.validate();
  return c;
}

PeriodicGeneratorConfig generator_config(const Json& j, PeriodicGeneratorConfig c) {
  Fields f(j, "generator");
  f.get("min_length", c.min_length);
  f.get("max_length", c.max_length);
  f.get("noise_min", c.noise_min);
  f.get("noise_max", c.noise_max);
  f.get("strength_min", c.strength_min);
  f.get("strength_max", c.strength_max);
  f.get("seed", c.seed);
  f.get("length", c.length);
  f.get("period", c.period);
  f.get("noise_strength", c.noise_strength);
  f.get("period_strength", c.period_strength);
  f.get("include_trend_walk", c.include_trend_walk);
  f.finish();
  c.validate();
  return c;
}

InjectionConfig injection_config(const Json& j, InjectionConfig c) {
  Fields f(j, "injection");
  f.get("epsilon", c.epsilon);
  f.get_enum("noise", c.noise, parse_injection_noise);
  f.get("offset_scale", c.offset_scale);
  f.get("constant", c.constant);
  f.get("seed", c.seed);
  f.finish();
  return c;
}

ResampleSpec resample_spec(const Json& j, ResampleSpec c) {
  Fields f(j, "resample");
  f.get("interval", c.interval);
  f.get_enum("aggregation", c.aggregation, parse_aggregation);
  f.get_enum("empty_bins", c.empty_bins, parse_empty_bin_policy);
  f.get("anchor", c.anchor);
  f.get("max_carry", c.max_carry);
  f.finish();
  c.validate();
  return c;
}

ConditionalModelConfig conditional_config(const Json& j, ConditionalModelConfig c) {
  Fields f(j, "conditional");
  f.get("ar_order", c.ar_order);
  f.get("covariate_lags", c.covariate_lags);
  f.get("forgetting", c.forgetting);
  f.get("ridge", c.ridge);
  f.get("intercept", c.intercept);
  f.get("scale_rate", c.scale_rate);
  f.get("scale_floor", c.scale_floor);
  f.finish();
  return c;
}

JointModelConfig joint_config(const Json& j, JointModelConfig c) {
  Fields f(j, "joint");
  f.get("rate", c.rate);
  f.get("ridge", c.ridge);
  f.get("difference", c.difference);
  f.get("warmup", c.warmup);
  f.finish();
  return c;
}

CohortMinerConfig miner_config(const Json& j, CohortMinerConfig c) {
  Fields f(j, "miner");
  f.get("max_depth", c.max_depth);
  f.get("min_score", c.min_score);
  f.get_enum("quality", c.quality, parse_rule_quality);
  f.get("min_recall", c.min_recall);
  f.get("max_candidates", c.max_candidates);
  f.get("min_support", c.min_support);
  f.finish();
  c.validate();
  return c;
}

Json to_json(const DetectorConfig& c) {
  return Json{{"kind", to_string(c.kind)},
              {"window", c.window ? Json(*c.window) : Json("auto")},
              {"auto_probe", c.auto_probe},
              {"auto_fallback", c.auto_fallback},
              {"sr_filter_width", c.sr_filter_width},
              {"sr_padding", c.sr_padding},
              {"sr_lookahead", c.sr_lookahead},
              {"ewma_alpha", c.ewma_alpha},
              {"scale_floor", c.scale_floor},
              {"kmeans_clusters", c.kmeans_clusters},
              {"kmeans_cadence", c.kmeans_cadence},
              {"kmeans_max_train", c.kmeans_max_train},
              {"kmeans_iterations", c.kmeans_iterations},
              {"discord_history", c.discord_history}};
}

Json to_json(const ThresholdStrategy& c) {
  return Json{{"kind", to_string(c.kind)}, {"value", c.value},   {"percentile", c.percentile},
              {"horizon", c.horizon},      {"reservoir", c.reservoir}, {"seed", c.seed},
              {"k", c.k},                  {"min_history", c.min_history}, {"up", c.up},
              {"down", c.down}};
}

Json to_json(const LossSpec& c) { return Json{{"lambda_fn", c.lambda_fn}, {"lambda_fp", c.lambda_fp}}; }

Json to_json(const PeriodicGeneratorConfig& c) {
  return Json{{"min_length", c.min_length},
              {"max_length", c.max_length},
              {"noise_min", c.noise_min},
              {"noise_max", c.noise_max},
              {"strength_min", c.strength_min},
              {"strength_max", c.strength_max},
              {"seed", c.seed},
              {"length", optional_json(c.length)},
              {"period", optional_json(c.period)},
              {"noise_strength", optional_json(c.noise_strength)},
              {"period_strength", optional_json(c.period_strength)},
              {"include_trend_walk", c.include_trend_walk}};
}

Json to_json(const InjectionConfig& c) {
  return Json{{"epsilon", c.epsilon},
              {"noise", injection_noise_name(c.noise)},
              {"offset_scale", c.offset_scale},
              {"constant", c.constant},
              {"seed", c.seed}};
}

Json to_json(const ResampleSpec& c) {
  return Json{{"interval", c.interval},
              {"aggregation", aggregation_name(c.aggregation)},
              {"empty_bins", empty_bin_name(c.empty_bins)},
              {"anchor", c.anchor},
              {"max_carry", c.max_carry}};
}

Json to_json(const ConditionalModelConfig& c) {
  return Json{{"ar_order", c.ar_order},     {"covariate_lags", c.covariate_lags}, {"forgetting", c.forgetting},
              {"ridge", c.ridge},           {"intercept", c.intercept},           {"scale_rate", c.scale_rate},
              {"scale_floor", c.scale_floor}};
}

Json to_json(const JointModelConfig& c) {
  return Json{{"rate", c.rate}, {"ridge", c.ridge}, {"difference", c.difference}, {"warmup", c.warmup}};
}

Json to_json(const CohortMinerConfig& c) {
  return Json{{"max_depth", c.max_depth},
              {"min_score", c.min_score},
              {"quality", c.quality == RuleQuality::f1 ? "f1" : "precision_at_min_recall"},
              {"min_recall", c.min_recall},
              {"max_candidates", c.max_candidates},
              {"min_support", c.min_support}};
}

Json to_json(const EvalReport& r, bool with_predictions) {
  Json j{{"protocol", r.protocol},
         {"regret", r.regret},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"tp", r.true_positives},
         {"fp", r.false_positives},
         {"fn", r.false_negatives},
         {"tn", r.true_negatives},
         {"alerts", r.alert_count},
         {"warmup_excluded", r.warmup_excluded},
         {"delay",
          {{"events", r.delay.events},
           {"missed", r.delay.missed},
           {"mean", number(r.delay.mean_delay)},
           {"delays", r.delay.delays}}}};
  if (with_predictions) {
    Json alerts = Json::array();
    for (std::size_t t = 0; t < r.predictions.size(); ++t) {
      if (r.predictions[t]) alerts.push_back(t);
    }
    j["alert_indices"] = std::move(alerts);
  }
  return j;
}

Json to_json(const Rule& r) {
  Json terms = Json::array();
  for (const auto& t : r.terms) terms.push_back({{"attribute", t.attribute}, {"value", t.value}});
  return Json{{"rule", r.to_string()},
              {"terms", std::move(terms)},
              {"score", r.score},
              {"coverage", r.coverage},
              {"true_positives", r.true_positives}};
}

Json to_json(const BenchmarkResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"method", to_string(row.method)},
                    {"accuracy", row.accuracy},
                    {"accuracy_within_one", row.accuracy_within_one},
                    {"detected", row.detected},
                    {"timing", {{"mean_runtime_seconds", row.mean_runtime}}}});
  }
  return Json{{"n_series", r.n_series}, {"seed", r.seed}, {"methods", std::move(rows)}};
}

Json load_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::format, path.string() + ": " + e.what());
  }
}

Json merge(Json base, const Json& overlay) {
  if (!base.is_object() || !overlay.is_object()) return overlay;
  for (const auto& [key, value] : overlay.items()) {
    base[key] = base.contains(key) ? merge(base[key], value) : value;
  }
  return base;
}

// ---------------------------------------------------------------- reports

ReportWriter::ReportWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

void ReportWriter::record(Json record) { records_.push_back(std::move(record)); }

void ReportWriter::summary_header(std::vector<std::string> columns) { columns_ = std::move(columns); }

void ReportWriter::summary_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) fail(ErrorKind::schema, "summary row width does not match its header");
  rows_.push_back(cells);
}

void ReportWriter::close() {
  {
    auto out = open_output(dir_ / "report.jsonl");
    for (const auto& r : records_) out << r.dump() << '\n';
  }
  auto out = open_output(dir_ / "summary.csv");
  for (std::size_t c = 0; c < columns_.size(); ++c) out << (c ? "," : "") << csv_escape(columns_[c]);
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_escape(row[c]);
    out << '\n';
  }
}

Json strip_timing(Json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [key, value] : j.items()) value = strip_timing(value);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char ch : cell) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cells.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back();
    } else {
      cells.back() += ch;
    }
  }
  return cells;
}

}  // namespace tad

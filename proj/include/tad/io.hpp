#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tad/benchmark.hpp"
#include "tad/cohort.hpp"
#include "tad/conditional.hpp"
#include "tad/core.hpp"
#include "tad/datagen.hpp"
#include "tad/detectors.hpp"
#include "tad/evaluation.hpp"
#include "tad/resample.hpp"
#include "tad/thresholds.hpp"

namespace tad {

using Json = nlohmann::ordered_json;

/// Epoch seconds or RFC-3339 ("2024-01-02T03:04:05Z", optional fraction of
/// zeros, optional +hh:mm offset). Returns nullopt on anything else.
std::optional<Timestamp> parse_timestamp(std::string_view text);
/// UTC RFC-3339 with a trailing Z.
std::string format_timestamp(Timestamp t);

/// Shortest text that parses back to the same double; NaN prints empty.
std::string format_double(double v);

struct LoadedSeries {
  std::variant<TimeSeries, EventStream> data;
  std::optional<Labels> labels;

  bool regular() const { return std::holds_alternative<TimeSeries>(data); }
  const TimeSeries& series() const;
  const EventStream& events() const;
  /// Events of either form; missing readings of a regular series are dropped.
  EventStream as_events() const;
};

/// Header `timestamp,value[,label]`. Spacing within 1% of the modal interval
/// yields a TimeSeries; anything else an EventStream. A single row is a
/// TimeSeries with `single_row_interval`.
LoadedSeries parse_series_csv(std::istream& in, const std::string& source, Duration single_row_interval = 1);
LoadedSeries load_series_csv(const std::filesystem::path& path, Duration single_row_interval = 1);

void write_series_csv(std::ostream& out, const TimeSeries& series, const Labels* labels = nullptr);
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series, const Labels* labels = nullptr);
void write_events_csv(std::ostream& out, const EventStream& events);

/// Header `timestamp,name1,name2,...` on a regular grid; empty cells are missing.
std::vector<std::pair<std::string, TimeSeries>> load_frame_csv(const std::filesystem::path& path);

/// Label-only file: either `label` per row or `timestamp,label`.
Labels load_labels_csv(const std::filesystem::path& path);

struct AttributeFile {
  std::vector<std::string> ids;
  AttributeTable table;
};

/// Header `series_id,attr1,attr2,...`.
AttributeFile load_attributes_csv(const std::filesystem::path& path);

struct MatrixFile {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  AnomalyMatrix matrix;
};

/// Header `series_id,<t0>,<t1>,...`, 0/1 cells.
MatrixFile load_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<std::string>& columns, const AnomalyMatrix& matrix);

/// Reorders attribute rows to match `ids`; every id must be present.
AttributeTable select_rows(const AttributeFile& attributes, const std::vector<std::string>& ids);

// Configuration. Keys present in the object override fields of `base`;
// unknown keys are a spec error.
DetectorConfig detector_config(const Json& j, DetectorConfig base = {});
ThresholdStrategy threshold_strategy(const Json& j, ThresholdStrategy base = {});
LossSpec loss_spec(const Json& j, LossSpec base = {});
PeriodicGeneratorConfig generator_config(const Json& j, PeriodicGeneratorConfig base = {});
InjectionConfig injection_config(const Json& j, InjectionConfig base = {});
ResampleSpec resample_spec(const Json& j, ResampleSpec base = {});
ConditionalModelConfig conditional_config(const Json& j, ConditionalModelConfig base = {});
JointModelConfig joint_config(const Json& j, JointModelConfig base = {});
CohortMinerConfig miner_config(const Json& j, CohortMinerConfig base = {});

Json to_json(const DetectorConfig& c);
Json to_json(const ThresholdStrategy& c);
Json to_json(const LossSpec& c);
Json to_json(const PeriodicGeneratorConfig& c);
Json to_json(const InjectionConfig& c);
Json to_json(const ResampleSpec& c);
Json to_json(const ConditionalModelConfig& c);
Json to_json(const JointModelConfig& c);
Json to_json(const CohortMinerConfig& c);
Json to_json(const EvalReport& r, bool with_predictions = false);
Json to_json(const Rule& r);
Json to_json(const BenchmarkResult& r);

Json load_json(const std::filesystem::path& path);
/// Recursive object merge; `overlay` wins.
Json merge(Json base, const Json& overlay);

/// Run output directory: report.jsonl plus summary.csv. Each record carries
/// its wall-clock fields under the single key "timing".
class ReportWriter {
 public:
  explicit ReportWriter(std::filesystem::path dir);

  void record(Json record);
  void summary_header(std::vector<std::string> columns);
  void summary_row(const std::vector<std::string>& cells);
  /// Writes both files.
  void close();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<Json> records_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Removes every "timing" key, recursively.
Json strip_timing(Json j);

std::string csv_escape(std::string_view cell);
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace tad

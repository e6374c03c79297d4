// tad: command-line front end. Every subcommand writes <out>/report.jsonl and
// <out>/summary.csv. The first report record echoes the fully resolved
// configuration; feeding that object back through --config replays the run.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tad/benchmark.hpp"
#include "tad/cohort.hpp"
#include "tad/conditional.hpp"
#include "tad/datagen.hpp"
#include "tad/detectors.hpp"
#include "tad/evaluation.hpp"
#include "tad/io.hpp"
#include "tad/resample.hpp"
#include "tad/rng.hpp"
#include "tad/thresholds.hpp"

#ifndef TAD_VERSION
#define TAD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using tad::Json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Flag values collected by CLI11. Unset flags leave config keys untouched.
struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;

  std::vector<std::string> inputs;
  std::optional<std::string> labels;
  std::optional<std::string> attributes;

  std::optional<std::string> detector;
  std::optional<std::string> window;
  std::optional<std::string> threshold;
  std::optional<double> threshold_value;
  std::optional<double> percentile;
  std::optional<double> k;
  std::optional<double> lambda_fn;
  std::optional<double> lambda_fp;
  std::optional<long long> max_delay;
  bool batch = false;

  std::optional<long long> n_series;
  std::optional<long long> length;
  std::optional<long long> period;
  bool inject = false;
  std::optional<double> epsilon;

  std::optional<long long> interval;
  std::optional<std::string> aggregation;
  std::optional<std::string> empty_bins;
  std::optional<long long> anchor;
  std::vector<long long> suggest;

  std::optional<std::string> policy;
  std::vector<std::string> methods;
  std::optional<std::string> model;

  std::optional<long long> max_depth;
  std::optional<double> min_score;
  std::optional<std::string> quality;
  std::optional<long long> bins;
};

template <typename T>
void put(Json& j, std::initializer_list<const char*> path, const std::optional<T>& v) {
  if (!v) return;
  Json* node = &j;
  for (const char* key : path) node = &(*node)[key];
  *node = *v;
}

/// flags > config file > defaults.
Json resolve(const std::string& task, const Flags& f) {
  Json config = Json::object();
  if (!f.config_path.empty()) config = tad::load_json(f.config_path);
  if (!config.is_object()) tad::fail(tad::ErrorKind::spec, "config must be a JSON object");
  if (config.contains("task") && config["task"] != task) {
    tad::fail(tad::ErrorKind::spec, "config is for task '" + config["task"].get<std::string>() + "', not '" + task + "'");
  }
  Json flags = Json::object();
  put(flags, {"seed"}, f.seed);
  put(flags, {"out"}, f.out);
  put(flags, {"threads"}, f.threads);
  if (!f.inputs.empty()) flags["input"] = f.inputs;
  put(flags, {"labels"}, f.labels);
  put(flags, {"attributes"}, f.attributes);
  put(flags, {"detector", "kind"}, f.detector);
  if (f.window) {
    if (*f.window == "auto") {
      flags["detector"]["window"] = "auto";
    } else {
      try {
        flags["detector"]["window"] = std::stoll(*f.window);
      } catch (const std::exception&) {
        tad::fail(tad::ErrorKind::spec, "--window takes an integer or 'auto'");
      }
    }
  }
  put(flags, {"threshold", "kind"}, f.threshold);
  put(flags, {"threshold", "value"}, f.threshold_value);
  put(flags, {"threshold", "percentile"}, f.percentile);
  put(flags, {"threshold", "k"}, f.k);
  put(flags, {"loss", "lambda_fn"}, f.lambda_fn);
  put(flags, {"loss", "lambda_fp"}, f.lambda_fp);
  put(flags, {"max_delay"}, f.max_delay);
  if (f.batch) flags["batch"] = true;
  put(flags, {"n_series"}, f.n_series);
  put(flags, {"generator", "length"}, f.length);
  put(flags, {"generator", "period"}, f.period);
  if (f.inject) flags["inject"] = true;
  put(flags, {"injection", "epsilon"}, f.epsilon);
  put(flags, {"resample", "interval"}, f.interval);
  put(flags, {"resample", "aggregation"}, f.aggregation);
  put(flags, {"resample", "empty_bins"}, f.empty_bins);
  put(flags, {"resample", "anchor"}, f.anchor);
  if (!f.suggest.empty()) flags["suggest"] = f.suggest;
  put(flags, {"policy"}, f.policy);
  if (!f.methods.empty()) flags["methods"] = f.methods;
  put(flags, {"model"}, f.model);
  put(flags, {"miner", "max_depth"}, f.max_depth);
  put(flags, {"miner", "min_score"}, f.min_score);
  put(flags, {"miner", "quality"}, f.quality);
  put(flags, {"bins"}, f.bins);

  Json merged = tad::merge(config, flags);
  merged["task"] = task;
  return merged;
}

/// Shared state of one run.
class Run {
 public:
  Run(std::string task, Json config) : task_(std::move(task)), config_(std::move(config)) {
    static const std::vector<std::string> known = {
        "task", "seed", "out", "threads", "input", "labels", "attributes", "detector", "threshold", "loss",
        "max_delay", "batch", "n_series", "generator", "inject", "injection", "resample", "suggest", "policy",
        "methods", "model", "conditional", "joint", "miner", "bins", "min_mean_count"};
    for (const auto& [key, value] : config_.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        tad::fail(tad::ErrorKind::spec, "unknown config key '" + key + "'");
      }
    }
    out_ = config_.value("out", std::string("out"));
    threads_ = config_.value("threads", 1u);
    if (threads_ == 0) tad::fail(tad::ErrorKind::spec, "threads must be positive");
    fs::create_directories(out_);
    writer_ = std::make_unique<tad::ReportWriter>(out_);
  }

  const std::string& task() const { return task_; }
  const Json& config() const { return config_; }
  Json section(const char* key) const { return config_.contains(key) ? config_.at(key) : Json(); }
  const fs::path& out() const { return out_; }
  unsigned threads() const { return threads_; }
  tad::ReportWriter& writer() { return *writer_; }

  std::uint64_t seed(bool required) {
    if (!config_.contains("seed")) {
      if (required) tad::fail(tad::ErrorKind::spec, "task '" + task_ + "' is stochastic and needs --seed");
      config_["seed"] = 0;
    }
    return config_["seed"].get<std::uint64_t>();
  }

  std::vector<std::string> inputs() const {
    if (!config_.contains("input")) tad::fail(tad::ErrorKind::spec, "task '" + task_ + "' needs --input");
    const auto& in = config_.at("input");
    if (in.is_string()) return {in.get<std::string>()};
    return in.get<std::vector<std::string>>();
  }

  /// Records the resolved configuration so the report is replayable.
  void resolved(const char* key, Json value) { config_[key] = std::move(value); }

  void finish(Json timing) {
    Json head{{"type", "run"},
              {"task", task_},
              {"version", TAD_VERSION},
              {"seed", config_.value("seed", Json(nullptr))},
              {"config", config_},
              {"timing", std::move(timing)}};
    records_.insert(records_.begin(), std::move(head));
    for (auto& r : records_) writer_->record(std::move(r));
    writer_->close();
  }

  void record(Json r) { records_.push_back(std::move(r)); }

 private:
  std::string task_;
  Json config_;
  fs::path out_;
  unsigned threads_ = 1;
  std::unique_ptr<tad::ReportWriter> writer_;
  std::vector<Json> records_;
};

std::string fmt(double v) { return tad::format_double(v); }
std::string fmt(tad::Index v) { return std::to_string(v); }

tad::ThresholdStrategy threshold_for(Run& run) {
  tad::ThresholdStrategy base;
  base.seed = run.seed(false);
  auto t = tad::threshold_strategy(run.section("threshold"), base);
  run.resolved("threshold", tad::to_json(t));
  return t;
}

tad::DetectorConfig detector_for(Run& run) {
  auto d = tad::detector_config(run.section("detector"));
  run.resolved("detector", tad::to_json(d));
  return d;
}

tad::LossSpec loss_for(Run& run) {
  auto l = tad::loss_spec(run.section("loss"));
  run.resolved("loss", tad::to_json(l));
  return l;
}

tad::Index max_delay_for(Run& run) {
  const auto d = run.config().value("max_delay", tad::Index{0});
  if (d < 0) tad::fail(tad::ErrorKind::spec, "max_delay must be non-negative");
  run.resolved("max_delay", d);
  return d;
}

/// Series plus labels from --input, optionally overridden by --labels.
std::pair<tad::TimeSeries, std::optional<tad::Labels>> load_labeled(Run& run, const std::string& path) {
  auto loaded = tad::load_series_csv(path);
  auto series = loaded.series();
  std::optional<tad::Labels> labels = loaded.labels;
  if (run.config().contains("labels")) labels = tad::load_labels_csv(run.config()["labels"].get<std::string>());
  if (labels) tad::validate_labels(*labels, series.size());
  return {std::move(series), std::move(labels)};
}

// ------------------------------------------------------------------ tasks

void task_datagen(Run& run) {
  const auto start = Clock::now();
  tad::PeriodicGeneratorConfig base;
  base.seed = run.seed(true);
  const auto gen = tad::generator_config(run.section("generator"), base);
  run.resolved("generator", tad::to_json(gen));
  const auto n_series = run.config().value("n_series", tad::Index{1});
  if (n_series < 1) tad::fail(tad::ErrorKind::spec, "n_series must be positive");
  run.resolved("n_series", n_series);
  const bool inject = run.config().value("inject", false);
  run.resolved("inject", inject);
  tad::InjectionConfig inj_base;
  inj_base.seed = tad::splitmix64(gen.seed ^ 0x696e6a656374ULL);
  const auto inj = tad::injection_config(run.section("injection"), inj_base);
  if (inject) run.resolved("injection", tad::to_json(inj));

  run.writer().summary_header({"series", "file", "length", "true_period", "noise_strength", "period_strength", "anomalies"});
  for (tad::Index i = 0; i < n_series; ++i) {
    auto draw = tad::generate_periodic(gen, static_cast<std::uint64_t>(i));
    if (inject) {
      auto cfg = inj;
      cfg.seed = tad::splitmix64(inj.seed + static_cast<std::uint64_t>(i));
      auto injected = tad::inject_point_anomalies(draw.series, cfg);
      draw.series = std::move(injected.series);
      draw.labels = std::move(injected.labels);
    }
    char name[32];
    std::snprintf(name, sizeof name, "series_%05lld.csv", static_cast<long long>(i));
    tad::write_series_csv(run.out() / name, draw.series, &draw.labels);
    const auto anomalies = tad::count_ones(draw.labels);
    run.record({{"type", "series"},
                {"series", i},
                {"file", name},
                {"length", draw.series.size()},
                {"true_period", draw.true_period ? Json(*draw.true_period) : Json(nullptr)},
                {"noise_strength", draw.noise_strength},
                {"period_strength", draw.period_strength},
                {"anomalies", anomalies}});
    run.writer().summary_row({fmt(i), name, fmt(draw.series.size()),
                              draw.true_period ? fmt(*draw.true_period) : std::string(), fmt(draw.noise_strength),
                              fmt(draw.period_strength), fmt(anomalies)});
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_resample(Run& run) {
  const auto start = Clock::now();
  const auto inputs = run.inputs();
  if (inputs.size() != 1) tad::fail(tad::ErrorKind::spec, "resample takes exactly one --input");
  const auto loaded = tad::load_series_csv(inputs.front());
  const auto events = loaded.as_events();
  Json section = run.section("resample");
  if (run.config().contains("suggest")) {
    const auto candidates = run.config()["suggest"].get<std::vector<tad::Duration>>();
    const double min_mean = run.config().value("min_mean_count", 1.0);
    const auto chosen = tad::suggest_rate(events, candidates, min_mean);
    run.record({{"type", "suggestion"}, {"candidates", candidates}, {"min_mean_count", min_mean}, {"interval", chosen}});
    if (section.is_null() || !section.contains("interval")) section["interval"] = chosen;
  }
  const auto spec = tad::resample_spec(section);
  run.resolved("resample", tad::to_json(spec));
  const auto series = tad::resample(events, spec);
  tad::write_series_csv(run.out() / "resampled.csv", series);
  tad::Index missing = 0;
  for (tad::Index t = 0; t < series.size(); ++t) missing += tad::is_missing(series.values()[t]);
  run.record({{"type", "resampled"},
              {"events", events.size()},
              {"bins", series.size()},
              {"missing_bins", missing},
              {"start", series.start()},
              {"interval", series.interval()}});
  run.writer().summary_header({"events", "bins", "missing_bins", "start", "interval"});
  run.writer().summary_row({fmt(events.size()), fmt(series.size()), fmt(missing), std::to_string(series.start()),
                            std::to_string(series.interval())});
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_detect(Run& run) {
  const auto start = Clock::now();
  const auto detector = detector_for(run);
  const auto threshold = threshold_for(run);
  const bool batch = run.config().value("batch", false);
  run.resolved("batch", batch);
  const auto inputs = run.inputs();

  std::vector<tad::TimeSeries> population;
  for (const auto& path : inputs) population.push_back(tad::load_series_csv(path).series());
  std::vector<tad::ScoreSequence> scores(population.size());
  std::vector<tad::Labels> alerts(population.size());
  std::vector<double> elapsed(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto t0 = Clock::now();
    scores[i] = batch ? tad::run_batch(detector, population[i]) : tad::run_streaming(detector, population[i]);
    alerts[i] = tad::apply_threshold(scores[i], threshold);
    elapsed[i] = seconds_since(t0);
  }

  run.writer().summary_header({"series", "input", "length", "warmup", "alerts"});
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto& s = population[i];
    char name[32];
    std::snprintf(name, sizeof name, "scores_%05zu.csv", i);
    {
      std::ofstream out(run.out() / name);
      out << "timestamp,value,score,alert\n";
      for (tad::Index t = 0; t < s.size(); ++t) {
        out << s.time_at(t) << ',' << tad::format_double(s.values()[t]) << ','
            << tad::format_double(scores[i].scores[t]) << ',' << static_cast<int>(alerts[i][static_cast<std::size_t>(t)])
            << '\n';
      }
    }
    Json alert_times = Json::array();
    for (tad::Index t = 0; t < s.size(); ++t) {
      if (alerts[i][static_cast<std::size_t>(t)]) alert_times.push_back(s.time_at(t));
    }
    const auto count = tad::count_ones(alerts[i]);
    run.record({{"type", "series"},
                {"series", i},
                {"input", inputs[i]},
                {"scores", name},
                {"protocol", batch ? "batch" : "streaming"},
                {"length", s.size()},
                {"warmup", scores[i].warmup},
                {"alerts", count},
                {"alert_times", std::move(alert_times)},
                {"timing", {{"seconds", elapsed[i]}}}});
    run.writer().summary_row({std::to_string(i), inputs[i], fmt(s.size()), fmt(scores[i].warmup), fmt(count)});
  }

  if (population.size() > 1) {
    const auto aligned = tad::align(population);
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (aligned[i].size() != population[i].size()) {
        tad::fail(tad::ErrorKind::alignment, "population inputs must cover the same time range");
      }
    }
    tad::AnomalyMatrix matrix(static_cast<tad::Index>(population.size()), population.front().size());
    for (std::size_t i = 0; i < population.size(); ++i) {
      for (tad::Index t = 0; t < matrix.cols(); ++t) matrix(static_cast<tad::Index>(i), t) = alerts[i][static_cast<std::size_t>(t)];
    }
    std::vector<std::string> ids;
    for (const auto& path : inputs) ids.push_back(fs::path(path).stem().string());
    std::vector<std::string> columns;
    for (tad::Index t = 0; t < matrix.cols(); ++t) columns.push_back(std::to_string(population.front().time_at(t)));
    tad::write_matrix_csv(run.out() / "anomalies.csv", ids, columns, matrix);
    run.record({{"type", "population"}, {"matrix", "anomalies.csv"}, {"rows", matrix.rows()}, {"cols", matrix.cols()}});
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_evaluate(Run& run) {
  const auto start = Clock::now();
  const auto detector = detector_for(run);
  const auto threshold = threshold_for(run);
  const auto loss = loss_for(run);
  const auto max_delay = max_delay_for(run);
  const bool batch_only = run.config().value("batch", false);
  run.resolved("batch", batch_only);
  const auto inputs = run.inputs();
  run.writer().summary_header({"series", "input", "protocol", "regret", "precision", "recall", "f1", "tp", "fp", "fn",
                               "alerts", "warmup_excluded", "mean_delay"});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto [series, labels] = load_labeled(run, inputs[i]);
    if (!labels) tad::fail(tad::ErrorKind::input, inputs[i] + ": evaluate needs a label column or --labels");
    std::vector<tad::EvalReport> reports;
    std::vector<double> elapsed;
    auto t0 = Clock::now();
    reports.push_back(tad::evaluate_batch(detector, threshold, series, *labels, loss, max_delay));
    elapsed.push_back(seconds_since(t0));
    if (!batch_only) {
      t0 = Clock::now();
      reports.push_back(tad::evaluate_streaming(detector, threshold, series, *labels, loss, max_delay));
      elapsed.push_back(seconds_since(t0));
    }
    for (std::size_t r = 0; r < reports.size(); ++r) {
      const auto& rep = reports[r];
      Json rec{{"type", "evaluation"}, {"series", i}, {"input", inputs[i]}};
      rec.update(tad::to_json(rep, true));
      rec["timing"] = {{"seconds", elapsed[r]}};
      run.record(std::move(rec));
      run.writer().summary_row({std::to_string(i), inputs[i], rep.protocol, fmt(rep.regret), fmt(rep.precision),
                                fmt(rep.recall), fmt(rep.f1), fmt(rep.true_positives), fmt(rep.false_positives),
                                fmt(rep.false_negatives), fmt(rep.alert_count), fmt(rep.warmup_excluded),
                                fmt(rep.delay.mean_delay)});
    }
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_hil(Run& run) {
  const auto start = Clock::now();
  const auto loss = loss_for(run);
  const auto max_delay = max_delay_for(run);
  const auto policy_name = run.config().value("policy", std::string("detector"));
  run.resolved("policy", policy_name);
  std::optional<tad::DetectorConfig> detector;
  std::optional<tad::ThresholdStrategy> threshold;
  if (policy_name == "detector") {
    detector = detector_for(run);
    threshold = threshold_for(run);
  } else if (policy_name != "always" && policy_name != "never") {
    tad::fail(tad::ErrorKind::spec, "policy must be one of detector, always, never");
  }
  const auto inputs = run.inputs();
  run.writer().summary_header({"series", "input", "policy", "regret", "precision", "recall", "f1", "alerts",
                               "feedback", "final_threshold"});
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto [series, labels] = load_labeled(run, inputs[i]);
    if (!labels) tad::fail(tad::ErrorKind::input, inputs[i] + ": hil needs a label column or --labels");
    std::unique_ptr<tad::HilPolicy> policy;
    tad::DetectorPolicy* detector_policy = nullptr;
    if (policy_name == "always") {
      policy = std::make_unique<tad::AlwaysFlagPolicy>();
    } else if (policy_name == "never") {
      policy = std::make_unique<tad::NeverFlagPolicy>();
    } else {
      auto p = std::make_unique<tad::DetectorPolicy>(*detector, *threshold);
      detector_policy = p.get();
      policy = std::move(p);
    }
    const auto t0 = Clock::now();
    const auto result = tad::run_hil(*policy, series, *labels, loss, max_delay);
    const double elapsed = seconds_since(t0);
    Json feedback = Json::array();
    for (const auto& e : result.feedback) feedback.push_back({e.index, e.label ? 1 : 0});
    const double final_threshold =
        detector_policy ? detector_policy->thresholder().current_threshold() : std::numeric_limits<double>::quiet_NaN();
    Json rec{{"type", "hil"}, {"series", i}, {"input", inputs[i]}, {"policy", policy_name}};
    rec.update(tad::to_json(result.report, true));
    rec["feedback"] = std::move(feedback);
    rec["final_threshold"] = std::isfinite(final_threshold) ? Json(final_threshold) : Json(nullptr);
    rec["timing"] = {{"seconds", elapsed}};
    run.record(std::move(rec));
    const auto& rep = result.report;
    run.writer().summary_row({std::to_string(i), inputs[i], policy_name, fmt(rep.regret), fmt(rep.precision),
                              fmt(rep.recall), fmt(rep.f1), fmt(rep.alert_count),
                              std::to_string(result.feedback.size()), fmt(final_threshold)});
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_bench_period(Run& run) {
  const auto start = Clock::now();
  tad::PeriodicGeneratorConfig base;
  base.seed = run.seed(true);
  const auto gen = tad::generator_config(run.section("generator"), base);
  run.resolved("generator", tad::to_json(gen));
  const auto n_series = run.config().value("n_series", tad::Index{1000});
  if (n_series < 1) tad::fail(tad::ErrorKind::spec, "n_series must be positive");
  run.resolved("n_series", n_series);
  std::vector<tad::PeriodMethod> methods;
  const auto names = run.config().value("methods", std::vector<std::string>{"all"});
  for (const auto& name : names) {
    if (name == "all") {
      for (auto m : tad::all_period_methods()) methods.push_back(m);
    } else {
      methods.push_back(tad::parse_period_method(name));
    }
  }
  run.resolved("methods", names);
  tad::BenchmarkOptions options;
  options.threads = run.threads();
  const auto result = tad::run_period_benchmark(n_series, gen, methods, options);

  Json table = tad::to_json(result);
  table["type"] = "accuracy_table";
  run.record(std::move(table));
  for (std::size_t i = 0; i < result.series.size(); ++i) {
    const auto& s = result.series[i];
    Json estimates = Json::object();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto& e = s.estimates[m];
      estimates[std::string(tad::to_string(methods[m]))] = e ? Json(*e) : Json(nullptr);
    }
    run.record({{"type", "series"},
                {"series", i},
                {"length", s.length},
                {"true_period", s.true_period},
                {"estimates", std::move(estimates)}});
  }
  run.writer().summary_header({"method", "accuracy", "accuracy_within_one", "detected", "mean_runtime_seconds"});
  for (const auto& row : result.rows) {
    run.writer().summary_row({std::string(tad::to_string(row.method)), fmt(row.accuracy), fmt(row.accuracy_within_one),
                              fmt(row.detected), fmt(row.mean_runtime)});
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

void task_conditional(Run& run) {
  const auto start = Clock::now();
  const auto inputs = run.inputs();
  if (inputs.size() != 1) tad::fail(tad::ErrorKind::spec, "conditional takes one multi-column --input");
  auto columns = tad::load_frame_csv(inputs.front());
  if (columns.size() < 2) tad::fail(tad::ErrorKind::input, "conditional needs a target column and at least one covariate");
  const auto target_name = columns.front().first;
  tad::TimeSeries target = columns.front().second;
  columns.erase(columns.begin());
  const tad::CovariateSet data(std::move(target), std::move(columns));

  const auto model = run.config().value("model", std::string("both"));
  if (model != "conditional" && model != "joint" && model != "both") {
    tad::fail(tad::ErrorKind::spec, "model must be one of conditional, joint, both");
  }
  run.resolved("model", model);
  const auto threshold = threshold_for(run);
  std::vector<std::pair<std::string, tad::ScoreSequence>> results;
  Json timing = Json::object();
  if (model != "joint") {
    const auto cfg = tad::conditional_config(run.section("conditional"));
    run.resolved("conditional", tad::to_json(cfg));
    const auto t0 = Clock::now();
    results.emplace_back("conditional", tad::run_conditional(cfg, data));
    timing["conditional_seconds"] = seconds_since(t0);
  }
  if (model != "conditional") {
    const auto cfg = tad::joint_config(run.section("joint"));
    run.resolved("joint", tad::to_json(cfg));
    const auto t0 = Clock::now();
    results.emplace_back("joint", tad::run_joint(cfg, data));
    timing["joint_seconds"] = seconds_since(t0);
  }

  {
    std::ofstream out(run.out() / "scores.csv");
    out << "timestamp," << tad::csv_escape(target_name);
    for (const auto& [name, s] : results) out << ',' << name << "_score," << name << "_alert";
    out << '\n';
    std::vector<tad::Labels> alerts;
    for (const auto& [name, s] : results) alerts.push_back(tad::apply_threshold(s, threshold));
    for (tad::Index t = 0; t < data.length(); ++t) {
      out << data.target().time_at(t) << ',' << tad::format_double(data.target().values()[t]);
      for (std::size_t r = 0; r < results.size(); ++r) {
        out << ',' << tad::format_double(results[r].second.scores[t]) << ','
            << static_cast<int>(alerts[r][static_cast<std::size_t>(t)]);
      }
      out << '\n';
    }
  }
  run.writer().summary_header({"model", "length", "warmup", "alerts", "max_score_time"});
  for (const auto& [name, s] : results) {
    const auto alerts = tad::apply_threshold(s, threshold);
    Json alert_times = Json::array();
    for (tad::Index t = 0; t < s.size(); ++t) {
      if (alerts[static_cast<std::size_t>(t)]) alert_times.push_back(data.target().time_at(t));
    }
    tad::Index argmax = -1;
    for (tad::Index t = s.warmup; t < s.size(); ++t) {
      if (argmax < 0 || s.scores[t] > s.scores[argmax]) argmax = t;
    }
    const Json max_time = argmax >= 0 ? Json(data.target().time_at(argmax)) : Json(nullptr);
    run.record({{"type", "model"},
                {"model", name},
                {"target", target_name},
                {"length", s.size()},
                {"warmup", s.warmup},
                {"alerts", tad::count_ones(alerts)},
                {"alert_times", std::move(alert_times)},
                {"max_score_time", max_time}});
    run.writer().summary_row({name, fmt(s.size()), fmt(s.warmup), fmt(tad::count_ones(alerts)),
                              argmax >= 0 ? std::to_string(data.target().time_at(argmax)) : std::string()});
  }
  timing["total_seconds"] = seconds_since(start);
  run.finish(std::move(timing));
}

/// Replaces columns whose every value parses as a number by equal-frequency bins.
void bin_numeric(tad::AttributeTable& table, tad::Index bins) {
  for (std::size_t a = 0; a < table.schema.size(); ++a) {
    std::vector<double> values;
    bool numeric = !table.rows.empty();
    for (const auto& row : table.rows) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(row[a], &used));
        numeric = numeric && used == row[a].size();
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) continue;
    const auto labels = tad::equal_frequency_bins(values, bins);
    for (std::size_t r = 0; r < table.rows.size(); ++r) table.rows[r][a] = labels[r];
  }
}

void task_cohort(Run& run) {
  const auto start = Clock::now();
  const auto inputs = run.inputs();
  if (inputs.size() != 1) tad::fail(tad::ErrorKind::spec, "cohort takes one anomaly matrix --input");
  if (!run.config().contains("attributes")) tad::fail(tad::ErrorKind::spec, "cohort needs --attributes");
  const auto matrix = tad::load_matrix_csv(inputs.front());
  const auto attributes = tad::load_attributes_csv(run.config()["attributes"].get<std::string>());
  auto table = tad::select_rows(attributes, matrix.ids);
  if (run.config().contains("bins")) {
    const auto bins = run.config()["bins"].get<tad::Index>();
    bin_numeric(table, bins);
  }
  const auto miner = tad::miner_config(run.section("miner"));
  run.resolved("miner", tad::to_json(miner));
  const auto timeline = tad::mine_rules_over_time(matrix.matrix, table, miner);

  for (std::size_t t = 0; t < timeline.per_step.size(); ++t) {
    const auto& rules = timeline.per_step[t];
    if (rules.empty()) continue;
    Json top = Json::array();
    for (std::size_t r = 0; r < std::min<std::size_t>(rules.size(), 5); ++r) top.push_back(tad::to_json(rules[r]));
    run.record({{"type", "step"}, {"step", t}, {"column", matrix.columns[t]}, {"rules", std::move(top)}});
  }
  run.writer().summary_header({"begin", "end", "begin_column", "end_column", "rule", "score", "coverage"});
  for (const auto& iv : timeline.intervals) {
    Json rec{{"type", "interval"},
             {"begin", iv.begin},
             {"end", iv.end},
             {"begin_column", matrix.columns[static_cast<std::size_t>(iv.begin)]},
             {"end_column", matrix.columns[static_cast<std::size_t>(iv.end - 1)]}};
    rec.update(tad::to_json(iv.rule));
    run.record(std::move(rec));
    run.writer().summary_row({fmt(iv.begin), fmt(iv.end), matrix.columns[static_cast<std::size_t>(iv.begin)],
                              matrix.columns[static_cast<std::size_t>(iv.end - 1)], iv.rule.to_string(),
                              fmt(iv.rule.score), fmt(iv.rule.coverage)});
  }
  run.finish({{"total_seconds", seconds_since(start)}});
}

const char* module_of(const std::string& task) {
  if (task == "datagen") return "datagen";
  if (task == "resample") return "resample";
  if (task == "detect") return "detectors";
  if (task == "evaluate" || task == "hil") return "evaluation";
  if (task == "bench-period") return "periodicity";
  if (task == "conditional") return "conditional";
  if (task == "cohort") return "cohort";
  return "cli_io";
}

int report_error(const std::string& task, const std::string& kind, const std::string& message) {
  const Json err{{"error", {{"kind", kind}, {"module", module_of(task)}, {"task", task}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-series anomaly detection toolkit"};
  app.set_version_flag("--version", TAD_VERSION);
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config_path, "JSON config; flags override its keys");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--out", f.out, "Output directory (default: out)");
    sub->add_option("--threads", f.threads, "Worker threads");
  };
  auto detector_flags = [&](CLI::App* sub) {
    sub->add_option("--detector", f.detector, "spectral_residual|ewma_residual|left_discord|kmeans_window");
    sub->add_option("--window", f.window, "Window length or 'auto'");
  };
  auto threshold_flags = [&](CLI::App* sub) {
    sub->add_option("--threshold", f.threshold, "fixed_value|trailing_percentile|k_sigma|feedback_adaptive");
    sub->add_option("--threshold-value", f.threshold_value, "Fixed or initial threshold");
    sub->add_option("--percentile", f.percentile, "Trailing percentile in (0, 1)");
    sub->add_option("--k", f.k, "k for k_sigma");
  };
  auto loss_flags = [&](CLI::App* sub) {
    sub->add_option("--lambda-fn", f.lambda_fn, "Cost of a missed anomaly");
    sub->add_option("--lambda-fp", f.lambda_fp, "Cost of a false alert");
    sub->add_option("--max-delay", f.max_delay, "Detection-delay grace window in steps");
  };

  auto* datagen = app.add_subcommand("datagen", "Generate seeded periodic series");
  common(datagen);
  datagen->add_option("--n-series", f.n_series, "Number of series");
  datagen->add_option("--length", f.length, "Fixed length");
  datagen->add_option("--period", f.period, "Fixed period");
  datagen->add_flag("--inject", f.inject, "Inject point anomalies");
  datagen->add_option("--epsilon", f.epsilon, "Anomaly rate");

  auto* resample = app.add_subcommand("resample", "Aggregate an event stream onto a grid");
  common(resample);
  resample->add_option("--input", f.inputs, "Event CSV");
  resample->add_option("--interval", f.interval, "Bin width in seconds");
  resample->add_option("--aggregation", f.aggregation, "mean|sum|count|min|max|last");
  resample->add_option("--empty-bins", f.empty_bins, "missing|zero|carry_forward");
  resample->add_option("--anchor", f.anchor, "Grid anchor (epoch seconds)");
  resample->add_option("--suggest", f.suggest, "Candidate intervals for rate suggestion");

  auto* detect = app.add_subcommand("detect", "Score series and threshold the scores");
  common(detect);
  detect->add_option("--input", f.inputs, "Series CSV (repeat for a population)");
  detector_flags(detect);
  threshold_flags(detect);
  detect->add_flag("--batch", f.batch, "Fit on the whole series instead of streaming");

  auto* evaluate = app.add_subcommand("evaluate", "Batch and streaming evaluation against labels");
  common(evaluate);
  evaluate->add_option("--input", f.inputs, "Series CSV with a label column");
  evaluate->add_option("--labels", f.labels, "Separate label CSV");
  detector_flags(evaluate);
  threshold_flags(evaluate);
  loss_flags(evaluate);
  evaluate->add_flag("--batch", f.batch, "Batch protocol only");

  auto* hil = app.add_subcommand("hil", "Human-in-the-loop simulation with censored feedback");
  common(hil);
  hil->add_option("--input", f.inputs, "Series CSV with a label column");
  hil->add_option("--labels", f.labels, "Separate label CSV");
  hil->add_option("--policy", f.policy, "detector|always|never");
  detector_flags(hil);
  threshold_flags(hil);
  loss_flags(hil);

  auto* bench = app.add_subcommand("bench-period", "Period-detection accuracy benchmark");
  common(bench);
  bench->add_option("--n-series", f.n_series, "Number of generated series");
  bench->add_option("--methods", f.methods, "Methods (random fft autoperiod acf peaks | all)");

  auto* conditional = app.add_subcommand("conditional", "Conditional and joint covariate detectors");
  common(conditional);
  conditional->add_option("--input", f.inputs, "CSV: timestamp,target,covariate...");
  conditional->add_option("--model", f.model, "conditional|joint|both");
  threshold_flags(conditional);

  auto* cohort = app.add_subcommand("cohort", "Mine attribute rules over an anomaly matrix");
  common(cohort);
  cohort->add_option("--input", f.inputs, "Anomaly matrix CSV");
  cohort->add_option("--attributes", f.attributes, "Attribute CSV");
  cohort->add_option("--max-depth", f.max_depth, "Maximum rule length");
  cohort->add_option("--min-score", f.min_score, "Minimum rule quality");
  cohort->add_option("--quality", f.quality, "f1|precision_at_min_recall");
  cohort->add_option("--bins", f.bins, "Equal-frequency bins for numeric attributes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string task = app.get_subcommands().front()->get_name();

  try {
    Run run(task, resolve(task, f));
    if (task == "datagen") task_datagen(run);
    else if (task == "resample") task_resample(run);
    else if (task == "detect") task_detect(run);
    else if (task == "evaluate") task_evaluate(run);
    else if (task == "hil") task_hil(run);
    else if (task == "bench-period") task_bench_period(run);
    else if (task == "conditional") task_conditional(run);
    else if (task == "cohort") task_cohort(run);
  } catch (const tad::Error& e) {
    return report_error(task, std::string(tad::to_string(e.kind())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return report_error(task, "spec", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(task, "io", e.what());
  }
  return 0;
}

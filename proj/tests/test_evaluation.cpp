#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "tad/error.hpp"
#include "tad/evaluation.hpp"
#include "tad/rng.hpp"

using namespace tad;

namespace {

TimeSeries make_series(const std::vector<double>& v) {
  return TimeSeries(0, 1, Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
}

Labels random_labels(std::uint64_t seed, std::size_t n, double p) {
  Rng rng(seed);
  Labels l(n);
  for (auto& v : l) v = rng.uniform() < p;
  return l;
}

using scenario::spiked_noise;

void check_log_matches_predictions(const HilResult& r) {
  std::vector<Index> flagged;
  for (std::size_t t = 0; t < r.report.predictions.size(); ++t) {
    if (r.report.predictions[t]) flagged.push_back(static_cast<Index>(t));
  }
  std::vector<Index> logged;
  for (const auto& e : r.feedback) logged.push_back(e.index);
  CHECK(logged == flagged);
  CHECK(std::is_sorted(logged.begin(), logged.end()));
  CHECK(std::adjacent_find(logged.begin(), logged.end()) == logged.end());
}

}  // namespace

TEST_CASE("perfect predictions have zero regret") {
  const auto labels = random_labels(1, 300, 0.05);
  const Labels scored(300, 1);
  const auto r = score_predictions("batch", labels, labels, scored, LossSpec{3.0, 2.0}, 0);
  CHECK(r.regret == 0.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
}

TEST_CASE("constant predictions cost the weighted error count") {
  const auto labels = random_labels(2, 500, 0.07);
  const Index m = count_ones(labels);
  const Index n = 500;
  const LossSpec loss{4.0, 0.5};
  const Labels scored(500, 1);
  const auto none = score_predictions("batch", Labels(500, 0), labels, scored, loss, 0);
  CHECK(none.regret == doctest::Approx(static_cast<double>(m) * loss.lambda_fn));
  CHECK(none.alert_count == 0);
  const auto all = score_predictions("batch", Labels(500, 1), labels, scored, loss, 0);
  CHECK(all.regret == doctest::Approx(static_cast<double>(n - m) * loss.lambda_fp));
  CHECK(all.recall == 1.0);
}

TEST_CASE("metrics agree with a direct confusion count and skip warmup") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto labels = random_labels(seed, 200, 0.1);
    const auto pred = random_labels(seed + 100, 200, 0.15);
    Labels scored(200, 1);
    std::fill(scored.begin(), scored.begin() + 17, 0);
    const auto r = score_predictions("streaming", pred, labels, scored, LossSpec{}, 0);
    const Labels p2(pred.begin() + 17, pred.end()), l2(labels.begin() + 17, labels.end());
    const auto c = oracle::confusion(p2, l2);
    CHECK(r.true_positives == c.tp);
    CHECK(r.false_positives == c.fp);
    CHECK(r.false_negatives == c.fn);
    CHECK(r.true_negatives == c.tn);
    CHECK(r.warmup_excluded == 17);
    CHECK(r.f1 == doctest::Approx(oracle::f1(p2, l2)));
    CHECK(r.regret == static_cast<double>(c.fp + c.fn));
    CHECK(r.precision >= 0.0);
    CHECK(r.precision <= 1.0);
  }
}

TEST_CASE("detection delay rule") {
  Labels labels(40, 0);
  for (int t = 10; t <= 12; ++t) labels[static_cast<std::size_t>(t)] = 1;
  Labels pred(40, 0);
  pred[10] = 1;
  auto d = detection_delay(pred, labels, 0);
  CHECK(d.delays == std::vector<Index>{0});
  CHECK(d.missed == 0);

  pred.assign(40, 0);
  pred[16] = 1;
  d = detection_delay(pred, labels, 5);
  CHECK(d.delays == std::vector<Index>{6});
  CHECK(d.mean_delay == 6.0);

  pred.assign(40, 0);
  pred[30] = 1;
  d = detection_delay(pred, labels, 5);
  CHECK(d.delays.empty());
  CHECK(d.missed == 1);
  CHECK(d.events == 1);
  CHECK(std::isnan(d.mean_delay));

  // Alerts before the event do not count.
  pred.assign(40, 0);
  pred[9] = 1;
  CHECK(detection_delay(pred, labels, 5).missed == 1);

  try {
    (void)detection_delay(pred, labels, -1);
    FAIL("expected a spec error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::spec);
  }
}

TEST_CASE("detection delay counts contiguous runs") {
  Labels labels{0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
  Labels pred{0, 0, 1, 0, 0, 0, 0, 0, 0, 1};
  const auto d = detection_delay(pred, labels, 0);
  CHECK(d.events == 3);
  CHECK(d.delays == std::vector<Index>{1, 2});
  CHECK(d.missed == 1);
}

TEST_CASE("ewma with a fixed threshold alerts exactly at the spike") {
  std::vector<double> v(300, 4.0);
  v[200] = 9.0;
  Labels labels(300, 0);
  labels[200] = 1;
  DetectorConfig det;
  det.kind = DetectorKind::ewma_residual;
  det.window = std::nullopt;
  ThresholdStrategy th;
  th.kind = ThresholdKind::fixed_value;
  th.value = 100.0;
  const auto r = evaluate_streaming(det, th, make_series(v), labels, LossSpec{});
  CHECK(r.alert_count == 1);
  CHECK(r.predictions[200] == 1);
  CHECK(r.regret == 0.0);
  CHECK(r.protocol == "streaming");
  CHECK(r.warmup_excluded == 1);

  const auto quiet = evaluate_streaming(det, th, make_series(std::vector<double>(300, 4.0)), Labels(300, 0), LossSpec{});
  CHECK(quiet.alert_count == 0);
  CHECK(quiet.regret == 0.0);
}

TEST_CASE("streaming evaluation equals the literal prefix-refit loop") {
  const DetectorKind kinds[] = {DetectorKind::spectral_residual, DetectorKind::ewma_residual,
                                DetectorKind::left_discord, DetectorKind::kmeans_window};
  const auto data = spiked_noise(3, 120, 3, 6.0);
  for (auto kind : kinds) {
    DetectorConfig det;
    det.kind = kind;
    det.window = 8;
    det.kmeans_cadence = 5;
    ThresholdStrategy th;
    th.kind = ThresholdKind::k_sigma;
    th.min_history = 10;
    const auto r = evaluate_streaming(det, th, make_series(data.values), data.labels, LossSpec{});
    const auto scores = oracle::prefix_refit_scores(det, data.values);
    Thresholder literal(th);
    Labels expected;
    for (double s : scores) {
      expected.push_back(literal.decide(std::isnan(s) ? std::nullopt : std::optional<double>(s)));
    }
    CHECK(r.predictions == expected);
  }
}

TEST_CASE("label length mismatch is an alignment error") {
  DetectorConfig det;
  det.window = 16;
  try {
    (void)evaluate_batch(det, ThresholdStrategy{}, make_series(std::vector<double>(50, 1.0)), Labels(49, 0), LossSpec{});
    FAIL("expected an alignment error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::alignment);
  }
  CHECK_THROWS_AS(evaluate_streaming(det, ThresholdStrategy{}, make_series(std::vector<double>(50, 1.0)), Labels(51, 0),
                                     LossSpec{}),
                  Error);
}

TEST_CASE("batch protocol is labeled and shaped") {
  const auto data = spiked_noise(4, 400, 4, 8.0);
  DetectorConfig det;
  det.kind = DetectorKind::ewma_residual;
  ThresholdStrategy th;
  th.kind = ThresholdKind::fixed_value;
  th.value = 4.0;
  const auto r = evaluate_batch(det, th, make_series(data.values), data.labels, LossSpec{});
  CHECK(r.protocol == "batch");
  CHECK(r.predictions.size() == 400);
  CHECK(r.recall == 1.0);
}

TEST_CASE("always and never flag policies") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto labels = random_labels(seed, 250, 0.08);
    const Index m = count_ones(labels);
    const Index n = 250;
    const LossSpec loss{5.0, 0.25};
    const auto series = make_series(std::vector<double>(250, 0.0));
    AlwaysFlagPolicy always;
    NeverFlagPolicy never;
    const auto a = run_hil(always, series, labels, loss);
    const auto b = run_hil(never, series, labels, loss);
    CHECK(a.report.regret == doctest::Approx(static_cast<double>(n - m) * loss.lambda_fp));
    CHECK(static_cast<Index>(a.feedback.size()) == n);
    CHECK(b.report.regret == doctest::Approx(static_cast<double>(m) * loss.lambda_fn));
    CHECK(b.feedback.empty());
    CHECK(a.report.regret + b.report.regret ==
          doctest::Approx(static_cast<double>(n) * loss.lambda_fp - static_cast<double>(m) * loss.lambda_fp +
                          static_cast<double>(m) * loss.lambda_fn));
    check_log_matches_predictions(a);
    check_log_matches_predictions(b);
    for (const auto& e : a.feedback) CHECK(e.label == labels[static_cast<std::size_t>(e.index)]);
  }
}

namespace {

/// Records what it was shown so tests can check the censorship rule.
class SpyPolicy final : public HilPolicy {
 public:
  std::optional<bool> decide(std::span<const double> prefix, const FeedbackLog& feedback) override {
    const auto t = static_cast<Index>(prefix.size()) - 1;
    for (const auto& e : feedback) {
      CHECK(e.index < t);
      CHECK(flagged.count(e.index) == 1);
    }
    max_seen = std::max(max_seen, static_cast<Index>(prefix.size()));
    const bool flag = (t % 3) == 0;
    if (flag) flagged.insert(t);
    return flag;
  }
  std::set<Index> flagged;
  Index max_seen = 0;
};

}  // namespace

TEST_CASE("policies see only the prefix and labels of flagged points") {
  const auto labels = random_labels(77, 90, 0.3);
  SpyPolicy spy;
  const auto r = run_hil(spy, make_series(std::vector<double>(90, 1.0)), labels, LossSpec{});
  CHECK(spy.max_seen == 90);
  check_log_matches_predictions(r);
  CHECK(static_cast<Index>(r.feedback.size()) == 30);
}

TEST_CASE("detector policy forwards feedback and matches the streaming run without it") {
  const auto data = spiked_noise(5, 600, 10, 7.0);
  DetectorConfig det;
  det.kind = DetectorKind::ewma_residual;
  ThresholdStrategy th;
  th.kind = ThresholdKind::fixed_value;
  th.value = 3.0;
  DetectorPolicy policy(det, th);
  const auto hil = run_hil(policy, make_series(data.values), data.labels, LossSpec{});
  const auto stream = evaluate_streaming(det, th, make_series(data.values), data.labels, LossSpec{});
  CHECK(hil.report.predictions == stream.predictions);
  CHECK(hil.report.regret == stream.regret);
  check_log_matches_predictions(hil);
}

TEST_CASE("feedback adaptation beats a miscalibrated fixed threshold") {
  double fixed_total = 0.0, adaptive_total = 0.0;
  int adaptive_wins = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto data = spiked_noise(1000 + seed, 2000, 20, 6.0);
    DetectorConfig det;
    det.kind = DetectorKind::ewma_residual;
    ThresholdStrategy th;
    th.kind = ThresholdKind::fixed_value;
    th.value = 1.0;
    DetectorPolicy fixed(det, th);
    th.kind = ThresholdKind::feedback_adaptive;
    DetectorPolicy adaptive(det, th);
    const auto f = run_hil(fixed, make_series(data.values), data.labels, LossSpec{});
    const auto a = run_hil(adaptive, make_series(data.values), data.labels, LossSpec{});
    check_log_matches_predictions(a);
    fixed_total += f.report.regret;
    adaptive_total += a.report.regret;
    adaptive_wins += a.report.regret < f.report.regret;
  }
  CHECK(adaptive_total < fixed_total);
  CHECK(adaptive_wins >= 25);
}

TEST_CASE("population runs are row-independent") {
  const auto base = spiked_noise(9, 300, 2, 8.0).values;
  std::vector<TimeSeries> same(6, make_series(base));
  DetectorConfig det;
  det.kind = DetectorKind::left_discord;
  det.window = 10;
  ThresholdStrategy th;
  th.kind = ThresholdKind::k_sigma;
  const auto m = run_population(det, th, same, 2);
  CHECK(m.rows() == 6);
  CHECK(m.cols() == 300);
  for (Index i = 1; i < 6; ++i) CHECK(m.row(i) == m.row(0));
  CHECK(run_population(det, th, same, 1) == m);
}

TEST_CASE("population recall with ewma and k sigma") {
  std::vector<TimeSeries> pop;
  std::vector<Index> spikes;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto data = spiked_noise(5000 + i, 500, 1, 8.0);
    pop.push_back(make_series(data.values));
    spikes.push_back(std::find(data.labels.begin(), data.labels.end(), 1) - data.labels.begin());
  }
  DetectorConfig det;
  det.kind = DetectorKind::ewma_residual;
  ThresholdStrategy th;
  th.kind = ThresholdKind::k_sigma;
  th.k = 3.0;
  const auto m = run_population(det, th, pop);
  const Index max_delay = 2;
  int recovered = 0;
  for (Index i = 0; i < 50; ++i) {
    bool hit = false;
    for (Index t = spikes[static_cast<std::size_t>(i)]; t <= std::min<Index>(499, spikes[static_cast<std::size_t>(i)] + max_delay); ++t) {
      hit = hit || m(i, t) == 1;
    }
    recovered += hit;
  }
  CHECK(recovered >= 45);
}

TEST_CASE("population alignment is enforced") {
  std::vector<TimeSeries> pop{make_series(std::vector<double>(20, 0.0)), make_series(std::vector<double>(21, 0.0))};
  CHECK_THROWS_AS(run_population(DetectorConfig{}, ThresholdStrategy{}, pop), Error);
  CHECK(run_population(DetectorConfig{}, ThresholdStrategy{}, std::vector<TimeSeries>{}).size() == 0);
}

TEST_CASE("loss validation") {
  CHECK_THROWS_AS((LossSpec{-1.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((LossSpec{1.0, std::numeric_limits<double>::infinity()}.validate()), Error);
  CHECK_NOTHROW((LossSpec{0.0, 0.0}.validate()));
}

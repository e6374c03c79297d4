#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "scenarios.hpp"
#include "tad/cohort.hpp"
#include "tad/error.hpp"
#include "tad/rng.hpp"

using namespace tad;

namespace {

AttributeTable region_table() {
  AttributeTable t;
  t.schema = {"region", "device"};
  const char* regions[] = {"A", "B", "C"};
  const char* devices[] = {"phone", "tablet"};
  for (int i = 0; i < 30; ++i) t.rows.push_back({regions[i % 3], devices[(i / 3) % 2]});
  return t;
}

bool matches(const Rule& r, const AttributeTable& t, Index i) {
  for (const auto& term : r.terms) {
    const auto col = std::find(t.schema.begin(), t.schema.end(), term.attribute) - t.schema.begin();
    if (t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)] != term.value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("planted single-attribute rule is exact") {
  const auto table = region_table();
  Labels anomalous(30, 0);
  for (int i = 0; i < 30; ++i) anomalous[static_cast<std::size_t>(i)] = table.rows[static_cast<std::size_t>(i)][0] == "B";
  const auto rules = mine_rules(anomalous, table, CohortMinerConfig{});
  REQUIRE_FALSE(rules.empty());
  CHECK(rules.front().to_string() == "region=B");
  CHECK(rules.front().score == 1.0);
  CHECK(rules.front().coverage == 10);
}

TEST_CASE("no anomalies yields no rules") {
  CHECK(mine_rules(Labels(30, 0), region_table(), CohortMinerConfig{}).empty());
}

TEST_CASE("returned scores match a brute-force recount") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = scenario::planted_cohort(seed, 120, 0.3);
    CohortMinerConfig config;
    config.min_score = 0.05;
    for (auto quality : {RuleQuality::f1, RuleQuality::precision_at_min_recall}) {
      config.quality = quality;
      config.min_recall = 0.3;
      const auto rules = mine_rules(p.anomalous, p.attributes, config);
      const Index positives = count_ones(p.anomalous);
      for (const auto& r : rules) {
        Index coverage = 0, tp = 0;
        for (Index i = 0; i < p.attributes.size(); ++i) {
          if (!matches(r, p.attributes, i)) continue;
          ++coverage;
          tp += p.anomalous[static_cast<std::size_t>(i)];
        }
        CHECK(r.coverage == coverage);
        CHECK(r.true_positives == tp);
        const double precision = static_cast<double>(tp) / static_cast<double>(coverage);
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double expected = quality == RuleQuality::f1
                                    ? 2.0 * static_cast<double>(tp) / static_cast<double>(coverage + positives)
                                    : (recall >= 0.3 ? precision : 0.0);
        CHECK(r.score == expected);
        CHECK(r.score >= config.min_score);
        CHECK(r.score <= 1.0);
        CHECK(static_cast<Index>(r.terms.size()) >= 1);
        CHECK(static_cast<Index>(r.terms.size()) <= config.max_depth);
        for (std::size_t a = 0; a < r.terms.size(); ++a) {
          for (std::size_t b = a + 1; b < r.terms.size(); ++b) CHECK(r.terms[a].attribute != r.terms[b].attribute);
        }
      }
      for (std::size_t k = 1; k < rules.size(); ++k) CHECK(rules[k - 1].score >= rules[k].score);
    }
  }
}

TEST_CASE("planted conjunction is recovered under label noise") {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = scenario::planted_cohort(seed);
    const auto rules = mine_rules(p.anomalous, p.attributes, CohortMinerConfig{});
    REQUIRE_FALSE(rules.empty());
    if (rules.front().to_string() == "device=A AND region=B" && rules.front().score >= 0.85) ++recovered;
  }
  CHECK(recovered >= 18);
}

TEST_CASE("general rule wins a tie with its refinement") {
  AttributeTable t;
  t.schema = {"region", "device"};
  // Every region=B series is a phone, so region=B and region=B AND device=phone
  // select the same series.
  t.rows = {{"B", "phone"}, {"B", "phone"}, {"A", "phone"}, {"A", "tablet"}, {"C", "tablet"}};
  const Labels anomalous{1, 1, 0, 0, 0};
  const auto rules = mine_rules(anomalous, t, CohortMinerConfig{});
  REQUIRE(rules.size() >= 2);
  CHECK(rules[0].to_string() == "region=B");
  CHECK(rules[1].to_string() == "region=B AND device=phone");
  CHECK(rules[0].score == rules[1].score);
}

TEST_CASE("mining is invariant to series order") {
  const auto p = scenario::planted_cohort(4, 150, 0.2);
  CohortMinerConfig config;
  config.min_score = 0.1;
  const auto base = mine_rules(p.anomalous, p.attributes, config);
  std::vector<std::size_t> order(150);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    AttributeTable t;
    t.schema = p.attributes.schema;
    Labels a;
    for (auto i : order) {
      t.rows.push_back(p.attributes.rows[i]);
      a.push_back(p.anomalous[i]);
    }
    const auto shuffled = mine_rules(a, t, config);
    REQUIRE(shuffled.size() == base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      CHECK(shuffled[k].same_terms(base[k]));
      CHECK(shuffled[k].score == base[k].score);
    }
  }
}

TEST_CASE("schema mismatch and candidate guard") {
  try {
    (void)mine_rules(Labels(29, 1), region_table(), CohortMinerConfig{});
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::schema);
  }
  CohortMinerConfig config;
  config.max_candidates = 5;
  Labels some(30, 0);
  some[0] = 1;
  try {
    (void)mine_rules(some, region_table(), config);
    FAIL("expected a spec error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::spec);
  }
  config.max_candidates = 11;  // 5 single terms + 6 pairs
  CHECK_NOTHROW(mine_rules(some, region_table(), config));
  CohortMinerConfig bad;
  bad.min_score = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(parse_rule_quality("lift"), Error);
}

TEST_CASE("a rule active on one interval is reported once") {
  const auto table = region_table();
  AnomalyMatrix m = AnomalyMatrix::Zero(30, 300);
  for (Index i = 0; i < 30; ++i) {
    if (table.rows[static_cast<std::size_t>(i)][0] != "B") continue;
    for (Index t = 100; t < 200; ++t) m(i, t) = 1;
  }
  const auto timeline = mine_rules_over_time(m, table, CohortMinerConfig{});
  CHECK(timeline.per_step.size() == 300);
  REQUIRE(timeline.intervals.size() == 1);
  CHECK(timeline.intervals[0].begin == 100);
  CHECK(timeline.intervals[0].end == 200);
  CHECK(timeline.intervals[0].rule.to_string() == "region=B");
  CHECK(timeline.per_step[99].empty());
}

TEST_CASE("empty matrix gives an empty report") {
  const auto timeline = mine_rules_over_time(AnomalyMatrix(0, 0), AttributeTable{}, CohortMinerConfig{});
  CHECK(timeline.per_step.empty());
  CHECK(timeline.intervals.empty());
  CHECK_THROWS_AS(mine_rules_over_time(AnomalyMatrix::Zero(4, 10), region_table(), CohortMinerConfig{}), Error);
}

TEST_CASE("two cohorts in disjoint intervals") {
  const auto table = region_table();
  AnomalyMatrix m = AnomalyMatrix::Zero(30, 120);
  Rng rng(3);
  for (Index i = 0; i < 30; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (Index t = 10; t < 40; ++t) m(i, t) = row[1] == "tablet";
    for (Index t = 70; t < 110; ++t) m(i, t) = row[0] == "C" && row[1] == "phone";
  }
  const auto timeline = mine_rules_over_time(m, table, CohortMinerConfig{});
  REQUIRE(timeline.intervals.size() == 2);
  CHECK(timeline.intervals[0].begin == 10);
  CHECK(timeline.intervals[0].end == 40);
  CHECK(timeline.intervals[0].rule.to_string() == "device=tablet");
  CHECK(timeline.intervals[1].begin == 70);
  CHECK(timeline.intervals[1].end == 110);
  CHECK(timeline.intervals[1].rule.to_string() == "region=C AND device=phone");
}

TEST_CASE("minimum support skips sparse steps") {
  const auto table = region_table();
  AnomalyMatrix m = AnomalyMatrix::Zero(30, 5);
  m(0, 1) = 1;
  m(0, 3) = 1;
  m(3, 3) = 1;
  CohortMinerConfig config;
  config.min_support = 2;
  config.min_score = 0.1;
  const auto timeline = mine_rules_over_time(m, table, config);
  CHECK(timeline.per_step[1].empty());
  CHECK_FALSE(timeline.per_step[3].empty());
}

TEST_CASE("equal-frequency bins") {
  const std::vector<double> v{5.0, 1.0, 3.0, 2.0, 4.0, 6.0};
  const auto bins = equal_frequency_bins(v, 3);
  CHECK(bins == std::vector<std::string>{"q2", "q0", "q1", "q0", "q1", "q2"});
  const std::vector<double> ties{1.0, 1.0, 1.0, 2.0};
  const auto t = equal_frequency_bins(ties, 2);
  CHECK(t[0] == t[1]);
  CHECK(t[1] == t[2]);
}

#include "tad/cohort.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace tad {

std::string Rule::to_string() const {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += " AND ";
    out += t.attribute + "=" + t.value;
  }
  return out;
}

RuleQuality parse_rule_quality(std::string_view name) {
  if (name == "f1") return RuleQuality::f1;
  if (name == "precision_at_min_recall") return RuleQuality::precision_at_min_recall;
  fail(ErrorKind::spec, "unknown rule quality '" + std::string(name) + "'");
}

void CohortMinerConfig::validate() const {
  if (max_depth < 1) fail(ErrorKind::spec, "max_depth must be at least 1");
  if (!(min_score > 0.0 && min_score <= 1.0)) fail(ErrorKind::spec, "min_score must lie in (0, 1]");
  if (!(min_recall >= 0.0 && min_recall <= 1.0)) fail(ErrorKind::spec, "min_recall must lie in [0, 1]");
  if (max_candidates < 1 || min_support < 1) fail(ErrorKind::spec, "max_candidates and min_support must be positive");
}

double rule_quality(const CohortMinerConfig& config, Index true_positives, Index coverage, Index positives) {
  if (coverage == 0 || positives == 0) return 0.0;
  const double precision = static_cast<double>(true_positives) / static_cast<double>(coverage);
  const double recall = static_cast<double>(true_positives) / static_cast<double>(positives);
  switch (config.quality) {
    case RuleQuality::f1:
      return 2.0 * static_cast<double>(true_positives) / static_cast<double>(coverage + positives);
    case RuleQuality::precision_at_min_recall:
      return recall >= config.min_recall ? precision : 0.0;
  }
  return 0.0;
}

namespace {

using Bits = std::vector<std::uint64_t>;

Index popcount_and(const Bits& a, const Bits& b) {
  Index c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += __builtin_popcountll(a[i] & b[i]);
  return c;
}

/// One attribute's distinct values (sorted) and their membership bitsets.
struct AttributeIndex {
  std::vector<std::string> values;
  std::vector<Bits> members;
};

}  // namespace

std::vector<Rule> mine_rules(const Labels& anomalous, const AttributeTable& attributes,
                             const CohortMinerConfig& config) {
  config.validate();
  attributes.validate();
  const Index d = attributes.size();
  if (static_cast<Index>(anomalous.size()) != d) {
    fail(ErrorKind::schema, "anomaly vector covers " + std::to_string(anomalous.size()) + " series, attributes " +
                                std::to_string(d));
  }
  validate_labels(anomalous, d);
  const Index positives = count_ones(anomalous);
  if (d == 0 || positives == 0) return {};

  const std::size_t words = static_cast<std::size_t>((d + 63) / 64);
  Bits target(words, 0);
  for (Index i = 0; i < d; ++i) {
    if (anomalous[static_cast<std::size_t>(i)]) target[static_cast<std::size_t>(i / 64)] |= 1ULL << (i % 64);
  }

  const auto a_count = static_cast<Index>(attributes.schema.size());
  std::vector<AttributeIndex> index(static_cast<std::size_t>(a_count));
  for (Index a = 0; a < a_count; ++a) {
    std::map<std::string, Bits> groups;
    for (Index i = 0; i < d; ++i) {
      auto& bits = groups.try_emplace(attributes.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)],
                                      Bits(words, 0)).first->second;
      bits[static_cast<std::size_t>(i / 64)] |= 1ULL << (i % 64);
    }
    for (auto& [v, bits] : groups) {
      index[static_cast<std::size_t>(a)].values.push_back(v);
      index[static_cast<std::size_t>(a)].members.push_back(std::move(bits));
    }
  }

  // Candidate count guard: sum over attribute subsets of the product of value counts.
  const Index depth = std::min(config.max_depth, a_count);
  {
    // e[k] = elementary symmetric polynomial of the value counts.
    std::vector<double> e(static_cast<std::size_t>(depth + 1), 0.0);
    e[0] = 1.0;
    for (const auto& ai : index) {
      for (Index k = depth; k >= 1; --k) e[static_cast<std::size_t>(k)] += e[static_cast<std::size_t>(k - 1)] * static_cast<double>(ai.values.size());
    }
    const double total = std::accumulate(e.begin() + 1, e.end(), 0.0);
    if (total > static_cast<double>(config.max_candidates)) {
      fail(ErrorKind::spec, "rule search would evaluate " + std::to_string(static_cast<long long>(total)) +
                                " candidates, above the limit of " + std::to_string(config.max_candidates));
    }
  }

  std::vector<Rule> rules;
  std::vector<Term> terms;
  // Depth-first over attribute positions in schema order.
  auto recurse = [&](auto&& self, Index next_attr, const Bits& cover) -> void {
    for (Index a = next_attr; a < a_count; ++a) {
      const auto& ai = index[static_cast<std::size_t>(a)];
      for (std::size_t v = 0; v < ai.values.size(); ++v) {
        Bits sub(words);
        for (std::size_t w = 0; w < words; ++w) sub[w] = cover[w] & ai.members[v][w];
        terms.push_back({attributes.schema[static_cast<std::size_t>(a)], ai.values[v]});
        Index coverage = 0;
        for (auto w : sub) coverage += __builtin_popcountll(w);
        if (coverage > 0) {
          const Index tp = popcount_and(sub, target);
          const double score = rule_quality(config, tp, coverage, positives);
          if (score >= config.min_score) rules.push_back({terms, score, coverage, tp});
          if (static_cast<Index>(terms.size()) < depth) self(self, a + 1, sub);
        }
        terms.pop_back();
      }
    }
  };
  Bits all(words, ~0ULL);
  if (d % 64 != 0) all.back() = (1ULL << (d % 64)) - 1;
  recurse(recurse, 0, all);

  std::sort(rules.begin(), rules.end(), [](const Rule& a, const Rule& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.terms.size() != b.terms.size()) return a.terms.size() < b.terms.size();
    return a.terms < b.terms;
  });
  return rules;
}

CohortTimeline mine_rules_over_time(const AnomalyMatrix& anomalies, const AttributeTable& attributes,
                                    const CohortMinerConfig& config) {
  CohortTimeline out;
  if (anomalies.size() == 0) return out;
  if (anomalies.rows() != attributes.size()) {
    fail(ErrorKind::schema, "anomaly matrix has " + std::to_string(anomalies.rows()) + " rows but " +
                                std::to_string(attributes.size()) + " attribute rows");
  }
  const Index n = anomalies.cols();
  out.per_step.resize(static_cast<std::size_t>(n));
  Labels column(static_cast<std::size_t>(anomalies.rows()));
  for (Index t = 0; t < n; ++t) {
    Index support = 0;
    for (Index i = 0; i < anomalies.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = anomalies(i, t) ? 1 : 0;
      support += column[static_cast<std::size_t>(i)];
    }
    if (support < config.min_support) continue;
    out.per_step[static_cast<std::size_t>(t)] = mine_rules(column, attributes, config);
  }
  for (Index t = 0; t < n; ++t) {
    const auto& step = out.per_step[static_cast<std::size_t>(t)];
    if (step.empty()) continue;
    if (!out.intervals.empty() && out.intervals.back().end == t && out.intervals.back().rule.same_terms(step.front())) {
      out.intervals.back().end = t + 1;
    } else {
      out.intervals.push_back({t, t + 1, step.front()});
    }
  }
  return out;
}

std::vector<std::string> equal_frequency_bins(std::span<const double> values, Index bins) {
  if (bins < 1) fail(ErrorKind::spec, "need at least one bin");
  const auto n = static_cast<Index>(values.size());
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
  });
  std::vector<std::string> out(static_cast<std::size_t>(n));
  Index rank = 0;
  while (rank < n) {
    // Ties share the bin of their first rank.
    const double v = values[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])];
    const Index bin = rank * bins / std::max<Index>(n, 1);
    while (rank < n && values[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] == v) {
      out[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] = "q" + std::to_string(bin);
      ++rank;
    }
  }
  return out;
}

}  // namespace tad

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tad/core.hpp"
#include "tad/evaluation.hpp"

namespace tad {

struct Term {
  std::string attribute;
  std::string value;

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

/// Conjunction of attribute = value terms, ordered by schema position.
struct Rule {
  std::vector<Term> terms;
  double score = 0.0;
  Index coverage = 0;
  Index true_positives = 0;

  std::string to_string() const;
  bool same_terms(const Rule& other) const { return terms == other.terms; }
};

enum class RuleQuality { f1, precision_at_min_recall };

RuleQuality parse_rule_quality(std::string_view name);

struct CohortMinerConfig {
  Index max_depth = 2;
  double min_score = 0.5;
  RuleQuality quality = RuleQuality::f1;
  /// Recall a rule needs before its precision counts (precision_at_min_recall).
  double min_recall = 0.5;
  Index max_candidates = 1'000'000;
  /// mine_rules_over_time skips steps with fewer anomalous series.
  Index min_support = 1;

  void validate() const;
};

/// Rule quality from confusion counts.
double rule_quality(const CohortMinerConfig& config, Index true_positives, Index coverage, Index positives);

/// Exhaustive search over conjunctions up to max_depth. Rules scoring at
/// least min_score, ranked by score (desc), then term count (asc), then
/// lexicographically.
std::vector<Rule> mine_rules(const Labels& anomalous, const AttributeTable& attributes,
                             const CohortMinerConfig& config);

struct RuleInterval {
  Index begin;  ///< inclusive
  Index end;    ///< exclusive
  Rule rule;
};

struct CohortTimeline {
  std::vector<std::vector<Rule>> per_step;
  /// Maximal runs of consecutive steps sharing the same top rule.
  std::vector<RuleInterval> intervals;
};

CohortTimeline mine_rules_over_time(const AnomalyMatrix& anomalies, const AttributeTable& attributes,
                                    const CohortMinerConfig& config);

/// Equal-frequency binning of a numeric attribute into `bins` labels "q0".."q{bins-1}".
std::vector<std::string> equal_frequency_bins(std::span<const double> values, Index bins);

}  // namespace tad

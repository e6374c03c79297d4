#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tad/datagen.hpp"
#include "tad/periodicity.hpp"

namespace tad {

enum class PeriodMethod { random, fft, autoperiod, acf, peaks };

std::string_view to_string(PeriodMethod method);
PeriodMethod parse_period_method(std::string_view name);
std::vector<PeriodMethod> all_period_methods();

struct BenchmarkOptions {
  /// Permutations averaged for the random baseline.
  Index random_permutations = 100;
  unsigned threads = 1;
};

struct BenchmarkRow {
  PeriodMethod method;
  /// Fraction of series whose estimate equals the true period exactly.
  double accuracy = 0.0;
  /// Fraction within +/- 1 of the true period.
  double accuracy_within_one = 0.0;
  /// Mean seconds per series; zero for the random baseline.
  double mean_runtime = 0.0;
  Index detected = 0;
};

struct SeriesOutcome {
  Index length = 0;
  Index true_period = 0;
  std::vector<std::optional<Index>> estimates;  ///< one per method, in method order
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<SeriesOutcome> series;
  Index n_series = 0;
  std::uint64_t seed = 0;
};

/// Runs every method over n_series generator draws (stream i for series i).
/// Results do not depend on options.threads.
BenchmarkResult run_period_benchmark(Index n_series, const PeriodicGeneratorConfig& config,
                                     const std::vector<PeriodMethod>& methods,
                                     const BenchmarkOptions& options = {});

}  // namespace tad

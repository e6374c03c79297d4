#include "tad/benchmark.hpp"

#include <algorithm>
#include <cstdlib>

#include "parallel.hpp"
#include "tad/rng.hpp"

namespace tad {

std::string_view to_string(PeriodMethod method) {
  switch (method) {
    case PeriodMethod::random: return "random";
    case PeriodMethod::fft: return "fft";
    case PeriodMethod::autoperiod: return "autoperiod";
    case PeriodMethod::acf: return "acf";
    case PeriodMethod::peaks: return "peaks";
  }
  return "unknown";
}

PeriodMethod parse_period_method(std::string_view name) {
  for (auto m : all_period_methods()) {
    if (name == to_string(m)) return m;
  }
  fail(ErrorKind::spec, "unknown period method '" + std::string(name) + "'");
}

std::vector<PeriodMethod> all_period_methods() {
  return {PeriodMethod::random, PeriodMethod::fft, PeriodMethod::autoperiod, PeriodMethod::acf,
          PeriodMethod::peaks};
}

namespace {

constexpr std::uint64_t kRandomBaselineStream = 0xbadc0ffee;

PeriodEstimate estimate(PeriodMethod method, std::span<const double> x, std::uint64_t seed) {
  switch (method) {
    case PeriodMethod::fft: return detect_period_fft(x);
    case PeriodMethod::autoperiod: {
      AutoperiodOptions opt;
      opt.seed = seed;
      return detect_period_autoperiod(x, opt);
    }
    case PeriodMethod::acf: return detect_period_acf(x);
    case PeriodMethod::peaks: return detect_period_peaks(x);
    case PeriodMethod::random: break;
  }
  return {};
}

}  // namespace

BenchmarkResult run_period_benchmark(Index n_series, const PeriodicGeneratorConfig& config,
                                     const std::vector<PeriodMethod>& methods,
                                     const BenchmarkOptions& options) {
  if (n_series < 1) fail(ErrorKind::spec, "benchmark needs at least one series");
  config.validate();

  BenchmarkResult result;
  result.n_series = n_series;
  result.seed = config.seed;
  result.series.resize(static_cast<std::size_t>(n_series));
  std::vector<std::vector<double>> runtimes(methods.size(), std::vector<double>(static_cast<std::size_t>(n_series)));

  auto work = [&](Index i) {
    const auto draw = generate_periodic(config, static_cast<std::uint64_t>(i));
    const Vector& v = draw.series.values();
    const std::span<const double> x(v.data(), static_cast<std::size_t>(v.size()));
    auto& out = result.series[static_cast<std::size_t>(i)];
    out.length = v.size();
    out.true_period = *draw.true_period;
    out.estimates.resize(methods.size());
    const std::uint64_t seed = splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (methods[m] == PeriodMethod::random) continue;
      const auto est = estimate(methods[m], x, seed);
      out.estimates[m] = est.period;
      runtimes[m][static_cast<std::size_t>(i)] = est.elapsed;
    }
  };

  detail::parallel_for(n_series, options.threads, work);

  std::vector<Index> truth;
  for (const auto& s : result.series) truth.push_back(s.true_period);

  for (std::size_t m = 0; m < methods.size(); ++m) {
    BenchmarkRow row{methods[m]};
    if (methods[m] == PeriodMethod::random) {
      // Shuffle the true periods across series and score against the truth.
      Rng rng(config.seed, kRandomBaselineStream);
      double exact = 0.0, near = 0.0;
      const Index perms = std::max<Index>(1, options.random_permutations);
      for (Index p = 0; p < perms; ++p) {
        auto guess = truth;
        std::shuffle(guess.begin(), guess.end(), rng.engine());
        for (std::size_t i = 0; i < truth.size(); ++i) {
          exact += guess[i] == truth[i];
          near += std::abs(guess[i] - truth[i]) <= 1;
        }
      }
      const double denom = static_cast<double>(perms * n_series);
      row.accuracy = exact / denom;
      row.accuracy_within_one = near / denom;
      row.detected = n_series;
    } else {
      double exact = 0.0, near = 0.0, time = 0.0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& est = result.series[i].estimates[m];
        time += runtimes[m][i];
        if (!est) continue;
        ++row.detected;
        exact += *est == truth[i];
        near += std::abs(*est - truth[i]) <= 1;
      }
      row.accuracy = exact / static_cast<double>(n_series);
      row.accuracy_within_one = near / static_cast<double>(n_series);
      row.mean_runtime = time / static_cast<double>(n_series);
    }
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace tad

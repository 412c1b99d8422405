#pragma once

// Upper confidence bounds from ordered resampling realizations and their
// actual coverage for functionals that depend only on the ranks of the
// inputs.
//
// A protocol is the sequence of sample labels read along the pooled order
// statistics. Under i.i.d. continuous samples every protocol has probability
// prod n_i! / N!. Given the protocol, a single-draw realization is Bernoulli
// with p = (#index tuples satisfying the order event) / prod n_i, so the
// coverage conditional on the protocol is binomial.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resamplex/parallel.hpp"
#include "resamplex/rational.hpp"
#include "resamplex/sample.hpp"

namespace resamplex {

enum class RankFunctional {
  min_selection,  // X_m below every other X_i
  ordering,       // X_1 < X_2 < ... < X_m
};

RankFunctional parse_functional(std::string_view name);
const char* to_string(RankFunctional f) noexcept;

struct Protocol {
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> labels;  // zero-based sample index per pooled order statistic
};

/// Labels of the pooled ordered values. TiedValues on equal values.
Protocol protocol_of_samples(const Pools& samples);

/// Two-sample form: c_i = #{second-sample values in (X1_(i), X1_(i+1)]},
/// i = 0..n1 with -inf and +inf sentinels.
std::vector<std::size_t> two_sample_counts(const Protocol& protocol);

BigInt protocol_count(std::span<const std::size_t> sizes);
Rational protocol_probability(std::span<const std::size_t> sizes);

/// Every label sequence in lexicographic order; CapExceeded above `cap`.
std::vector<Protocol> enumerate_protocols(std::span<const std::size_t> sizes, std::size_t cap = 10'000'000);

/// Number of index tuples (one element per sample) satisfying the order event.
std::uint64_t success_count(const Protocol& protocol, RankFunctional f);
Rational success_fraction(const Protocol& protocol, RankFunctional f);

/// theta under exchangeable inputs: 1/m or 1/m!.
Rational theta_value(RankFunctional f, std::size_t m);

/// k = floor((1 - gamma) r), guarded against representation error.
std::size_t coverage_rank(double gamma, std::size_t r);

/// k-th smallest realization, or -inf when k = 0.
double upper_bound(std::vector<double> realizations, double gamma);

/// P{k-th order statistic of r realizations <= theta} when each realization
/// is the mean of `batch` Bernoulli(p) draws.
double conditional_coverage(const Rational& p, const Rational& theta, std::size_t r, std::size_t k,
                            std::size_t batch = 1);

/// How many protocols have each success count.
struct SuccessDistribution {
  std::vector<std::size_t> sizes;
  RankFunctional functional = RankFunctional::min_selection;
  std::uint64_t tuples = 0;                        // prod n_i
  std::map<std::uint64_t, std::uint64_t> protocols;  // success count -> protocol count
  std::uint64_t total = 0;                         // all protocols
};

/// Built by a scan over label sequences that merges protocols with equal
/// state; CapExceeded when a layer holds more than `state_cap` states.
SuccessDistribution success_distribution(std::span<const std::size_t> sizes, RankFunctional f,
                                         std::size_t state_cap = 10'000'000);

/// The same by listing every protocol.
SuccessDistribution success_distribution_by_listing(std::span<const std::size_t> sizes, RankFunctional f,
                                                    std::size_t cap = 10'000'000);

struct CoverageConfig {
  std::vector<std::size_t> sizes;
  double gamma = 0.9;
  std::size_t r = 10;
  RankFunctional functional = RankFunctional::min_selection;
  std::size_t batch = 1;  // draws averaged per realization
};

void check_coverage_config(const CoverageConfig& config);

struct CoverageOptions {
  std::size_t state_cap = 10'000'000;
  std::size_t mc_runs = 100'000;
  std::uint64_t seed = 1;
  Execution exec = Execution::parallel;
};

struct CoverageResult {
  double coverage = 0.0;
  std::optional<double> standard_error;
  std::string method;  // "exact", "protocol-mc" or "simulation-mc"
  std::size_t k = 0;
  double theta = 0.0;
  std::size_t runs = 0;
};

double coverage_from_distribution(const SuccessDistribution& dist, const CoverageConfig& config);

/// Exact R; seeded protocol sampling when the exact scan hits its cap.
CoverageResult actual_coverage(const CoverageConfig& config, const CoverageOptions& options = {});

/// Monte Carlo over uniformly random protocols.
CoverageResult coverage_protocol_mc(const CoverageConfig& config, std::size_t runs, std::uint64_t seed,
                                    Execution exec = Execution::parallel);

/// Direct simulation: uniform samples, r resampled realizations, bound, check.
CoverageResult coverage_simulation_mc(const CoverageConfig& config, std::size_t runs, std::uint64_t seed,
                                      Execution exec = Execution::parallel);

// Reference coverage tables ------------------------------------------------

struct CoverageReferenceRow {
  std::vector<std::size_t> sizes;
  std::vector<double> coverage;  // one per reference_gammas()
};

const std::vector<double>& reference_gammas();
const std::vector<CoverageReferenceRow>& reference_table(RankFunctional f);

struct ScanRow {
  std::vector<std::size_t> sizes;
  std::size_t best_r = 0;
  double max_deviation = 0.0;
  std::vector<double> computed;   // at best_r
  std::vector<double> reference;
};

/// For each reference row, the r in [r_min, r_max] whose exact coverage is
/// closest (max abs deviation across gammas) to the reference row.
std::vector<ScanRow> scan_reference(RankFunctional f, std::size_t r_min = 5, std::size_t r_max = 200,
                                    std::size_t batch = 1);

}  // namespace resamplex

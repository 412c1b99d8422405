#pragma once

// Variance of the resampling estimators, averaged over both the randomness
// of the observed samples and the resampling draws.
//
// Two draws X(l), X(l') from the same pools coincide on the subset omega of
// inputs where they picked the same element; elsewhere they hold distinct
// elements of an i.i.d. sample and are independent. Hence
//   mu11 = sum_omega P{omega} mu11(omega),
//   P{omega} = prod_{i in omega} 1/n_i * prod_{i not in omega} (1 - 1/n_i),
//   D theta* = (mu2 + (r - 1) mu11) / r - mu^2.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/parallel.hpp"
#include "resamplex/rational.hpp"
#include "resamplex/sample.hpp"
#include "resamplex/tree.hpp"

namespace resamplex {

/// Subset of input indices (bit i set = input i coincides).
struct OmegaPair {
  std::uint32_t mask = 0;

  bool contains(std::size_t i) const { return (mask >> i) & 1u; }
  static OmegaPair full(std::size_t m) { return {m >= 32 ? ~0u : ((1u << m) - 1u)}; }
};

Rational omega_probability_exact(OmegaPair omega, std::span<const std::size_t> sizes);
double omega_probability(OmegaPair omega, std::span<const std::size_t> sizes);

struct VarianceOptions {
  std::size_t cap = 10'000'000;   // exact-mode enumeration terms
  std::size_t mc_runs = 200'000;  // Monte Carlo fallback replicates
  std::uint64_t seed = 1;
  Execution exec = Execution::parallel;
};

/// mu, mu2, mu11 and mu11(omega) for every omega (indexed by mask).
struct ExactMoments {
  Rational mean;
  Rational second;
  Rational mixed;
  std::vector<Rational> mixed_by_subset;
};

ExactMoments exact_moments(const CalcTree& tree, const std::vector<Distribution>& laws,
                           std::span<const std::size_t> sizes, std::size_t cap = 10'000'000,
                           Execution exec = Execution::parallel);

/// E[phi(X) phi(X')] with X, X' equal on omega and independent elsewhere.
/// Exact; finite laws only.
Rational conditional_mixed_moment_exact(const CalcTree& tree, const std::vector<Distribution>& laws,
                                        OmegaPair omega, std::size_t cap = 10'000'000,
                                        Execution exec = Execution::parallel);
double conditional_mixed_moment(const CalcTree& tree, const std::vector<Distribution>& laws, OmegaPair omega,
                                std::size_t cap = 10'000'000);

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t runs = 0;
};

McEstimate conditional_mixed_moment_mc(const CalcTree& tree, const std::vector<Distribution>& laws,
                                       OmegaPair omega, std::size_t runs, std::uint64_t seed,
                                       Execution exec = Execution::parallel);

template <class T>
T variance_from_moments(const T& mean, const T& second, const T& mixed, std::size_t r) {
  const T rr(static_cast<long long>(r));
  return (second + (rr - T(1)) * mixed) / rr - mean * mean;
}

struct VarianceResult {
  double variance = 0.0;
  std::optional<double> standard_error;  // set for Monte Carlo results
  std::string method;                    // "exact", "quadrature" or "monte-carlo"
  std::optional<double> mean;
  std::optional<double> second_moment;
  std::optional<double> mixed_moment;
};

Rational resampling_variance_exact(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r,
                                   std::size_t cap = 10'000'000, Execution exec = Execution::parallel);

/// Variance of the simple resampling estimator with pool sizes `sizes` and r
/// realizations. Exact for finite laws within the cap, numeric quadrature
/// for a single continuous input, seeded Monte Carlo otherwise.
VarianceResult resampling_variance(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r,
                                   const VarianceOptions& options = {});

struct SingleSampleVariance {
  double resampling = 0.0;
  double classical = 0.0;
};

/// One input: D theta* = sigma^2/r + (r-1) sigma^2 / (r n) against the
/// classical sigma^2 / n.
SingleSampleVariance single_sample_variance(double sigma2, std::size_t n, std::size_t r);

/// Variance of the hierarchical estimator. Node sizes come from the tree
/// (leaf size = pool size). Exact via level-wise marginal and pair laws for
/// finite leaf laws; Monte Carlo fallback when the cap is exceeded.
Rational hierarchical_variance_exact(const CalcTree& tree, const std::vector<Distribution>& laws,
                                     std::size_t cap = 10'000'000);
VarianceResult hierarchical_variance(const CalcTree& tree, const std::vector<Distribution>& laws,
                                     const VarianceOptions& options = {});

/// Variance given the observed pools (resampling randomness only).
double conditional_variance(const Pools& pools, const CalcTree& tree, std::size_t r);

/// Exact variance of simple_estimate by enumerating every sample realization
/// and every index draw of the actual estimator.
double brute_force_variance_oracle(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r,
                                   std::size_t cap = 100'000'000, Execution exec = Execution::parallel);

/// Same for hierarchical_estimate; sizes from the tree.
double brute_force_hierarchical_oracle(const CalcTree& tree, const std::vector<Distribution>& laws,
                                       std::size_t cap = 100'000'000, Execution exec = Execution::parallel);

}  // namespace resamplex

#pragma once

// Estimators for a phi(X, Z) whose Z inputs have known laws and whose X
// inputs are only observed through samples.
//
// Known subfunction: E[phi | X = x] is available, so each realization draws x
// from the pools and adds the conditional expectation.
// Simulated subfunction: each realization draws x once and evaluates phi at N
// fresh Z vectors.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/estimator.hpp"
#include "resamplex/random.hpp"
#include "resamplex/sample.hpp"
#include "resamplex/tree.hpp"

namespace resamplex {

struct PartialModel {
  CalcTree tree;                    // x leaves sampled, z leaves known
  std::vector<Distribution> known;  // law per z input
  Pools pools;                      // pool per x input
};

void check_model(const PartialModel& model);

/// Input positions of gt[t](min(max(xa, zp), xb, zq, sum(xc, zs))).
struct QueryForm {
  std::size_t x_max = 0, x_direct = 0, x_sum = 0;
  std::size_t z_max = 0, z_direct = 0, z_sum = 0;
  double t = 0.0;
};

std::optional<QueryForm> match_query_form(const CalcTree& tree);

/// P{min(max(x_a, Z_p), x_b, Z_q, x_c + Z_s) > t} with Z_s >= 0:
///   0                                      if x_b <= t
///   [x_a <= t] Fbar_p(t) * Fbar_q(t) * [x_c <= t] Fbar_s(t - x_c)   otherwise,
/// a bracketed factor being 1 when its condition fails.
double query_conditional_expectation(const QueryForm& form, const std::vector<Distribution>& known,
                                     std::span<const double> x);

enum class ConditionalMethod {
  identity,     // no known inputs: phi itself
  closed_form,  // the query catalog entry
  enumeration,  // finite known laws: sum over their joint support
};

/// How E[phi | X = x] is computed for this model; Unsupported when none
/// applies (use the simulated estimator instead).
ConditionalMethod conditional_method(const PartialModel& model);

/// E[phi(X, Z) | X = x]. Copy one per worker.
class ConditionalEvaluator {
public:
  explicit ConditionalEvaluator(const PartialModel& model, std::size_t enumeration_cap = 1'000'000);
  double operator()(std::span<const double> x);
  ConditionalMethod method() const { return method_; }

private:
  const PartialModel* model_;
  ConditionalMethod method_;
  std::optional<QueryForm> form_;
  std::vector<std::vector<std::pair<double, double>>> support_;
  std::vector<double> z_, scratch_;
  std::vector<std::size_t> digit_;
};

double conditional_expectation(const PartialModel& model, std::span<const double> x);

EstimateReport estimate_known_subfunction(const PartialModel& model, std::size_t r, std::uint64_t seed,
                                          Execution exec = Execution::parallel);

template <RandomSource Source>
double estimate_known_subfunction_with(const PartialModel& model, std::size_t r, Source& src) {
  check_model(model);
  ConditionalEvaluator ce(model);
  RunningMoments acc;
  kernel::simple_realizations(model.pools, ce, r, src, acc);
  return acc.sum.value() / static_cast<double>(r);
}

namespace kernel {

/// One realization of the simulated estimator: x drawn once, phi averaged
/// over N independent Z vectors.
template <RandomSource Source>
double simulated_realization(const PartialModel& model, std::size_t replicates, Source& src, std::vector<double>& x,
                             std::vector<double>& z, std::vector<double>& scratch) {
  for (std::size_t i = 0; i < model.pools.size(); ++i) x[i] = model.pools[i][src.uniform_index(model.pools[i].size())];
  CompensatedSum s;
  for (std::size_t xi = 0; xi < replicates; ++xi) {
    for (std::size_t j = 0; j < model.known.size(); ++j) z[j] = src.draw(model.known[j]);
    s.add(model.tree.eval<double>(std::span<const double>(x), std::span<const double>(z), std::span<double>(scratch)));
  }
  return s.value() / static_cast<double>(replicates);
}

}  // namespace kernel

EstimateReport estimate_simulated_subfunction(const PartialModel& model, std::size_t r, std::size_t replicates,
                                              std::uint64_t seed, Execution exec = Execution::parallel);

template <RandomSource Source>
double estimate_simulated_subfunction_with(const PartialModel& model, std::size_t r, std::size_t replicates,
                                           Source& src) {
  check_model(model);
  if (r == 0 || replicates == 0) fail(ErrorKind::invalid_argument, "r and N must be at least 1");
  std::vector<double> x(model.pools.size()), z(model.known.size()), scratch(model.tree.size());
  CompensatedSum s;
  for (std::size_t l = 0; l < r; ++l) s.add(kernel::simulated_realization(model, replicates, src, x, z, scratch));
  return s.value() / static_cast<double>(r);
}

}  // namespace resamplex

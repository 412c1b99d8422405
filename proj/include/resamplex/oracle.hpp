#pragma once

// Exact moments of a randomized estimator by enumeration: every realization
// of the observed samples (finite laws) and, within each, every outcome path
// of the estimator's own draws.

#include <cmath>
#include <utility>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/parallel.hpp"
#include "resamplex/random.hpp"
#include "resamplex/sample.hpp"

namespace resamplex {

struct OracleMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// `estimator(pools, ExhaustiveSource&)` must be deterministic given the
/// source. `inner_paths` bounds its path count per realization.
template <class Estimator>
OracleMoments exhaustive_moments(const std::vector<Distribution>& laws, const std::vector<std::size_t>& sizes,
                                 long double inner_paths, std::size_t cap, Execution exec, Estimator&& estimator) {
  long double outer = 1;
  for (std::size_t i = 0; i < laws.size(); ++i)
    outer *= std::pow(static_cast<long double>(laws[i].support().size()), static_cast<long double>(sizes[i]));
  if (outer * inner_paths > static_cast<long double>(cap))
    fail(ErrorKind::cap_exceeded, "exhaustive oracle exceeds its enumeration cap");

  std::vector<std::pair<double, Pools>> realizations;
  ExhaustiveSource src;
  do {
    src.begin();
    Pools pools;
    for (std::size_t i = 0; i < laws.size(); ++i) pools.push_back(draw_sample(laws[i], sizes[i], src));
    realizations.emplace_back(src.weight(), std::move(pools));
  } while (src.next());

  std::vector<PathMoments> moments(realizations.size());
  for_each_chunk(realizations.size(), exec, [&](std::size_t c) {
    const Pools& pools = realizations[c].second;
    moments[c] = enumerate_paths([&](ExhaustiveSource& s) { return estimator(pools, s); });
  });

  CompensatedSum mean;
  for (std::size_t c = 0; c < realizations.size(); ++c) mean.add(realizations[c].first * moments[c].mean);
  OracleMoments out;
  out.mean = mean.value();
  CompensatedSum var;
  for (std::size_t c = 0; c < realizations.size(); ++c) {
    const double w = realizations[c].first;
    const double dev = moments[c].mean - out.mean;
    var.add(w * moments[c].variance);
    var.add(w * dev * dev);
  }
  out.variance = var.value();
  return out;
}

}  // namespace resamplex

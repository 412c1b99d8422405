#pragma once

#include <map>
#include <random>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/random.hpp"
#include "resamplex/sample.hpp"

namespace testing {

using resamplex::Distribution;

inline Distribution two_point(double a, double b) { return Distribution::equiprobable({a, b}); }

inline resamplex::Pools pools_of(std::initializer_list<std::vector<double>> values) {
  resamplex::Pools out;
  for (const auto& v : values) out.emplace_back(v);
  return out;
}

// Full outcome law of fn(source): value -> probability.
template <class Fn>
std::map<double, double> outcome_law(Fn&& fn) {
  std::map<double, double> law;
  resamplex::ExhaustiveSource src;
  do {
    src.begin();
    const double v = fn(src);
    law[v] += src.weight();
  } while (src.next());
  return law;
}

inline bool same_law(const std::map<double, double>& a, const std::map<double, double>& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (std::abs(ia->first - ib->first) > tol || std::abs(ia->second - ib->second) > tol) return false;
  }
  return true;
}

}  // namespace testing

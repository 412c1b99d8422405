#pragma once

#include <cmath>
#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

namespace resamplex {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

// Exact conversion: every finite double is a dyadic rational.
inline Rational to_rational(double x) { return Rational(x); }

inline Rational ratio(std::int64_t num, std::int64_t den) {
  return Rational(num) / Rational(den);
}

}  // namespace resamplex

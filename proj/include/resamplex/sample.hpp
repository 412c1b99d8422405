#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/random.hpp"

namespace resamplex {

/// An observed i.i.d. sample of one input variable.
class SamplePool {
public:
  explicit SamplePool(std::vector<double> values, std::optional<Distribution> source = std::nullopt);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const { return values_; }
  const std::optional<Distribution>& source() const { return source_; }

  double mean() const;
  /// Empirical law of the pool (right-continuous step CDF).
  Distribution empirical() const { return Distribution::empirical(values_); }

private:
  std::vector<double> values_;
  std::optional<Distribution> source_;
};

using Pools = std::vector<SamplePool>;

template <RandomSource Source>
SamplePool draw_sample(const Distribution& law, std::size_t n, Source& source) {
  if (n == 0) fail(ErrorKind::invalid_argument, "sample size must be at least 1");
  std::vector<double> values(n);
  for (auto& v : values) v = source.draw(law);
  return SamplePool(std::move(values), law);
}

/// n i.i.d. draws from `law` on stream `stream` of `seed`.
SamplePool draw_sample(const Distribution& law, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0);

/// One pool per law, pool i on stream i.
Pools draw_pools(const std::vector<Distribution>& laws, const std::vector<std::size_t>& sizes, std::uint64_t seed);

}  // namespace resamplex

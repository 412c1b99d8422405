#include "resamplex/sample.hpp"

#include <cmath>
#include <numeric>

namespace resamplex {

SamplePool::SamplePool(std::vector<double> values, std::optional<Distribution> source)
    : values_(std::move(values)), source_(std::move(source)) {
  if (values_.empty()) fail(ErrorKind::invalid_argument, "sample pool must be non-empty");
  for (double v : values_)
    if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "sample values must be finite");
}

double SamplePool::mean() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

SamplePool draw_sample(const Distribution& law, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  RngSource source(seed, stream);
  return draw_sample(law, n, source);
}

Pools draw_pools(const std::vector<Distribution>& laws, const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  if (laws.size() != sizes.size()) fail(ErrorKind::arity_mismatch, "one sample size per law expected");
  Pools pools;
  pools.reserve(laws.size());
  for (std::size_t i = 0; i < laws.size(); ++i) pools.push_back(draw_sample(laws[i], sizes[i], seed, i));
  return pools;
}

}  // namespace resamplex

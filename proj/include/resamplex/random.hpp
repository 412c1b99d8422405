#pragma once

// Sources of randomness for the estimators. Every kernel is written against
// two calls, `uniform_index(n)` and `draw(law)`, so the same code runs either
// on a seeded stream (RngSource) or under exhaustive enumeration of every
// possible outcome (ExhaustiveSource), which is how exact expectations and
// variances of the estimators are verified.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/error.hpp"
#include "resamplex/parallel.hpp"

namespace resamplex {

template <class S>
concept RandomSource = requires(S& s, std::size_t n, const Distribution& d) {
  { s.uniform_index(n) } -> std::convertible_to<std::size_t>;
  { s.draw(d) } -> std::convertible_to<double>;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of stream `stream` under master seed `master`. Stream index is the
/// task ordinal (chunk number, node id, ...), never a thread id.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

class RngSource {
public:
  RngSource(std::uint64_t master, std::uint64_t stream) : engine_(stream_seed(master, stream)) {}

  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  double draw(const Distribution& law) { return law.sample(engine_); }
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// Walks every outcome path of a randomized procedure. Each path is a
/// sequence of choices; `next()` advances to the following path in
/// lexicographic order. `weight()` is the probability of the current path.
class ExhaustiveSource {
public:
  std::size_t uniform_index(std::size_t n) {
    const std::size_t pick = choose(n);
    weight_ /= static_cast<double>(n);
    return pick;
  }

  double draw(const Distribution& law) {
    const auto support = law.support();
    const std::size_t pick = choose(support.size());
    weight_ *= support[pick].second;
    return support[pick].first;
  }

  void begin() {
    depth_ = 0;
    weight_ = 1.0;
  }

  bool next() {
    path_.resize(depth_);
    while (!path_.empty() && path_.back().pick + 1 == path_.back().options) path_.pop_back();
    if (path_.empty()) return false;
    ++path_.back().pick;
    return true;
  }

  double weight() const { return weight_; }

private:
  struct Choice {
    std::size_t pick;
    std::size_t options;
  };

  std::size_t choose(std::size_t options) {
    if (options == 0) fail(ErrorKind::invalid_argument, "choice among zero options");
    if (depth_ < path_.size()) {
      if (path_[depth_].options != options)
        fail(ErrorKind::invalid_argument, "exhaustive replay diverged");
      return path_[depth_++].pick;
    }
    path_.push_back({0, options});
    ++depth_;
    return 0;
  }

  std::vector<Choice> path_;
  std::size_t depth_ = 0;
  double weight_ = 1.0;
};

struct PathMoments {
  double mean = 0.0;
  double variance = 0.0;
  double total_weight = 0.0;
  std::size_t paths = 0;
};

/// Exact mean and variance of `fn(source)` over every outcome path.
/// Two passes: the first fixes the mean, the second accumulates squared
/// deviations, both with compensated sums.
template <class Fn>
PathMoments enumerate_paths(Fn&& fn, std::size_t cap = 100'000'000) {
  PathMoments out;
  ExhaustiveSource src;
  CompensatedSum sum, weight;
  std::vector<std::pair<double, double>> outcomes;
  do {
    src.begin();
    const double v = fn(src);
    if (++out.paths > cap) fail(ErrorKind::cap_exceeded, "exhaustive enumeration exceeded its path cap");
    sum.add(src.weight() * v);
    weight.add(src.weight());
    outcomes.emplace_back(src.weight(), v);
  } while (src.next());
  out.mean = sum.value();
  out.total_weight = weight.value();
  CompensatedSum dev;
  for (const auto& [w, v] : outcomes) dev.add(w * (v - out.mean) * (v - out.mean));
  out.variance = dev.value();
  return out;
}

}  // namespace resamplex

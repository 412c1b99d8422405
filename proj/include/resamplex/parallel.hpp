#pragma once

// Chunked kernels. Work is split into a fixed number of chunks that does not
// depend on the thread count; each chunk owns its RNG stream and its partial
// result, and partials are reduced in chunk order. The serial path walks the
// same chunks in order, so both paths produce bit-identical results.

#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace resamplex {

enum class Execution { serial, parallel };

// Realizations per chunk for Monte Carlo style loops.
inline constexpr std::size_t kChunk = 4096;

inline std::size_t chunk_count(std::size_t items, std::size_t chunk = kChunk) {
  return (items + chunk - 1) / chunk;
}

// Thread cap from RESAMPLEX_THREADS (0 or unset means the OpenMP default).
int thread_cap();

template <class Fn>
void for_each_chunk(std::size_t chunks, Execution exec, Fn&& fn) {
  if (exec == Execution::serial || chunks < 2) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
#ifdef _OPENMP
  std::exception_ptr first_error;
  std::mutex guard;
  const long long n = static_cast<long long>(chunks);
  const int cap = thread_cap();
  const int threads = cap > 0 ? cap : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long long c = 0; c < n; ++c) {
    try {
      fn(static_cast<std::size_t>(c));
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  for (std::size_t c = 0; c < chunks; ++c) fn(c);
#endif
}

// Neumaier compensated summation.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace resamplex

#include "resamplex/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>

#include "resamplex/random.hpp"

namespace resamplex {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) fail(ErrorKind::invalid_argument, "rank functionals need at least two samples");
  for (auto n : sizes)
    if (n == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
}

std::uint64_t tuple_count(std::span<const std::size_t> sizes) {
  std::uint64_t t = 1;
  for (auto n : sizes) {
    if (t > std::numeric_limits<std::uint64_t>::max() / n) fail(ErrorKind::cap_exceeded, "too many index tuples");
    t *= n;
  }
  return t;
}

std::uint64_t protocol_total(std::span<const std::size_t> sizes) {
  const BigInt total = protocol_count(sizes);
  if (total > BigInt(std::numeric_limits<std::uint64_t>::max()))
    fail(ErrorKind::cap_exceeded, "protocol count does not fit in 64 bits");
  return static_cast<std::uint64_t>(total);
}

// Scan state after reading a label: min-selection keeps the running success
// count; ordering keeps, per label i, the number of increasing chains
// 0 < 1 < ... < i ending at or before the current position.
struct Scanner {
  std::span<const std::size_t> sizes;
  RankFunctional f;

  std::size_t stats() const { return f == RankFunctional::min_selection ? 1 : sizes.size(); }

  // state = seen[0..m) followed by stats()
  void step(std::vector<std::uint64_t>& state, std::size_t label) const {
    const std::size_t m = sizes.size();
    if (f == RankFunctional::min_selection) {
      if (label == m - 1) {
        std::uint64_t ways = 1;
        for (std::size_t j = 0; j + 1 < m; ++j) ways *= sizes[j] - state[j];
        state[m] += ways;
      }
    } else {
      state[m + label] += label == 0 ? 1 : state[m + label - 1];
    }
    ++state[label];
  }

  std::uint64_t result(const std::vector<std::uint64_t>& state) const { return state.back(); }
};

std::uint64_t count_of_labels(std::span<const std::size_t> sizes, std::span<const std::size_t> labels,
                              RankFunctional f) {
  Scanner sc{sizes, f};
  std::vector<std::uint64_t> state(sizes.size() + sc.stats(), 0);
  for (auto l : labels) sc.step(state, l);
  return sc.result(state);
}

template <class Fn>
void for_each_label_sequence(std::span<const std::size_t> sizes, std::size_t cap, Fn&& fn) {
  if (protocol_count(sizes) > BigInt(cap))
    fail(ErrorKind::cap_exceeded, "protocol count " + protocol_count(sizes).str() + " exceeds the listing cap " +
                                      std::to_string(cap) + "; use Monte Carlo protocol sampling");
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < sizes.size(); ++i) labels.insert(labels.end(), sizes[i], i);
  do fn(labels);
  while (std::next_permutation(labels.begin(), labels.end()));
}

template <class Reduce>
CoverageResult run_mc(std::size_t runs, std::uint64_t seed, Execution exec, Reduce&& one_run) {
  if (runs < 2) fail(ErrorKind::invalid_argument, "Monte Carlo needs at least 2 runs");
  const std::size_t chunks = chunk_count(runs);
  std::vector<CompensatedSum> sum(chunks), sum_sq(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    RngSource src(seed, c);
    auto run = one_run;
    const std::size_t count = std::min(kChunk, runs - c * kChunk);
    for (std::size_t k = 0; k < count; ++k) {
      const double v = run(src);
      sum[c].add(v);
      sum_sq[c].add(v * v);
    }
  });
  CompensatedSum s, s2;
  for (std::size_t c = 0; c < chunks; ++c) {
    s.add(sum[c].value());
    s2.add(sum_sq[c].value());
  }
  const double n = static_cast<double>(runs);
  CoverageResult out;
  out.coverage = s.value() / n;
  const double var = std::max(0.0, (s2.value() - n * out.coverage * out.coverage) / (n - 1.0));
  out.standard_error = std::sqrt(var / n);
  out.runs = runs;
  return out;
}

}  // namespace

RankFunctional parse_functional(std::string_view name) {
  if (name == "min-selection") return RankFunctional::min_selection;
  if (name == "ordering") return RankFunctional::ordering;
  fail(ErrorKind::parse, "unknown functional '" + std::string(name) + "' (expected min-selection or ordering)");
}

const char* to_string(RankFunctional f) noexcept {
  return f == RankFunctional::min_selection ? "min-selection" : "ordering";
}

Protocol protocol_of_samples(const Pools& samples) {
  std::vector<std::pair<double, std::size_t>> pooled;
  Protocol p;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    p.sizes.push_back(samples[i].size());
    for (double v : samples[i].values()) pooled.emplace_back(v, i);
  }
  std::sort(pooled.begin(), pooled.end());
  for (std::size_t j = 0; j < pooled.size(); ++j) {
    if (j > 0 && pooled[j].first == pooled[j - 1].first)
      fail(ErrorKind::tied_values, "pooled samples contain the tied value " + std::to_string(pooled[j].first));
    p.labels.push_back(pooled[j].second);
  }
  return p;
}

std::vector<std::size_t> two_sample_counts(const Protocol& protocol) {
  if (protocol.sizes.size() != 2) fail(ErrorKind::invalid_argument, "count form needs exactly two samples");
  std::vector<std::size_t> c(protocol.sizes[0] + 1, 0);
  std::size_t cell = 0;
  for (auto l : protocol.labels) {
    if (l == 0)
      ++cell;
    else
      ++c[cell];
  }
  return c;
}

BigInt protocol_count(std::span<const std::size_t> sizes) {
  BigInt result = 1;
  std::size_t placed = 0;
  for (auto n : sizes) {
    // multiply by C(placed + n, n)
    for (std::size_t j = 1; j <= n; ++j) {
      result *= placed + j;
      result /= j;
    }
    placed += n;
  }
  return result;
}

Rational protocol_probability(std::span<const std::size_t> sizes) { return Rational(1) / Rational(protocol_count(sizes)); }

std::vector<Protocol> enumerate_protocols(std::span<const std::size_t> sizes, std::size_t cap) {
  check_sizes(sizes);
  std::vector<Protocol> out;
  const std::vector<std::size_t> sz(sizes.begin(), sizes.end());
  for_each_label_sequence(sizes, cap, [&](const std::vector<std::size_t>& labels) { out.push_back({sz, labels}); });
  return out;
}

std::uint64_t success_count(const Protocol& protocol, RankFunctional f) {
  check_sizes(protocol.sizes);
  std::vector<std::size_t> seen(protocol.sizes.size(), 0);
  for (auto l : protocol.labels) {
    if (l >= seen.size()) fail(ErrorKind::invalid_argument, "protocol label out of range");
    ++seen[l];
  }
  if (seen != protocol.sizes) fail(ErrorKind::invalid_argument, "protocol label counts do not match the sizes");
  tuple_count(protocol.sizes);
  return count_of_labels(protocol.sizes, protocol.labels, f);
}

Rational success_fraction(const Protocol& protocol, RankFunctional f) {
  const auto s = success_count(protocol, f);
  return Rational(BigInt(s)) / Rational(BigInt(tuple_count(protocol.sizes)));
}

Rational theta_value(RankFunctional f, std::size_t m) {
  if (m < 2) fail(ErrorKind::invalid_argument, "rank functionals need at least two samples");
  if (f == RankFunctional::min_selection) return ratio(1, static_cast<std::int64_t>(m));
  BigInt fact = 1;
  for (std::size_t i = 2; i <= m; ++i) fact *= i;
  return Rational(1) / Rational(fact);
}

std::size_t coverage_rank(double gamma, std::size_t r) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorKind::invalid_argument, "confidence level must lie in (0, 1)");
  if (r == 0) fail(ErrorKind::invalid_argument, "realization count r must be at least 1");
  return static_cast<std::size_t>(std::floor((1.0 - gamma) * static_cast<double>(r) + 1e-9));
}

double upper_bound(std::vector<double> realizations, double gamma) {
  const std::size_t k = coverage_rank(gamma, realizations.size());
  if (k == 0) return -std::numeric_limits<double>::infinity();
  std::nth_element(realizations.begin(), realizations.begin() + static_cast<std::ptrdiff_t>(k - 1), realizations.end());
  return realizations[k - 1];
}

double conditional_coverage(const Rational& p, const Rational& theta, std::size_t r, std::size_t k,
                            std::size_t batch) {
  if (batch == 0) fail(ErrorKind::invalid_argument, "batch size must be at least 1");
  if (k == 0) return 1.0;
  if (k > r) return 0.0;
  // A realization j/batch covers iff j <= floor(theta * batch).
  const Rational scaled = theta * Rational(static_cast<long long>(batch));
  const BigInt thr = numerator(scaled) / denominator(scaled);
  const double pd = to_double(p);
  double q = 1.0;
  if (thr < BigInt(static_cast<long long>(batch))) {
    boost::math::binomial_distribution<double> draws(static_cast<double>(batch), pd);
    q = boost::math::cdf(draws, static_cast<double>(thr));
  }
  boost::math::binomial_distribution<double> covered(static_cast<double>(r), q);
  return boost::math::cdf(boost::math::complement(covered, static_cast<double>(k - 1)));
}

SuccessDistribution success_distribution(std::span<const std::size_t> sizes, RankFunctional f,
                                         std::size_t state_cap) {
  check_sizes(sizes);
  SuccessDistribution out{{sizes.begin(), sizes.end()}, f, tuple_count(sizes), {}, protocol_total(sizes)};
  const Scanner sc{sizes, f};
  const std::size_t m = sizes.size();
  const std::size_t total_len = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::map<std::vector<std::uint64_t>, std::uint64_t> layer;
  layer[std::vector<std::uint64_t>(m + sc.stats(), 0)] = 1;
  for (std::size_t pos = 0; pos < total_len; ++pos) {
    std::map<std::vector<std::uint64_t>, std::uint64_t> next;
    for (const auto& [state, ways] : layer) {
      for (std::size_t l = 0; l < m; ++l) {
        if (state[l] == sizes[l]) continue;
        auto s = state;
        sc.step(s, l);
        next[std::move(s)] += ways;
      }
    }
    if (next.size() > state_cap)
      fail(ErrorKind::cap_exceeded, "protocol scan holds more than " + std::to_string(state_cap) + " states");
    layer = std::move(next);
  }
  for (const auto& [state, ways] : layer) out.protocols[sc.result(state)] += ways;
  return out;
}

SuccessDistribution success_distribution_by_listing(std::span<const std::size_t> sizes, RankFunctional f,
                                                    std::size_t cap) {
  check_sizes(sizes);
  SuccessDistribution out{{sizes.begin(), sizes.end()}, f, tuple_count(sizes), {}, protocol_total(sizes)};
  for_each_label_sequence(sizes, cap, [&](const std::vector<std::size_t>& labels) {
    ++out.protocols[count_of_labels(sizes, labels, f)];
  });
  return out;
}

void check_coverage_config(const CoverageConfig& c) {
  check_sizes(c.sizes);
  coverage_rank(c.gamma, c.r);
  if (c.batch == 0) fail(ErrorKind::invalid_argument, "batch size must be at least 1");
}

double coverage_from_distribution(const SuccessDistribution& dist, const CoverageConfig& config) {
  check_coverage_config(config);
  const std::size_t k = coverage_rank(config.gamma, config.r);
  if (k == 0) return 1.0;
  const Rational theta = theta_value(config.functional, config.sizes.size());
  const Rational tuples = Rational(BigInt(dist.tuples));
  const double total = static_cast<double>(dist.total);
  CompensatedSum s;
  for (const auto& [count, protocols] : dist.protocols) {
    const double cond = conditional_coverage(Rational(BigInt(count)) / tuples, theta, config.r, k, config.batch);
    s.add(static_cast<double>(protocols) / total * cond);
  }
  return s.value();
}

CoverageResult actual_coverage(const CoverageConfig& config, const CoverageOptions& options) {
  check_coverage_config(config);
  try {
    const auto dist = success_distribution(config.sizes, config.functional, options.state_cap);
    CoverageResult out;
    out.coverage = coverage_from_distribution(dist, config);
    out.method = "exact";
    out.k = coverage_rank(config.gamma, config.r);
    out.theta = to_double(theta_value(config.functional, config.sizes.size()));
    return out;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::cap_exceeded) throw;
  }
  return coverage_protocol_mc(config, options.mc_runs, options.seed, options.exec);
}

CoverageResult coverage_protocol_mc(const CoverageConfig& config, std::size_t runs, std::uint64_t seed,
                                    Execution exec) {
  check_coverage_config(config);
  const std::size_t k = coverage_rank(config.gamma, config.r);
  const Rational theta = theta_value(config.functional, config.sizes.size());
  const Rational tuples = Rational(BigInt(tuple_count(config.sizes)));
  std::vector<std::size_t> base;
  for (std::size_t i = 0; i < config.sizes.size(); ++i) base.insert(base.end(), config.sizes[i], i);
  struct Run {
    const CoverageConfig* config;
    const Rational* theta;
    const Rational* tuples;
    std::size_t k;
    std::vector<std::size_t> labels;
    double operator()(RngSource& src) {
      for (std::size_t j = labels.size(); j > 1; --j) std::swap(labels[j - 1], labels[src.uniform_index(j)]);
      const auto s = count_of_labels(config->sizes, labels, config->functional);
      return conditional_coverage(Rational(BigInt(s)) / *tuples, *theta, config->r, k, config->batch);
    }
  };
  auto out = run_mc(runs, seed, exec, Run{&config, &theta, &tuples, k, base});
  out.method = "protocol-mc";
  out.k = k;
  out.theta = to_double(theta);
  return out;
}

CoverageResult coverage_simulation_mc(const CoverageConfig& config, std::size_t runs, std::uint64_t seed,
                                      Execution exec) {
  check_coverage_config(config);
  const std::size_t k = coverage_rank(config.gamma, config.r);
  const double theta = to_double(theta_value(config.functional, config.sizes.size()));
  struct Run {
    const CoverageConfig* config;
    double theta;
    std::vector<std::vector<double>> samples;
    std::vector<double> x, realizations;
    double operator()(RngSource& src) {
      const std::size_t m = samples.size();
      for (std::size_t i = 0; i < m; ++i)
        for (auto& v : samples[i]) v = src.uniform01();
      for (auto& real : realizations) {
        std::size_t hits = 0;
        for (std::size_t b = 0; b < config->batch; ++b) {
          for (std::size_t i = 0; i < m; ++i) x[i] = samples[i][src.uniform_index(samples[i].size())];
          bool ok = true;
          if (config->functional == RankFunctional::min_selection) {
            for (std::size_t i = 0; i + 1 < m; ++i) ok = ok && x[m - 1] < x[i];
          } else {
            for (std::size_t i = 0; i + 1 < m; ++i) ok = ok && x[i] < x[i + 1];
          }
          hits += ok ? 1 : 0;
        }
        real = static_cast<double>(hits) / static_cast<double>(config->batch);
      }
      return upper_bound(realizations, config->gamma) <= theta ? 1.0 : 0.0;
    }
  };
  std::vector<std::vector<double>> samples;
  for (auto n : config.sizes) samples.emplace_back(n);
  auto out = run_mc(runs, seed, exec,
                    Run{&config, theta, samples, std::vector<double>(config.sizes.size()),
                        std::vector<double>(config.r)});
  out.method = "simulation-mc";
  out.k = k;
  out.theta = theta;
  return out;
}

const std::vector<double>& reference_gammas() {
  static const std::vector<double> g{0.5, 0.6, 0.7, 0.8, 0.9};
  return g;
}

const std::vector<CoverageReferenceRow>& reference_table(RankFunctional f) {
  static const std::vector<CoverageReferenceRow> selection{
      {{3, 3, 3}, {0.533, 0.576, 0.625, 0.686, 0.770}}, {{9, 9, 3}, {0.519, 0.571, 0.630, 0.701, 0.793}},
      {{4, 4, 4}, {0.521, 0.578, 0.640, 0.709, 0.797}}, {{6, 6, 4}, {0.516, 0.576, 0.642, 0.715, 0.807}},
      {{5, 5, 5}, {0.515, 0.579, 0.646, 0.722, 0.817}}, {{3, 3, 8}, {0.516, 0.581, 0.651, 0.728, 0.823}},
      {{4, 4, 7}, {0.512, 0.580, 0.652, 0.732, 0.830}},
  };
  static const std::vector<CoverageReferenceRow> ordering{
      {{3, 3, 3}, {0.593, 0.635, 0.680, 0.730, 0.803}}, {{9, 9, 3}, {0.524, 0.595, 0.675, 0.762, 0.862}},
      {{4, 4, 4}, {0.540, 0.606, 0.677, 0.757, 0.848}}, {{6, 6, 4}, {0.525, 0.600, 0.678, 0.766, 0.864}},
      {{5, 5, 5}, {0.523, 0.601, 0.682, 0.770, 0.866}}, {{3, 3, 8}, {0.536, 0.604, 0.678, 0.760, 0.855}},
      {{4, 4, 7}, {0.522, 0.600, 0.681, 0.769, 0.866}},
  };
  return f == RankFunctional::min_selection ? selection : ordering;
}

std::vector<ScanRow> scan_reference(RankFunctional f, std::size_t r_min, std::size_t r_max, std::size_t batch) {
  if (r_min == 0 || r_min > r_max) fail(ErrorKind::invalid_argument, "scan range must satisfy 1 <= r_min <= r_max");
  const auto& gammas = reference_gammas();
  std::vector<ScanRow> out;
  for (const auto& row : reference_table(f)) {
    const auto dist = success_distribution(row.sizes, f);
    ScanRow best;
    best.sizes = row.sizes;
    best.reference = row.coverage;
    best.max_deviation = std::numeric_limits<double>::infinity();
    for (std::size_t r = r_min; r <= r_max; ++r) {
      std::vector<double> computed;
      double dev = 0.0;
      for (std::size_t g = 0; g < gammas.size(); ++g) {
        computed.push_back(coverage_from_distribution(dist, {row.sizes, gammas[g], r, f, batch}));
        dev = std::max(dev, std::abs(computed.back() - row.coverage[g]));
      }
      if (dev < best.max_deviation) {
        best.max_deviation = dev;
        best.best_r = r;
        best.computed = std::move(computed);
      }
    }
    out.push_back(std::move(best));
  }
  return out;
}

}  // namespace resamplex

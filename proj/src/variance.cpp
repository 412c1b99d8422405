#include "resamplex/variance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "resamplex/estimator.hpp"
#include "resamplex/oracle.hpp"
#include "resamplex/random.hpp"

namespace resamplex {

namespace {

using Support = std::vector<std::pair<Rational, Rational>>;

void check_inputs(const CalcTree& tree, const std::vector<Distribution>& laws) {
  if (tree.known_arity() != 0) fail(ErrorKind::unsupported, "variance engine expects sampled inputs only");
  if (laws.size() != tree.arity())
    fail(ErrorKind::arity_mismatch, "tree has " + std::to_string(tree.arity()) + " inputs but " +
                                        std::to_string(laws.size()) + " laws were given");
}

void check_sizes(const CalcTree& tree, std::span<const std::size_t> sizes) {
  if (sizes.size() != tree.arity()) fail(ErrorKind::arity_mismatch, "one sample size per input expected");
  for (auto n : sizes)
    if (n == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
}

bool all_finite(const std::vector<Distribution>& laws) {
  return std::all_of(laws.begin(), laws.end(), [](const auto& l) { return l.is_finite(); });
}

Support exact_support(const Distribution& law) {
  std::map<Rational, Rational> merged;
  for (const auto& [v, p] : law.support()) {
    if (!std::isfinite(v)) fail(ErrorKind::unsupported, "exact mode needs finite support values");
    merged[to_rational(v)] += to_rational(p);
  }
  return {merged.begin(), merged.end()};
}

// Multiplies sizes, failing once the product passes `cap`.
std::size_t checked_product(const std::vector<std::size_t>& dims, std::size_t cap, const char* what) {
  std::size_t total = 1;
  for (auto d : dims) {
    if (d != 0 && total > cap / d) fail(ErrorKind::cap_exceeded, std::string(what) + " exceeds the enumeration cap");
    total *= d;
  }
  if (total > cap) fail(ErrorKind::cap_exceeded, std::string(what) + " exceeds the enumeration cap");
  return total;
}

// Sum over a mixed-radix index space of `term(digits)`, chunked, with the
// partial sums combined in chunk order.
template <class Term>
Rational sum_over_grid(const std::vector<std::size_t>& dims, std::size_t total, Execution exec, Term&& term) {
  const std::size_t chunks = chunk_count(total);
  std::vector<Rational> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(total, begin + kChunk);
    std::vector<std::size_t> digit(dims.size());
    std::size_t rest = begin;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      digit[i] = rest % dims[i];
      rest /= dims[i];
    }
    auto t = term;  // private scratch per chunk
    Rational acc = 0;
    for (std::size_t f = begin; f < end; ++f) {
      acc += t(digit);
      for (std::size_t i = 0; i < dims.size(); ++i) {
        if (++digit[i] < dims[i]) break;
        digit[i] = 0;
      }
    }
    partial[c] = std::move(acc);
  });
  Rational total_sum = 0;
  for (auto& p : partial) total_sum += p;
  return total_sum;
}

Rational exact_mean(const CalcTree& tree, const std::vector<Support>& supp, std::size_t cap, Execution exec) {
  std::vector<std::size_t> dims;
  for (const auto& s : supp) dims.push_back(s.size());
  const std::size_t total = checked_product(dims, cap, "mean enumeration");
  struct Term {
    const CalcTree* tree;
    const std::vector<Support>* supp;
    std::vector<Rational> x, scratch;
    Rational operator()(const std::vector<std::size_t>& d) {
      Rational p = 1;
      for (std::size_t i = 0; i < d.size(); ++i) {
        x[i] = (*supp)[i][d[i]].first;
        p *= (*supp)[i][d[i]].second;
      }
      return p * tree->eval<Rational>(std::span<const Rational>(x), {}, std::span<Rational>(scratch));
    }
  };
  return sum_over_grid(dims, total, exec,
                       Term{&tree, &supp, std::vector<Rational>(supp.size()), std::vector<Rational>(tree.size())});
}

Rational exact_mixed(const CalcTree& tree, const std::vector<Support>& supp, OmegaPair omega, std::size_t cap,
                     Execution exec) {
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < supp.size(); ++i)
    dims.push_back(omega.contains(i) ? supp[i].size() : supp[i].size() * supp[i].size());
  const std::size_t total = checked_product(dims, cap, "mixed-moment enumeration");
  struct Term {
    const CalcTree* tree;
    const std::vector<Support>* supp;
    OmegaPair omega;
    std::vector<Rational> x, y, scratch;
    Rational operator()(const std::vector<std::size_t>& d) {
      Rational p = 1;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& s = (*supp)[i];
        if (omega.contains(i)) {
          x[i] = y[i] = s[d[i]].first;
          p *= s[d[i]].second;
        } else {
          const auto a = d[i] % s.size(), b = d[i] / s.size();
          x[i] = s[a].first;
          y[i] = s[b].first;
          p *= s[a].second * s[b].second;
        }
      }
      const Rational fx = tree->eval<Rational>(std::span<const Rational>(x), {}, std::span<Rational>(scratch));
      const Rational fy = tree->eval<Rational>(std::span<const Rational>(y), {}, std::span<Rational>(scratch));
      return p * fx * fy;
    }
  };
  const std::size_t m = supp.size();
  return sum_over_grid(dims, total, exec,
                       Term{&tree, &supp, omega, std::vector<Rational>(m), std::vector<Rational>(m),
                            std::vector<Rational>(tree.size())});
}

std::vector<Support> supports_of(const std::vector<Distribution>& laws) {
  std::vector<Support> out;
  for (const auto& l : laws) out.push_back(exact_support(l));
  return out;
}

// Number of enumeration terms an exact resampling-variance run needs.
std::size_t exact_terms(const std::vector<Distribution>& laws, std::size_t cap) {
  long double total = 1;
  for (const auto& l : laws) {
    const long double s = static_cast<long double>(l.support().size());
    total *= s + s * s;
  }
  return total > static_cast<long double>(cap) ? cap + 1 : static_cast<std::size_t>(total);
}

// Pair draws of the simple estimator's two realizations.
template <class Source>
double simple_mc_replicate(const CalcTree& tree, const std::vector<Distribution>& laws,
                           std::span<const std::size_t> sizes, std::size_t r, Source& src,
                           std::vector<double>& a, std::vector<double>& b, std::vector<double>& scratch) {
  const std::size_t m = laws.size();
  auto phi = [&](const std::vector<double>& x) {
    return tree.eval<double>(std::span<const double>(x), {}, std::span<double>(scratch));
  };
  for (std::size_t i = 0; i < m; ++i) a[i] = src.draw(laws[i]);
  const double s = phi(a);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = src.draw(laws[i]);
    b[i] = src.uniform_index(sizes[i]) == 0 ? a[i] : src.draw(laws[i]);
  }
  const double pair = phi(a) * phi(b);
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = src.draw(laws[i]);
    b[i] = src.draw(laws[i]);
  }
  const double indep = phi(a) * phi(b);
  const double rr = static_cast<double>(r);
  return s * s / rr + (rr - 1.0) / rr * pair - indep;
}

template <class Replicate>
McEstimate monte_carlo(std::size_t runs, std::uint64_t seed, Execution exec, Replicate&& replicate) {
  if (runs < 2) fail(ErrorKind::invalid_argument, "Monte Carlo needs at least 2 runs");
  const std::size_t chunks = chunk_count(runs);
  std::vector<RunningMoments> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    RngSource src(seed, c);
    auto rep = replicate;
    const std::size_t count = std::min(kChunk, runs - c * kChunk);
    for (std::size_t k = 0; k < count; ++k) partial[c].add(rep(src));
  });
  RunningMoments total;
  for (const auto& p : partial) {
    total.sum.add(p.sum.value());
    total.sum_sq.add(p.sum_sq.value());
  }
  const double n = static_cast<double>(runs);
  McEstimate out;
  out.runs = runs;
  out.value = total.sum.value() / n;
  const double var = std::max(0.0, (total.sum_sq.value() - n * out.value * out.value) / (n - 1.0));
  out.standard_error = std::sqrt(var / n);
  return out;
}

// Hierarchical sampling of one slot and of two distinct slots of node v.
struct HierSampler {
  const CalcTree* tree;
  const std::vector<Distribution>* laws;
  std::vector<double> buf;

  double single(std::size_t id, RngSource& src) {
    const auto& v = tree->node(id);
    if (v.is_leaf()) return src.draw((*laws)[v.input]);
    std::vector<double> vals;
    vals.reserve(v.children.size());
    for (auto c : v.children) vals.push_back(single(c, src));
    return CalcTree::apply<double>(v, std::span<const double>(vals));
  }

  std::pair<double, double> pair(std::size_t id, RngSource& src) {
    const auto& v = tree->node(id);
    if (v.is_leaf()) return {src.draw((*laws)[v.input]), src.draw((*laws)[v.input])};
    std::vector<double> a, b;
    for (auto c : v.children) {
      if (src.uniform_index(tree->node(c).size) == 0) {
        const double y = single(c, src);
        a.push_back(y);
        b.push_back(y);
      } else {
        const auto [y1, y2] = pair(c, src);
        a.push_back(y1);
        b.push_back(y2);
      }
    }
    return {CalcTree::apply<double>(v, std::span<const double>(a)), CalcTree::apply<double>(v, std::span<const double>(b))};
  }
};

}  // namespace

Rational omega_probability_exact(OmegaPair omega, std::span<const std::size_t> sizes) {
  Rational p = 1;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
    const Rational same = ratio(1, static_cast<std::int64_t>(sizes[i]));
    p *= omega.contains(i) ? same : Rational(1) - same;
  }
  return p;
}

double omega_probability(OmegaPair omega, std::span<const std::size_t> sizes) {
  return to_double(omega_probability_exact(omega, sizes));
}

ExactMoments exact_moments(const CalcTree& tree, const std::vector<Distribution>& laws,
                           std::span<const std::size_t> sizes, std::size_t cap, Execution exec) {
  check_inputs(tree, laws);
  check_sizes(tree, sizes);
  const std::size_t m = laws.size();
  if (m > 20) fail(ErrorKind::cap_exceeded, "too many inputs for omega-pair enumeration");
  const auto supp = supports_of(laws);
  ExactMoments out;
  out.mean = exact_mean(tree, supp, cap, exec);
  out.mixed_by_subset.resize(std::size_t{1} << m);
  out.mixed = 0;
  for (std::uint32_t mask = 0; mask < out.mixed_by_subset.size(); ++mask) {
    out.mixed_by_subset[mask] = exact_mixed(tree, supp, {mask}, cap, exec);
    out.mixed += omega_probability_exact({mask}, sizes) * out.mixed_by_subset[mask];
  }
  out.second = out.mixed_by_subset.back();
  return out;
}

Rational conditional_mixed_moment_exact(const CalcTree& tree, const std::vector<Distribution>& laws,
                                        OmegaPair omega, std::size_t cap, Execution exec) {
  check_inputs(tree, laws);
  return exact_mixed(tree, supports_of(laws), omega, cap, exec);
}

double conditional_mixed_moment(const CalcTree& tree, const std::vector<Distribution>& laws, OmegaPair omega,
                                std::size_t cap) {
  return to_double(conditional_mixed_moment_exact(tree, laws, omega, cap));
}

McEstimate conditional_mixed_moment_mc(const CalcTree& tree, const std::vector<Distribution>& laws,
                                       OmegaPair omega, std::size_t runs, std::uint64_t seed, Execution exec) {
  check_inputs(tree, laws);
  const std::size_t m = laws.size();
  struct Rep {
    const CalcTree* tree;
    const std::vector<Distribution>* laws;
    OmegaPair omega;
    std::vector<double> a, b, scratch;
    double operator()(RngSource& src) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = src.draw((*laws)[i]);
        b[i] = omega.contains(i) ? a[i] : src.draw((*laws)[i]);
      }
      const double fa = tree->eval<double>(std::span<const double>(a), {}, std::span<double>(scratch));
      const double fb = tree->eval<double>(std::span<const double>(b), {}, std::span<double>(scratch));
      return fa * fb;
    }
  };
  return monte_carlo(runs, seed, exec,
                     Rep{&tree, &laws, omega, std::vector<double>(m), std::vector<double>(m),
                         std::vector<double>(tree.size())});
}

Rational resampling_variance_exact(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r, std::size_t cap,
                                   Execution exec) {
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  const auto mom = exact_moments(tree, laws, sizes, cap, exec);
  return variance_from_moments(mom.mean, mom.second, mom.mixed, r);
}

VarianceResult resampling_variance(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r,
                                   const VarianceOptions& options) {
  check_inputs(tree, laws);
  check_sizes(tree, sizes);
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  VarianceResult out;

  if (all_finite(laws) && exact_terms(laws, options.cap) <= options.cap) {
    const auto mom = exact_moments(tree, laws, sizes, options.cap, options.exec);
    out.variance = to_double(variance_from_moments(mom.mean, mom.second, mom.mixed, r));
    out.method = "exact";
    out.mean = to_double(mom.mean);
    out.second_moment = to_double(mom.second);
    out.mixed_moment = to_double(mom.mixed);
    return out;
  }

  if (laws.size() == 1 && !laws[0].is_finite()) {
    const auto& law = laws[0];
    std::vector<double> scratch(tree.size());
    auto phi = [&](double u) {
      const double x = law.quantile(u);
      return tree.eval<double>(std::span<const double>(&x, 1), {}, std::span<double>(scratch));
    };
    using boost::math::quadrature::gauss_kronrod;
    const double mu = gauss_kronrod<double, 31>::integrate(phi, 0.0, 1.0, 20, 1e-12);
    const double mu2 = gauss_kronrod<double, 31>::integrate([&](double u) { const double f = phi(u); return f * f; },
                                                            0.0, 1.0, 20, 1e-12);
    const double var = std::max(0.0, mu2 - mu * mu);
    const double mixed = mu * mu + var / static_cast<double>(sizes[0]);
    out.variance = variance_from_moments(mu, mu2, mixed, r);
    out.method = "quadrature";
    out.mean = mu;
    out.second_moment = mu2;
    out.mixed_moment = mixed;
    return out;
  }

  struct Rep {
    const CalcTree* tree;
    const std::vector<Distribution>* laws;
    std::vector<std::size_t> sizes;
    std::size_t r;
    std::vector<double> a, b, scratch;
    double operator()(RngSource& src) {
      return simple_mc_replicate(*tree, *laws, std::span<const std::size_t>(sizes), r, src, a, b, scratch);
    }
  };
  const std::size_t m = laws.size();
  const auto mc = monte_carlo(options.mc_runs, options.seed, options.exec,
                              Rep{&tree, &laws, {sizes.begin(), sizes.end()}, r, std::vector<double>(m),
                                  std::vector<double>(m), std::vector<double>(tree.size())});
  out.variance = mc.value;
  out.standard_error = mc.standard_error;
  out.method = "monte-carlo";
  return out;
}

SingleSampleVariance single_sample_variance(double sigma2, std::size_t n, std::size_t r) {
  if (n == 0 || r == 0) fail(ErrorKind::invalid_argument, "n and r must be at least 1");
  const double nn = static_cast<double>(n), rr = static_cast<double>(r);
  return {sigma2 / rr + (rr - 1.0) * sigma2 / (rr * nn), sigma2 / nn};
}

Rational hierarchical_variance_exact(const CalcTree& tree, const std::vector<Distribution>& laws, std::size_t cap) {
  check_inputs(tree, laws);
  using Marginal = std::map<Rational, Rational>;
  using PairLaw = std::map<std::pair<Rational, Rational>, Rational>;
  std::vector<Marginal> marginal(tree.size());
  std::vector<PairLaw> pair(tree.size());

  for (const auto& v : tree.nodes()) {
    if (v.is_leaf()) {
      for (const auto& [y, p] : exact_support(laws[v.input])) marginal[v.id][y] += p;
      for (const auto& [y1, p1] : marginal[v.id])
        for (const auto& [y2, p2] : marginal[v.id]) pair[v.id][{y1, y2}] += p1 * p2;
      continue;
    }
    const std::size_t k = v.children.size();

    std::vector<std::vector<std::pair<Rational, Rational>>> single_opts(k);
    std::vector<std::vector<std::tuple<Rational, Rational, Rational>>> pair_opts(k);
    std::vector<std::size_t> single_dims(k), pair_dims(k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = v.children[i];
      const Rational same = ratio(1, static_cast<std::int64_t>(tree.node(c).size));
      single_opts[i].assign(marginal[c].begin(), marginal[c].end());
      for (const auto& [y, p] : marginal[c]) pair_opts[i].emplace_back(y, y, p * same);
      if (same != 1)
        for (const auto& [yy, p] : pair[c]) pair_opts[i].emplace_back(yy.first, yy.second, p * (1 - same));
      single_dims[i] = single_opts[i].size();
      pair_dims[i] = pair_opts[i].size();
    }

    std::vector<Rational> a(k), b(k);
    std::vector<std::size_t> d(k, 0);
    const std::size_t n_single = checked_product(single_dims, cap, "hierarchical marginal");
    for (std::size_t f = 0; f < n_single; ++f) {
      Rational p = 1;
      for (std::size_t i = 0; i < k; ++i) {
        a[i] = single_opts[i][d[i]].first;
        p *= single_opts[i][d[i]].second;
      }
      marginal[v.id][CalcTree::apply<Rational>(v, std::span<const Rational>(a))] += p;
      for (std::size_t i = 0; i < k && ++d[i] == single_dims[i]; ++i) d[i] = 0;
    }

    std::fill(d.begin(), d.end(), 0);
    const std::size_t n_pair = checked_product(pair_dims, cap, "hierarchical pair law");
    for (std::size_t f = 0; f < n_pair; ++f) {
      Rational p = 1;
      for (std::size_t i = 0; i < k; ++i) {
        const auto& [y1, y2, q] = pair_opts[i][d[i]];
        a[i] = y1;
        b[i] = y2;
        p *= q;
      }
      pair[v.id][{CalcTree::apply<Rational>(v, std::span<const Rational>(a)),
                  CalcTree::apply<Rational>(v, std::span<const Rational>(b))}] += p;
      for (std::size_t i = 0; i < k && ++d[i] == pair_dims[i]; ++i) d[i] = 0;
    }
    // Children laws are no longer needed once the parent is built.
    for (auto c : v.children) {
      Marginal().swap(marginal[c]);
      PairLaw().swap(pair[c]);
    }
  }

  const auto root = tree.root_id();
  Rational mu = 0, mu2 = 0, mu11 = 0;
  for (const auto& [y, p] : marginal[root]) {
    mu += y * p;
    mu2 += y * y * p;
  }
  for (const auto& [yy, p] : pair[root]) mu11 += yy.first * yy.second * p;
  return variance_from_moments(mu, mu2, mu11, tree.root().size);
}

VarianceResult hierarchical_variance(const CalcTree& tree, const std::vector<Distribution>& laws,
                                     const VarianceOptions& options) {
  check_inputs(tree, laws);
  VarianceResult out;
  if (all_finite(laws)) {
    try {
      out.variance = to_double(hierarchical_variance_exact(tree, laws, options.cap));
      out.method = "exact";
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::cap_exceeded) throw;
    }
  }
  struct Rep {
    HierSampler sampler;
    double operator()(RngSource& src) {
      const auto& tree = *sampler.tree;
      const auto root = tree.root_id();
      const double n = static_cast<double>(tree.root().size);
      const double s = sampler.single(root, src);
      const auto [p1, p2] = sampler.pair(root, src);
      const double u1 = sampler.single(root, src);
      const double u2 = sampler.single(root, src);
      return s * s / n + (n - 1.0) / n * p1 * p2 - u1 * u2;
    }
  };
  const auto mc = monte_carlo(options.mc_runs, options.seed, options.exec, Rep{HierSampler{&tree, &laws, {}}});
  out.variance = mc.value;
  out.standard_error = mc.standard_error;
  out.method = "monte-carlo";
  return out;
}

double conditional_variance(const Pools& pools, const CalcTree& tree, std::size_t r) {
  check_pools(pools, tree);
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  std::vector<std::size_t> dims;
  for (const auto& p : pools) dims.push_back(p.size());
  const std::size_t total = checked_product(dims, 10'000'000, "conditional variance enumeration");
  TreeEvaluator phi(tree);
  std::vector<std::size_t> d(dims.size(), 0);
  std::vector<double> x(dims.size());
  CompensatedSum s1, s2;
  for (std::size_t f = 0; f < total; ++f) {
    for (std::size_t i = 0; i < d.size(); ++i) x[i] = pools[i][d[i]];
    const double v = phi(std::span<const double>(x));
    s1.add(v);
    s2.add(v * v);
    for (std::size_t i = 0; i < d.size() && ++d[i] == dims[i]; ++i) d[i] = 0;
  }
  const double n = static_cast<double>(total);
  const double mean = s1.value() / n;
  return std::max(0.0, s2.value() / n - mean * mean) / static_cast<double>(r);
}

double brute_force_variance_oracle(const CalcTree& tree, const std::vector<Distribution>& laws,
                                   std::span<const std::size_t> sizes, std::size_t r, std::size_t cap,
                                   Execution exec) {
  check_inputs(tree, laws);
  check_sizes(tree, sizes);
  long double inner = 1;
  for (auto n : sizes) inner *= static_cast<long double>(n);
  inner = std::pow(inner, static_cast<long double>(r));
  return exhaustive_moments(laws, {sizes.begin(), sizes.end()}, inner, cap, exec,
                            [&](const Pools& pools, ExhaustiveSource& s) { return simple_estimate_with(pools, tree, r, s); })
      .variance;
}

double brute_force_hierarchical_oracle(const CalcTree& tree, const std::vector<Distribution>& laws, std::size_t cap,
                                       Execution exec) {
  check_inputs(tree, laws);
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < tree.arity(); ++i) sizes.push_back(tree.node(tree.leaf_of(i)).size);
  long double inner = 1;
  for (const auto& v : tree.nodes()) {
    if (v.is_leaf()) continue;
    long double per_slot = 1;
    for (auto c : v.children) per_slot *= static_cast<long double>(tree.node(c).size);
    inner *= std::pow(per_slot, static_cast<long double>(v.size));
  }
  return exhaustive_moments(laws, sizes, inner, cap, exec,
                            [&](const Pools& pools, ExhaustiveSource& s) { return hierarchical_estimate_with(pools, tree, s); })
      .variance;
}

}  // namespace resamplex

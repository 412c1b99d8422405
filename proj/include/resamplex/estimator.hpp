#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resamplex/parallel.hpp"
#include "resamplex/random.hpp"
#include "resamplex/sample.hpp"
#include "resamplex/tree.hpp"

namespace resamplex {

struct EstimateReport {
  double value = 0.0;
  std::string method;
  std::size_t replications = 0;
  std::vector<std::size_t> sizes;
  std::uint64_t seed = 0;
  std::optional<double> variance;
  std::optional<double> standard_error;
};

/// Evaluates a tree on sampled inputs with its own scratch buffer; copy one
/// per worker.
class TreeEvaluator {
public:
  explicit TreeEvaluator(const CalcTree& tree) : tree_(&tree), scratch_(tree.size()) {
    if (tree.known_arity() != 0) fail(ErrorKind::unsupported, "tree has known-law inputs; use the partial estimators");
  }
  double operator()(std::span<const double> x) {
    return tree_->eval<double>(x, {}, std::span<double>(scratch_));
  }

private:
  const CalcTree* tree_;
  std::vector<double> scratch_;
};

/// Sum and sum of squares of realization values.
struct RunningMoments {
  CompensatedSum sum;
  CompensatedSum sum_sq;
  void add(double v) {
    sum.add(v);
    sum_sq.add(v * v);
  }
};

namespace kernel {

/// `count` simple-resampling realizations: one uniform index per pool, then phi.
template <class Phi, RandomSource Source>
void simple_realizations(const Pools& pools, Phi& phi, std::size_t count, Source& src, RunningMoments& acc) {
  std::vector<double> x(pools.size());
  for (std::size_t l = 0; l < count; ++l) {
    for (std::size_t i = 0; i < pools.size(); ++i) x[i] = pools[i][src.uniform_index(pools[i].size())];
    acc.add(phi(std::span<const double>(x)));
  }
}

/// Fills `out` with slots of node v: each slot draws one element uniformly
/// from every child sample and applies phi_v.
template <RandomSource Source>
void fill_slots(const TreeNode& v, const std::vector<const std::vector<double>*>& child_samples,
                std::span<double> out, Source& src) {
  std::vector<double> vals(child_samples.size());
  for (auto& slot : out) {
    for (std::size_t i = 0; i < child_samples.size(); ++i) {
      const auto& s = *child_samples[i];
      vals[i] = s[src.uniform_index(s.size())];
    }
    slot = CalcTree::apply<double>(v, std::span<const double>(vals));
  }
}

}  // namespace kernel

void check_pools(const Pools& pools, const CalcTree& tree);

template <class Phi>
EstimateReport simple_estimate_fn(const Pools& pools, const Phi& phi, std::size_t r, std::uint64_t seed,
                                  Execution exec = Execution::parallel) {
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  if (pools.empty()) fail(ErrorKind::invalid_argument, "no sample pools");
  const std::size_t chunks = chunk_count(r);
  std::vector<RunningMoments> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    RngSource src(seed, c);
    Phi local = phi;
    const std::size_t count = std::min(kChunk, r - c * kChunk);
    kernel::simple_realizations(pools, local, count, src, partial[c]);
  });
  RunningMoments total;
  for (const auto& p : partial) {
    total.sum.add(p.sum.value());
    total.sum_sq.add(p.sum_sq.value());
  }
  EstimateReport rep;
  const double rr = static_cast<double>(r);
  rep.value = total.sum.value() / rr;
  rep.method = "simple";
  rep.replications = r;
  for (const auto& p : pools) rep.sizes.push_back(p.size());
  rep.seed = seed;
  if (r > 1) {
    const double var = std::max(0.0, (total.sum_sq.value() - rr * rep.value * rep.value) / (rr - 1.0));
    rep.standard_error = std::sqrt(var / rr);
  }
  return rep;
}

/// Simple resampling estimator: mean of phi over r uniform index draws.
EstimateReport simple_estimate(const Pools& pools, const CalcTree& tree, std::size_t r, std::uint64_t seed,
                               Execution exec = Execution::parallel);

/// The same estimator driven by one caller-supplied source.
template <RandomSource Source>
double simple_estimate_with(const Pools& pools, const CalcTree& tree, std::size_t r, Source& src) {
  check_pools(pools, tree);
  TreeEvaluator phi(tree);
  RunningMoments acc;
  kernel::simple_realizations(pools, phi, r, src, acc);
  return acc.sum.value() / static_cast<double>(r);
}

/// Hierarchical resampling: every internal node v builds a sample of size
/// n_v (its TreeNode::size) from its children's samples; the estimate is the
/// mean of the root sample.
EstimateReport hierarchical_estimate(const Pools& pools, const CalcTree& tree, std::uint64_t seed,
                                     Execution exec = Execution::parallel);

template <RandomSource Source>
double hierarchical_estimate_with(const Pools& pools, const CalcTree& tree, Source& src) {
  check_pools(pools, tree);
  std::vector<std::vector<double>> built(tree.size());
  std::vector<const std::vector<double>*> sample_of(tree.size());
  for (const auto& v : tree.nodes()) {
    if (v.is_leaf()) {
      sample_of[v.id] = &pools[v.input].values();
      continue;
    }
    std::vector<const std::vector<double>*> kids;
    for (auto c : v.children) kids.push_back(sample_of[c]);
    built[v.id].resize(v.size);
    kernel::fill_slots(v, kids, std::span<double>(built[v.id]), src);
    sample_of[v.id] = &built[v.id];
  }
  const auto& root = *sample_of[tree.root_id()];
  CompensatedSum s;
  for (double y : root) s.add(y);
  return s.value() / static_cast<double>(root.size());
}

/// Exact plug-in estimate: mean of phi over all prod(n_i) index combinations.
double plugin_estimate(const Pools& pools, const CalcTree& tree, std::size_t cap = 10'000'000,
                       Execution exec = Execution::parallel);

// Block reliability ---------------------------------------------------------

struct Block {
  SamplePool pool;
  std::size_t multiplicity = 1;  // l_i parallel subqueries sharing the block law
};

struct BlockSystem {
  std::vector<Block> blocks;
};

/// R(t) = prod_i (1 - F_i(t)^{l_i}) for known block laws.
double block_reliability(const std::vector<Distribution>& laws, const std::vector<std::size_t>& multiplicity,
                         double t);

/// Plug-in estimate prod_i (1 - Fhat_i(t)^{l_i}) from empirical CDFs.
double plugin_block_reliability(const BlockSystem& system, double t);

namespace kernel {

/// One realization: each block draws l_i distinct elements of its pool; the
/// block survives iff one of them exceeds t; value is the product.
template <RandomSource Source>
double block_realization(const BlockSystem& system, double t, Source& src, std::vector<std::size_t>& perm) {
  double value = 1.0;
  for (const auto& b : system.blocks) {
    const std::size_t n = b.pool.size();
    perm.resize(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    bool survives = false;
    for (std::size_t j = 0; j < b.multiplicity; ++j) {
      const std::size_t pick = j + src.uniform_index(n - j);
      std::swap(perm[j], perm[pick]);
      if (b.pool[perm[j]] > t) survives = true;
    }
    if (!survives) value = 0.0;
  }
  return value;
}

}  // namespace kernel

void check_blocks(const BlockSystem& system);

EstimateReport resampling_block_reliability(const BlockSystem& system, double t, std::size_t r, std::uint64_t seed,
                                            Execution exec = Execution::parallel);

template <RandomSource Source>
double resampling_block_reliability_with(const BlockSystem& system, double t, std::size_t r, Source& src) {
  check_blocks(system);
  std::vector<std::size_t> perm;
  CompensatedSum s;
  for (std::size_t l = 0; l < r; ++l) s.add(kernel::block_realization(system, t, src, perm));
  return s.value() / static_cast<double>(r);
}

}  // namespace resamplex

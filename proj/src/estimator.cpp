#include "resamplex/estimator.hpp"

#include <algorithm>

namespace resamplex {

void check_pools(const Pools& pools, const CalcTree& tree) {
  if (pools.size() != tree.arity())
    fail(ErrorKind::arity_mismatch, "tree has " + std::to_string(tree.arity()) + " sampled inputs but " +
                                        std::to_string(pools.size()) + " pools were given");
  if (tree.known_arity() != 0) fail(ErrorKind::unsupported, "tree has known-law inputs; use the partial estimators");
}

EstimateReport simple_estimate(const Pools& pools, const CalcTree& tree, std::size_t r, std::uint64_t seed,
                               Execution exec) {
  check_pools(pools, tree);
  return simple_estimate_fn(pools, TreeEvaluator(tree), r, seed, exec);
}

EstimateReport hierarchical_estimate(const Pools& pools, const CalcTree& tree, std::uint64_t seed, Execution exec) {
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
    auto& out = built[v.id];
    out.resize(v.size);
    const std::size_t chunks = chunk_count(v.size);
    for_each_chunk(chunks, exec, [&](std::size_t c) {
      RngSource src(seed, (static_cast<std::uint64_t>(v.id) << 32) + c);
      const std::size_t begin = c * kChunk;
      const std::size_t count = std::min(kChunk, v.size - begin);
      kernel::fill_slots(v, kids, std::span<double>(out).subspan(begin, count), src);
    });
    sample_of[v.id] = &out;
  }

  const auto& root = *sample_of[tree.root_id()];
  RunningMoments acc;
  for (double y : root) acc.add(y);
  EstimateReport rep;
  const double n = static_cast<double>(root.size());
  rep.value = acc.sum.value() / n;
  rep.method = "hierarchical";
  rep.replications = root.size();
  rep.sizes = tree.sizes();
  for (std::size_t i = 0; i < pools.size(); ++i) rep.sizes[tree.leaf_of(i)] = pools[i].size();
  rep.seed = seed;
  if (root.size() > 1) {
    const double var = std::max(0.0, (acc.sum_sq.value() - n * rep.value * rep.value) / (n - 1.0));
    rep.standard_error = std::sqrt(var / n);
  }
  return rep;
}

double plugin_estimate(const Pools& pools, const CalcTree& tree, std::size_t cap, Execution exec) {
  check_pools(pools, tree);
  std::size_t total = 1;
  for (const auto& p : pools) {
    if (total > cap / p.size())
      fail(ErrorKind::cap_exceeded, "plug-in enumeration exceeds " + std::to_string(cap) +
                                        " index combinations; use the simple resampling estimator instead");
    total *= p.size();
  }
  const std::size_t chunks = chunk_count(total);
  std::vector<double> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    TreeEvaluator phi(tree);
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(total, begin + kChunk);
    std::vector<std::size_t> idx(pools.size());
    std::size_t rest = begin;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      idx[i] = rest % pools[i].size();
      rest /= pools[i].size();
    }
    std::vector<double> x(pools.size());
    CompensatedSum s;
    for (std::size_t f = begin; f < end; ++f) {
      for (std::size_t i = 0; i < pools.size(); ++i) x[i] = pools[i][idx[i]];
      s.add(phi(std::span<const double>(x)));
      for (std::size_t i = 0; i < pools.size(); ++i) {
        if (++idx[i] < pools[i].size()) break;
        idx[i] = 0;
      }
    }
    partial[c] = s.value();
  });
  CompensatedSum s;
  for (double p : partial) s.add(p);
  return s.value() / static_cast<double>(total);
}

double block_reliability(const std::vector<Distribution>& laws, const std::vector<std::size_t>& multiplicity,
                         double t) {
  if (laws.size() != multiplicity.size()) fail(ErrorKind::arity_mismatch, "one multiplicity per block law expected");
  double r = 1.0;
  for (std::size_t i = 0; i < laws.size(); ++i)
    r *= 1.0 - std::pow(laws[i].cdf(t), static_cast<double>(multiplicity[i]));
  return r;
}

double plugin_block_reliability(const BlockSystem& system, double t) {
  double r = 1.0;
  for (const auto& b : system.blocks) {
    if (b.multiplicity < 1) fail(ErrorKind::invalid_argument, "block multiplicity must be at least 1");
    r *= 1.0 - std::pow(b.pool.empirical().cdf(t), static_cast<double>(b.multiplicity));
  }
  return r;
}

void check_blocks(const BlockSystem& system) {
  if (system.blocks.empty()) fail(ErrorKind::invalid_argument, "block system has no blocks");
  for (const auto& b : system.blocks) {
    if (b.multiplicity < 1) fail(ErrorKind::invalid_argument, "block multiplicity must be at least 1");
    if (b.pool.size() < b.multiplicity)
      fail(ErrorKind::invalid_argument, "block pool of size " + std::to_string(b.pool.size()) +
                                            " cannot supply " + std::to_string(b.multiplicity) + " distinct draws");
  }
}

EstimateReport resampling_block_reliability(const BlockSystem& system, double t, std::size_t r, std::uint64_t seed,
                                            Execution exec) {
  check_blocks(system);
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  const std::size_t chunks = chunk_count(r);
  std::vector<RunningMoments> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    RngSource src(seed, c);
    std::vector<std::size_t> perm;
    const std::size_t count = std::min(kChunk, r - c * kChunk);
    for (std::size_t l = 0; l < count; ++l) partial[c].add(kernel::block_realization(system, t, src, perm));
  });
  RunningMoments total;
  for (const auto& p : partial) {
    total.sum.add(p.sum.value());
    total.sum_sq.add(p.sum_sq.value());
  }
  EstimateReport rep;
  const double rr = static_cast<double>(r);
  rep.value = total.sum.value() / rr;
  rep.method = "block-resampling";
  rep.replications = r;
  for (const auto& b : system.blocks) rep.sizes.push_back(b.pool.size());
  rep.seed = seed;
  if (r > 1) {
    const double var = std::max(0.0, (total.sum_sq.value() - rr * rep.value * rep.value) / (rr - 1.0));
    rep.standard_error = std::sqrt(var / rr);
  }
  return rep;
}

}  // namespace resamplex

#pragma once

// Integer sample-size allocation for hierarchical resampling under a linear
// budget sum_v a_v n_v <= b.
//
// Delta-method model: the covariance of phi_v at two slots that coincide with
// probability alpha is
//   psi_v(alpha) = sum_i g_i^2 psi_i(alpha + (1 - alpha) / n),
// g_i = dphi_v/dx_i at the mean, and the estimator variance is psi_root(0).
// A Bellman table over (node, alpha, budget) minimizes it.

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "resamplex/distribution.hpp"
#include "resamplex/rational.hpp"
#include "resamplex/tree.hpp"

namespace resamplex {

/// Which sample size drives alpha + (1 - alpha)/n when a parent reads a child.
enum class AdvanceSize {
  parent,  // n = n_v of the node doing the reading
  child,   // n = n_c of the child being read
};

/// Covariance of two distinct resampled values at a leaf.
enum class LeafCovariance {
  resampled,  // sigma_i^2 / n_i: two slots share an element with prob 1/n_i
  zero,       // two distinct elements of an i.i.d. sample
};

struct LeafMoments {
  double mean = 0.0;
  double variance = 0.0;
};

struct OptimizerConfig {
  CalcTree tree;
  std::vector<std::size_t> weights;  // a_v per node id
  std::size_t budget = 0;
  std::vector<LeafMoments> leaves;   // per sampled input
  AdvanceSize advance = AdvanceSize::parent;
  LeafCovariance leaf_covariance = LeafCovariance::resampled;
  std::size_t free_size_cap = 64;     // n_v bound when a_v = 0
  std::size_t table_cap = 50'000'000; // Bellman cells
};

/// Leaf moments from known laws.
std::vector<LeafMoments> moments_of(const std::vector<Distribution>& laws);

OptimizerConfig make_config(const CalcTree& tree, const std::vector<Distribution>& laws,
                            std::vector<std::size_t> weights, std::size_t budget);

/// Squared partial derivatives of phi_v at the child means.
std::vector<double> gradient_at_mean(const TreeNode& node, std::span<const double> child_means);

/// phi_v evaluated at child means, bottom-up; indexed by node id.
std::vector<double> node_means(const CalcTree& tree, const std::vector<LeafMoments>& leaves);

/// alpha + (1 - alpha)/n.
Rational advance(const Rational& alpha, std::size_t n);

/// alpha sigma^2 + (1 - alpha) cov.
double psi_leaf(double variance, double cov, double alpha);

/// psi_v(alpha) at a full allocation (one n per node id).
double psi_value(const OptimizerConfig& config, std::size_t node, const Rational& alpha,
                 std::span<const std::size_t> allocation);

/// The modelled estimator variance psi_root(0).
double allocation_variance(const OptimizerConfig& config, std::span<const std::size_t> allocation);

std::size_t allocation_cost(const OptimizerConfig& config, std::span<const std::size_t> allocation);

struct OptimizeResult {
  double variance = 0.0;
  std::vector<std::size_t> allocation;  // n_v per node id
  std::size_t cost = 0;
  std::size_t table_cells = 0;          // Bellman cells built (0 for the oracle)
  std::size_t alpha_values = 0;         // distinct (node, alpha) tables
};

/// Backward Bellman pass, forward recovery of the argmin. Ties go to the
/// lexicographically smallest allocation.
OptimizeResult bellman_optimize(const OptimizerConfig& config);

/// Every feasible allocation scored with allocation_variance; first strict
/// minimum in lexicographic order.
OptimizeResult exhaustive_optimize_oracle(const OptimizerConfig& config, std::size_t cap = 1'000'000);

}  // namespace resamplex

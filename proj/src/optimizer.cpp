#include "resamplex/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace resamplex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStep = 1e-4;

void check_config(const OptimizerConfig& c) {
  if (c.tree.known_arity() != 0) fail(ErrorKind::unsupported, "optimizer expects sampled inputs only");
  if (c.weights.size() != c.tree.size())
    fail(ErrorKind::arity_mismatch, "one weight per tree node expected (" + std::to_string(c.tree.size()) + ")");
  if (c.leaves.size() != c.tree.arity())
    fail(ErrorKind::arity_mismatch, "one (mean, variance) pair per input expected");
  for (const auto& l : c.leaves)
    if (!std::isfinite(l.mean) || !std::isfinite(l.variance) || l.variance < 0)
      fail(ErrorKind::invalid_argument, "leaf moments must be finite with non-negative variance");
  if (c.free_size_cap == 0) fail(ErrorKind::invalid_argument, "free size cap must be at least 1");
}

std::size_t min_cost(const OptimizerConfig& c) {
  std::size_t s = 0;
  for (auto a : c.weights) s += a;
  return s;
}

void check_feasible(const OptimizerConfig& c) {
  const auto need = min_cost(c);
  if (c.budget < need)
    fail(ErrorKind::infeasible, "budget " + std::to_string(c.budget) + " is below the minimum cost " +
                                    std::to_string(need) + " of giving every node one element");
}

std::vector<std::vector<double>> all_gradients(const OptimizerConfig& c) {
  const auto means = node_means(c.tree, c.leaves);
  std::vector<std::vector<double>> g(c.tree.size());
  for (const auto& v : c.tree.nodes()) {
    if (v.is_leaf()) continue;
    std::vector<double> mu;
    for (auto ch : v.children) mu.push_back(means[ch]);
    g[v.id] = gradient_at_mean(v, mu);
  }
  return g;
}

double leaf_cov(const OptimizerConfig& c, std::size_t input, std::size_t n) {
  if (c.leaf_covariance == LeafCovariance::zero) return 0.0;
  return c.leaves[input].variance / static_cast<double>(n);
}

double psi_rec(const OptimizerConfig& c, const std::vector<std::vector<double>>& g, std::size_t id,
               const Rational& alpha, std::span<const std::size_t> alloc) {
  const auto& v = c.tree.node(id);
  if (v.is_leaf()) {
    const double s2 = c.leaves[v.input].variance;
    return psi_leaf(s2, leaf_cov(c, v.input, alloc[id]), to_double(alpha));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < v.children.size(); ++i) {
    const auto ch = v.children[i];
    const std::size_t n = c.advance == AdvanceSize::parent ? alloc[id] : alloc[ch];
    const double term = g[id][i] == 0.0 ? 0.0 : g[id][i] * psi_rec(c, g, ch, advance(alpha, n), alloc);
    acc = i == 0 ? term : acc + term;
  }
  return acc;
}

struct Cell {
  double value = kInf;
  std::vector<std::size_t> alloc;  // subtree sizes, ids first_descendant(v)..v; empty = infeasible

  bool feasible() const { return !alloc.empty(); }
};

using Table = std::vector<Cell>;  // indexed by budget 0..b, best over cost <= z

bool better(double value, const std::vector<std::size_t>& alloc, const Cell& best) {
  if (!best.feasible()) return true;
  if (value != best.value) return value < best.value;
  return alloc < best.alloc;
}

class Bellman {
public:
  explicit Bellman(const OptimizerConfig& c) : c_(c), g_(all_gradients(c)), sub_cost_(c.tree.size(), 0) {
    for (const auto& v : c.tree.nodes()) {
      sub_cost_[v.id] = c.weights[v.id];
      for (auto ch : v.children) sub_cost_[v.id] += sub_cost_[ch];
    }
  }

  const Table& root_table() {
    const auto root = c_.tree.root_id();
    return table(root, Rational(0));
  }

  std::size_t cells() const { return cells_; }
  std::size_t tables() const { return tables_.size(); }

private:
  bool self_advance(std::size_t id) const {
    return c_.advance == AdvanceSize::child && id != c_.tree.root_id();
  }

  Rational children_arg(std::size_t id, const Rational& alpha, std::size_t n) const {
    if (c_.advance == AdvanceSize::child && id == c_.tree.root_id()) return alpha;
    return advance(alpha, n);
  }

  std::size_t max_size(std::size_t id, std::size_t budget_left) const {
    const auto a = c_.weights[id];
    if (a == 0) return c_.free_size_cap;
    return budget_left / a;
  }

  void count(std::size_t added) {
    cells_ += added;
    if (cells_ > c_.table_cap)
      fail(ErrorKind::cap_exceeded, "Bellman table exceeds " + std::to_string(c_.table_cap) +
                                        " cells; lower the budget or the free size cap");
  }

  // Best split of budget among the children of `id`, all read at `beta`.
  const Table& combined(std::size_t id, const Rational& beta) {
    auto key = std::make_pair(id, beta);
    if (auto it = combs_.find(key); it != combs_.end()) return it->second;
    const auto& v = c_.tree.node(id);
    const std::size_t b = c_.budget;
    Table acc;
    std::size_t acc_min = 0;
    for (std::size_t i = 0; i < v.children.size(); ++i) {
      const auto ch = v.children[i];
      const double gi = g_[id][i];
      Table child(b + 1);
      if (gi == 0.0) {
        // Value is irrelevant; the lexicographically smallest allocation is all ones.
        std::vector<std::size_t> ones(ch - c_.tree.first_descendant(ch) + 1, 1);
        for (std::size_t z = sub_cost_[ch]; z <= b; ++z) child[z] = {0.0, ones};
      } else {
        const Table& t = table(ch, beta);
        for (std::size_t z = 0; z <= b; ++z)
          if (t[z].feasible()) child[z] = {gi * t[z].value, t[z].alloc};
      }
      if (i == 0) {
        acc = std::move(child);
        acc_min = sub_cost_[ch];
        continue;
      }
      Table next(b + 1);
      for (std::size_t z = acc_min + sub_cost_[ch]; z <= b; ++z) {
        for (std::size_t zc = sub_cost_[ch]; zc + acc_min <= z; ++zc) {
          const Cell& left = acc[z - zc];
          const Cell& right = child[zc];
          if (!left.feasible() || !right.feasible()) continue;
          const double value = left.value + right.value;
          if (next[z].feasible() && value > next[z].value) continue;
          std::vector<std::size_t> alloc = left.alloc;
          alloc.insert(alloc.end(), right.alloc.begin(), right.alloc.end());
          if (better(value, alloc, next[z])) next[z] = {value, std::move(alloc)};
        }
      }
      acc = std::move(next);
      acc_min += sub_cost_[ch];
    }
    count(acc.size());
    return combs_.emplace(std::move(key), std::move(acc)).first->second;
  }

  const Table& table(std::size_t id, const Rational& alpha) {
    auto key = std::make_pair(id, alpha);
    if (auto it = tables_.find(key); it != tables_.end()) return it->second;
    const auto& v = c_.tree.node(id);
    const std::size_t b = c_.budget;
    const std::size_t a = c_.weights[id];
    const std::size_t below = sub_cost_[id] - a;
    Table out(b + 1);
    if (b >= sub_cost_[id]) {
      const std::size_t n_max = max_size(id, b - below);
      for (std::size_t n = 1; n <= n_max; ++n) {
        const std::size_t own = a * n;
        if (v.is_leaf()) {
          const double s2 = c_.leaves[v.input].variance;
          const Rational arg = self_advance(id) ? advance(alpha, n) : alpha;
          const double value = psi_leaf(s2, leaf_cov(c_, v.input, n), to_double(arg));
          const std::vector<std::size_t> alloc{n};
          for (std::size_t z = own; z <= b; ++z)
            if (better(value, alloc, out[z])) out[z] = {value, alloc};
          continue;
        }
        const Table& comb = combined(id, children_arg(id, alpha, n));
        for (std::size_t z = own + below; z <= b; ++z) {
          const Cell& sub = comb[z - own];
          if (!sub.feasible()) continue;
          if (out[z].feasible() && sub.value > out[z].value) continue;
          std::vector<std::size_t> alloc = sub.alloc;
          alloc.push_back(n);
          if (better(sub.value, alloc, out[z])) out[z] = {sub.value, std::move(alloc)};
        }
      }
    }
    count(out.size());
    return tables_.emplace(std::move(key), std::move(out)).first->second;
  }

  const OptimizerConfig& c_;
  std::vector<std::vector<double>> g_;
  std::vector<std::size_t> sub_cost_;
  std::map<std::pair<std::size_t, Rational>, Table> tables_;
  std::map<std::pair<std::size_t, Rational>, Table> combs_;
  std::size_t cells_ = 0;
};

}  // namespace

std::vector<LeafMoments> moments_of(const std::vector<Distribution>& laws) {
  std::vector<LeafMoments> out;
  for (const auto& l : laws) out.push_back({l.mean(), l.variance()});
  return out;
}

OptimizerConfig make_config(const CalcTree& tree, const std::vector<Distribution>& laws,
                            std::vector<std::size_t> weights, std::size_t budget) {
  OptimizerConfig c{tree, std::move(weights), budget, moments_of(laws)};
  check_config(c);
  return c;
}

std::vector<double> gradient_at_mean(const TreeNode& node, std::span<const double> mu) {
  if (node.is_leaf()) return {};
  if (mu.size() != node.children.size())
    fail(ErrorKind::arity_mismatch, "one mean per child expected at node " + std::to_string(node.id));
  for (double m : mu)
    if (!std::isfinite(m)) fail(ErrorKind::invalid_argument, "child means must be finite");
  const std::size_t k = mu.size();
  std::vector<double> g(k, 0.0);
  switch (node.kind) {
    case NodeKind::sum:
      std::fill(g.begin(), g.end(), 1.0);
      break;
    case NodeKind::max:
    case NodeKind::min: {
      const double target = node.kind == NodeKind::max ? *std::max_element(mu.begin(), mu.end())
                                                       : *std::min_element(mu.begin(), mu.end());
      const auto tied = static_cast<double>(std::count(mu.begin(), mu.end(), target));
      for (std::size_t i = 0; i < k; ++i)
        if (mu[i] == target) g[i] = 1.0 / tied;
      break;
    }
    default: {
      // Step functions: central differences, a heuristic slope.
      std::vector<double> x(mu.begin(), mu.end());
      for (std::size_t i = 0; i < k; ++i) {
        x[i] = mu[i] + kStep;
        const double up = CalcTree::apply<double>(node, std::span<const double>(x));
        x[i] = mu[i] - kStep;
        const double down = CalcTree::apply<double>(node, std::span<const double>(x));
        x[i] = mu[i];
        const double d = (up - down) / (2.0 * kStep);
        g[i] = d * d;
      }
    }
  }
  return g;
}

std::vector<double> node_means(const CalcTree& tree, const std::vector<LeafMoments>& leaves) {
  if (leaves.size() != tree.arity()) fail(ErrorKind::arity_mismatch, "one mean per input expected");
  std::vector<double> m(tree.size());
  for (const auto& v : tree.nodes()) {
    if (v.is_leaf()) {
      m[v.id] = leaves[v.input].mean;
      continue;
    }
    std::vector<double> kids;
    for (auto c : v.children) kids.push_back(m[c]);
    m[v.id] = CalcTree::apply<double>(v, std::span<const double>(kids));
  }
  return m;
}

Rational advance(const Rational& alpha, std::size_t n) {
  if (n == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
  return alpha + (Rational(1) - alpha) / Rational(static_cast<long long>(n));
}

double psi_leaf(double variance, double cov, double alpha) { return alpha * variance + (1.0 - alpha) * cov; }

double psi_value(const OptimizerConfig& config, std::size_t node, const Rational& alpha,
                 std::span<const std::size_t> allocation) {
  check_config(config);
  if (allocation.size() != config.tree.size()) fail(ErrorKind::arity_mismatch, "one size per node expected");
  if (alpha < 0 || alpha > 1) fail(ErrorKind::invalid_argument, "alpha must lie in [0, 1]");
  for (auto n : allocation)
    if (n == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
  return psi_rec(config, all_gradients(config), node, alpha, allocation);
}

double allocation_variance(const OptimizerConfig& config, std::span<const std::size_t> allocation) {
  return psi_value(config, config.tree.root_id(), Rational(0), allocation);
}

std::size_t allocation_cost(const OptimizerConfig& config, std::span<const std::size_t> allocation) {
  std::size_t s = 0;
  for (std::size_t v = 0; v < allocation.size(); ++v) s += config.weights.at(v) * allocation[v];
  return s;
}

OptimizeResult bellman_optimize(const OptimizerConfig& config) {
  check_config(config);
  check_feasible(config);
  Bellman dp(config);
  const Cell& best = dp.root_table()[config.budget];
  if (!best.feasible()) fail(ErrorKind::infeasible, "no feasible allocation within the budget");
  OptimizeResult out;
  out.variance = best.value;
  out.allocation = best.alloc;
  out.cost = allocation_cost(config, out.allocation);
  out.table_cells = dp.cells();
  out.alpha_values = dp.tables();
  return out;
}

OptimizeResult exhaustive_optimize_oracle(const OptimizerConfig& config, std::size_t cap) {
  check_config(config);
  check_feasible(config);
  const auto g = all_gradients(config);
  const std::size_t m = config.tree.size();
  std::vector<std::size_t> rest_min(m + 1, 0);  // min cost of nodes v..m-1
  for (std::size_t v = m; v-- > 0;) rest_min[v] = rest_min[v + 1] + config.weights[v];

  OptimizeResult best;
  best.variance = kInf;
  std::vector<std::size_t> alloc(m, 1);
  std::size_t visited = 0;
  auto visit = [&](auto&& self, std::size_t v, std::size_t spent) -> void {
    if (v == m) {
      if (++visited > cap)
        fail(ErrorKind::cap_exceeded, "more than " + std::to_string(cap) + " feasible allocations");
      const double d = psi_rec(config, g, config.tree.root_id(), Rational(0), alloc);
      if (best.allocation.empty() || d < best.variance) {
        best.variance = d;
        best.allocation = alloc;
      }
      return;
    }
    const auto a = config.weights[v];
    const std::size_t left = config.budget - spent - rest_min[v + 1];
    const std::size_t hi = a == 0 ? config.free_size_cap : left / a;
    for (std::size_t n = 1; n <= hi; ++n) {
      alloc[v] = n;
      self(self, v + 1, spent + a * n);
    }
  };
  visit(visit, 0, 0);
  best.cost = allocation_cost(config, best.allocation);
  return best;
}

}  // namespace resamplex

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resamplex/error.hpp"

namespace resamplex {

enum class NodeKind { leaf, sum, max, min, k_of_n, indicator_less, indicator_greater };

/// Leaves read either a sampled input (x, unknown law) or a known-law input (z).
enum class InputKind { sampled, known };

struct TreeNode {
  std::size_t id = 0;
  NodeKind kind = NodeKind::leaf;
  InputKind input_kind = InputKind::sampled;
  std::size_t input = 0;  // zero-based among inputs of the same kind
  std::vector<std::size_t> children;
  std::size_t k = 0;
  double threshold = 0.0;
  std::size_t size = 1;  // n_v: sample size built (internal) or observed (leaf)

  bool is_leaf() const { return kind == NodeKind::leaf; }
};

const char* to_string(NodeKind kind) noexcept;

/// The function phi as a tree of catalog subfunctions. Node ids follow
/// post-order (every child id is smaller than its parent), the root is last,
/// and a subtree occupies the contiguous id range [first_descendant(v), v].
class CalcTree {
public:
  /// Parses e.g. "max(max(x1,x2), min(x3,x4), sum(x5,x6))",
  /// "kofn[k=2,t=1.5](x1,x2,x3)", "lt[t=4](sum[n=10](x1[n=3],z1))".
  static CalcTree parse(std::string_view text);
  /// Validates nodes already laid out in post-order.
  static CalcTree from_nodes(std::vector<TreeNode> nodes);

  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t root_id() const { return nodes_.size() - 1; }
  const TreeNode& root() const { return nodes_.back(); }

  std::size_t arity() const { return sampled_leaf_.size(); }
  std::size_t known_arity() const { return known_leaf_.size(); }
  std::size_t leaf_of(std::size_t input, InputKind kind = InputKind::sampled) const;

  std::size_t first_descendant(std::size_t id) const { return first_.at(id); }
  /// All strict descendants of `id` (the set B_v).
  std::vector<std::size_t> descendants(std::size_t id) const;
  std::size_t depth() const;

  CalcTree with_size(std::size_t id, std::size_t n) const;
  CalcTree with_internal_sizes(std::size_t n) const;
  CalcTree with_leaf_sizes(std::span<const std::size_t> sizes) const;
  /// Sizes of all nodes in id order.
  std::vector<std::size_t> sizes() const;
  CalcTree with_sizes(std::span<const std::size_t> sizes) const;
  /// A new root `kind`(t) over the current root.
  CalcTree wrapped(NodeKind indicator, double threshold) const;

  std::string to_string() const;

  /// phi(x, z). `scratch` needs size() slots.
  template <class T>
  T eval(std::span<const T> x, std::span<const T> z, std::span<T> scratch) const;
  template <class T>
  T eval(std::span<const T> x, std::span<const T> z = {}) const {
    std::vector<T> scratch(nodes_.size());
    return eval<T>(x, z, std::span<T>(scratch));
  }
  double eval(const std::vector<double>& x) const { return eval<double>(std::span<const double>(x)); }

  /// phi_v applied to explicit child values.
  template <class T>
  static T apply(const TreeNode& node, std::span<const T> child_values);

private:
  void index();

  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> sampled_leaf_;
  std::vector<std::size_t> known_leaf_;
};

namespace detail {

template <class T>
bool exceeds(const T& v, double t) {
  if (std::isinf(t)) return t < 0;
  return v > T(t);
}

template <class T>
bool below(const T& v, double t) {
  if (std::isinf(t)) return t > 0;
  return v < T(t);
}

}  // namespace detail

template <class T>
T CalcTree::apply(const TreeNode& node, std::span<const T> v) {
  switch (node.kind) {
    case NodeKind::leaf:
      return v[0];
    case NodeKind::sum: {
      T acc = v[0];
      for (std::size_t i = 1; i < v.size(); ++i) acc += v[i];
      return acc;
    }
    case NodeKind::max: {
      T acc = v[0];
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > acc) acc = v[i];
      return acc;
    }
    case NodeKind::min: {
      T acc = v[0];
      for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < acc) acc = v[i];
      return acc;
    }
    case NodeKind::k_of_n: {
      std::size_t above = 0;
      for (const auto& x : v)
        if (detail::exceeds(x, node.threshold)) ++above;
      return above >= node.k ? T(1) : T(0);
    }
    case NodeKind::indicator_less:
      return detail::below(v[0], node.threshold) ? T(1) : T(0);
    case NodeKind::indicator_greater:
      return detail::exceeds(v[0], node.threshold) ? T(1) : T(0);
  }
  return T(0);
}

template <class T>
T CalcTree::eval(std::span<const T> x, std::span<const T> z, std::span<T> scratch) const {
  if (x.size() != arity() || z.size() != known_arity())
    fail(ErrorKind::arity_mismatch, "tree expects " + std::to_string(arity()) + " sampled and " +
                                        std::to_string(known_arity()) + " known inputs");
  T child_buf[16];
  std::vector<T> wide;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) {
      scratch[n.id] = n.input_kind == InputKind::sampled ? x[n.input] : z[n.input];
      continue;
    }
    std::span<T> vals;
    if (n.children.size() <= 16) {
      vals = std::span<T>(child_buf, n.children.size());
    } else {
      wide.resize(n.children.size());
      vals = std::span<T>(wide);
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) vals[i] = scratch[n.children[i]];
    scratch[n.id] = apply<T>(n, std::span<const T>(vals.data(), vals.size()));
  }
  return scratch[root_id()];
}

}  // namespace resamplex

#include "resamplex/tree.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>

#include "text.hpp"

namespace resamplex {

const char* to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::leaf: return "leaf";
    case NodeKind::sum: return "sum";
    case NodeKind::max: return "max";
    case NodeKind::min: return "min";
    case NodeKind::k_of_n: return "kofn";
    case NodeKind::indicator_less: return "lt";
    case NodeKind::indicator_greater: return "gt";
  }
  return "?";
}

namespace {

struct Parsed {
  std::string name;
  std::map<std::string, std::string> params;
  std::vector<std::string> args;
};

Parsed split_call(std::string_view text) {
  Parsed p;
  const std::string s = detail::trim(text);
  std::size_t i = 0;
  while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
  p.name = s.substr(0, i);
  if (p.name.empty()) fail(ErrorKind::parse, "expected a node name in '" + s + "'");
  if (i < s.size() && s[i] == '[') {
    const auto close = s.find(']', i);
    if (close == std::string::npos) fail(ErrorKind::parse, "unclosed '[' in '" + s + "'");
    for (const auto& kv : detail::split(std::string_view(s).substr(i + 1, close - i - 1), ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorKind::parse, "parameter '" + kv + "' is not key=value");
      p.params[detail::trim(kv.substr(0, eq))] = detail::trim(kv.substr(eq + 1));
    }
    i = close + 1;
  }
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i < s.size()) {
    if (s[i] != '(' || s.back() != ')') fail(ErrorKind::parse, "malformed node '" + s + "'");
    p.args = detail::split(std::string_view(s).substr(i + 1, s.size() - i - 2), ',');
    if (p.args.empty() || std::any_of(p.args.begin(), p.args.end(), [](const auto& a) { return a.empty(); }))
      fail(ErrorKind::invalid_argument, "node '" + p.name + "' has an empty child list");
  }
  return p;
}

bool is_input_name(const std::string& name) {
  return name.size() >= 2 && (name[0] == 'x' || name[0] == 'z') &&
         std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::size_t build(std::string_view text, std::vector<TreeNode>& out) {
  Parsed p = split_call(text);
  if (p.name == "leaf") {
    if (p.args.size() != 1 || !p.params.empty()) fail(ErrorKind::parse, "leaf(...) wraps exactly one input");
    return build(p.args[0], out);
  }
  TreeNode node;
  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = p.params.find(key);
    if (it == p.params.end()) return std::nullopt;
    std::string v = it->second;
    p.params.erase(it);
    return v;
  };
  if (auto n = take("n")) node.size = detail::parse_size(*n);

  if (is_input_name(p.name)) {
    if (!p.args.empty()) fail(ErrorKind::invalid_argument, "leaf '" + p.name + "' cannot have children");
    const std::size_t index = detail::parse_size(p.name.substr(1));
    if (index == 0) fail(ErrorKind::invalid_argument, "input indices start at 1");
    node.kind = NodeKind::leaf;
    node.input_kind = p.name[0] == 'x' ? InputKind::sampled : InputKind::known;
    node.input = index - 1;
  } else {
    if (p.name == "sum") node.kind = NodeKind::sum;
    else if (p.name == "max") node.kind = NodeKind::max;
    else if (p.name == "min") node.kind = NodeKind::min;
    else if (p.name == "kofn" || p.name == "k_of_n") node.kind = NodeKind::k_of_n;
    else if (p.name == "lt" || p.name == "indicator_less") node.kind = NodeKind::indicator_less;
    else if (p.name == "gt" || p.name == "indicator_greater") node.kind = NodeKind::indicator_greater;
    else fail(ErrorKind::parse, "unknown node kind '" + p.name + "'");
    if (p.args.empty()) fail(ErrorKind::invalid_argument, "node '" + p.name + "' needs children");
    if (node.kind == NodeKind::k_of_n || node.kind == NodeKind::indicator_less ||
        node.kind == NodeKind::indicator_greater) {
      auto t = take("t");
      if (!t) fail(ErrorKind::invalid_argument, "node '" + p.name + "' needs a threshold t");
      node.threshold = detail::parse_double(*t);
    }
    if (node.kind == NodeKind::k_of_n) {
      auto k = take("k");
      if (!k) fail(ErrorKind::invalid_argument, "kofn needs k");
      node.k = detail::parse_size(*k);
    }
    for (const auto& a : p.args) node.children.push_back(build(a, out));
  }
  if (!p.params.empty())
    fail(ErrorKind::parse, "unknown parameter '" + p.params.begin()->first + "' on '" + p.name + "'");
  node.id = out.size();
  out.push_back(std::move(node));
  return out.back().id;
}

}  // namespace

CalcTree CalcTree::parse(std::string_view text) {
  std::vector<TreeNode> nodes;
  build(text, nodes);
  return from_nodes(std::move(nodes));
}

CalcTree CalcTree::from_nodes(std::vector<TreeNode> nodes) {
  if (nodes.empty()) fail(ErrorKind::invalid_argument, "empty tree");
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    auto& n = nodes[id];
    if (n.id != id) fail(ErrorKind::invalid_argument, "node ids must equal their positions");
    if (n.size == 0) fail(ErrorKind::invalid_argument, "sample sizes must be at least 1");
    if (n.is_leaf()) {
      if (!n.children.empty()) fail(ErrorKind::invalid_argument, "leaves have no children");
      continue;
    }
    if (n.children.empty()) fail(ErrorKind::invalid_argument, "internal nodes need children");
    for (auto c : n.children) {
      if (c >= id) fail(ErrorKind::invalid_argument, "children must precede their parent (post-order)");
      if (++parents[c] > 1) fail(ErrorKind::invalid_argument, "node has two parents");
    }
    if (std::isnan(n.threshold)) fail(ErrorKind::invalid_argument, "threshold is NaN");
    if (n.kind == NodeKind::k_of_n && (n.k < 1 || n.k > n.children.size()))
      fail(ErrorKind::invalid_argument, "kofn requires 1 <= k <= number of children");
    if ((n.kind == NodeKind::indicator_less || n.kind == NodeKind::indicator_greater) && n.children.size() != 1)
      fail(ErrorKind::invalid_argument, "indicator nodes take exactly one child");
  }
  for (std::size_t id = 0; id + 1 < nodes.size(); ++id)
    if (parents[id] == 0) fail(ErrorKind::invalid_argument, "node " + std::to_string(id) + " is detached from the root");

  CalcTree tree;
  tree.nodes_ = std::move(nodes);
  tree.index();
  return tree;
}

void CalcTree::index() {
  std::map<std::size_t, std::size_t> sampled, known;
  for (const auto& n : nodes_) {
    if (!n.is_leaf()) continue;
    auto& target = n.input_kind == InputKind::sampled ? sampled : known;
    const char prefix = n.input_kind == InputKind::sampled ? 'x' : 'z';
    if (!target.emplace(n.input, n.id).second)
      fail(ErrorKind::duplicate_leaf, std::string("input ") + prefix + std::to_string(n.input + 1) + " is used twice");
  }
  auto dense = [](const std::map<std::size_t, std::size_t>& m, char prefix) {
    std::vector<std::size_t> out;
    std::size_t expect = 0;
    for (const auto& [input, id] : m) {
      if (input != expect)
        fail(ErrorKind::missing_leaf, std::string("input ") + prefix + std::to_string(expect + 1) + " is missing");
      out.push_back(id);
      ++expect;
    }
    return out;
  };
  sampled_leaf_ = dense(sampled, 'x');
  known_leaf_ = dense(known, 'z');

  first_.assign(nodes_.size(), 0);
  for (const auto& n : nodes_) first_[n.id] = n.is_leaf() ? n.id : first_[n.children.front()];
  for (const auto& n : nodes_)
    for (auto c : n.children) first_[n.id] = std::min(first_[n.id], first_[c]);
}

std::size_t CalcTree::leaf_of(std::size_t input, InputKind kind) const {
  const auto& v = kind == InputKind::sampled ? sampled_leaf_ : known_leaf_;
  if (input >= v.size()) fail(ErrorKind::arity_mismatch, "no such input");
  return v[input];
}

std::vector<std::size_t> CalcTree::descendants(std::size_t id) const {
  std::vector<std::size_t> out;
  for (std::size_t d = first_.at(id); d < id; ++d) out.push_back(d);
  return out;
}

std::size_t CalcTree::depth() const {
  std::vector<std::size_t> h(nodes_.size(), 0);
  for (const auto& n : nodes_)
    for (auto c : n.children) h[n.id] = std::max(h[n.id], h[c] + 1);
  return h[root_id()];
}

CalcTree CalcTree::with_size(std::size_t id, std::size_t n) const {
  auto nodes = nodes_;
  nodes.at(id).size = n;
  return from_nodes(std::move(nodes));
}

CalcTree CalcTree::with_internal_sizes(std::size_t n) const {
  auto nodes = nodes_;
  for (auto& node : nodes)
    if (!node.is_leaf()) node.size = n;
  return from_nodes(std::move(nodes));
}

CalcTree CalcTree::with_leaf_sizes(std::span<const std::size_t> sizes) const {
  if (sizes.size() != arity()) fail(ErrorKind::arity_mismatch, "one size per sampled input expected");
  auto nodes = nodes_;
  for (std::size_t i = 0; i < sizes.size(); ++i) nodes[sampled_leaf_[i]].size = sizes[i];
  return from_nodes(std::move(nodes));
}

std::vector<std::size_t> CalcTree::sizes() const {
  std::vector<std::size_t> out;
  for (const auto& n : nodes_) out.push_back(n.size);
  return out;
}

CalcTree CalcTree::with_sizes(std::span<const std::size_t> sizes) const {
  if (sizes.size() != nodes_.size()) fail(ErrorKind::arity_mismatch, "one size per node expected");
  auto nodes = nodes_;
  for (std::size_t i = 0; i < sizes.size(); ++i) nodes[i].size = sizes[i];
  return from_nodes(std::move(nodes));
}

CalcTree CalcTree::wrapped(NodeKind indicator, double threshold) const {
  auto nodes = nodes_;
  TreeNode top;
  top.id = nodes.size();
  top.kind = indicator;
  top.threshold = threshold;
  top.children = {root_id()};
  if (indicator == NodeKind::k_of_n) top.k = 1;
  nodes.push_back(top);
  return from_nodes(std::move(nodes));
}

std::string CalcTree::to_string() const {
  std::vector<std::string> text(nodes_.size());
  for (const auto& n : nodes_) {
    std::ostringstream os;
    std::vector<std::string> params;
    if (n.kind == NodeKind::k_of_n) params.push_back("k=" + std::to_string(n.k));
    if (n.kind == NodeKind::k_of_n || n.kind == NodeKind::indicator_less || n.kind == NodeKind::indicator_greater)
      params.push_back("t=" + detail::format_double(n.threshold));
    if (n.size != 1) params.push_back("n=" + std::to_string(n.size));
    if (n.is_leaf())
      os << (n.input_kind == InputKind::sampled ? 'x' : 'z') << n.input + 1;
    else
      os << resamplex::to_string(n.kind);
    if (!params.empty()) {
      os << '[';
      for (std::size_t i = 0; i < params.size(); ++i) os << (i ? "," : "") << params[i];
      os << ']';
    }
    if (!n.is_leaf()) {
      os << '(';
      for (std::size_t i = 0; i < n.children.size(); ++i) os << (i ? "," : "") << text[n.children[i]];
      os << ')';
    }
    text[n.id] = os.str();
  }
  return text.back();
}

}  // namespace resamplex

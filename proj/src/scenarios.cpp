#include "resamplex/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace resamplex {

namespace {

std::vector<Distribution> uniforms(std::size_t m) { return std::vector<Distribution>(m, Distribution::uniform(0.0, 1.0)); }

std::vector<Distribution> exponentials(std::initializer_list<double> rates) {
  std::vector<Distribution> out;
  for (double r : rates) out.push_back(Distribution::exponential(r));
  return out;
}

// Rates of the query example, one per subquery.
constexpr double kRates[] = {0.1, 0.7, 0.2, 0.4, 0.8, 0.5};

Scenario point_tree(std::string name, std::string doc, std::string_view tree, std::size_t m) {
  Scenario s;
  s.name = std::move(name);
  s.doc = std::move(doc);
  s.tree = CalcTree::parse(tree);
  s.laws = uniforms(m);
  s.sizes.assign(m, 10);
  return s;
}

using Factory = std::function<Scenario()>;

const std::map<std::string, Factory, std::less<>>& catalog() {
  static const std::map<std::string, Factory, std::less<>> c{
      {"reaction-time",
       [] {
         auto s = point_tree("reaction-time", "[point] mean reaction time of an information system, one input", "x1", 1);
         s.r = 50;
         return s;
       }},
      {"sequential",
       [] { return point_tree("sequential", "[point] sequential stages: phi = x1 + x2 + x3", "sum(x1,x2,x3)", 3); }},
      {"parallel",
       [] { return point_tree("parallel", "[point] parallel stages: phi = max(x1, x2, x3)", "max(x1,x2,x3)", 3); }},
      {"two-of-three",
       [] {
         auto s = point_tree("two-of-three", "[point] at least 2 of 3 devices work past t", "kofn[k=2,t=0.5](x1,x2,x3)", 3);
         s.t = 0.5;
         s.t_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
         return s;
       }},
      {"hier-query",
       [] {
         Scenario s;
         s.name = "hier-query";
         s.doc = "[hierarchical] query time max(max(x1,x2), min(x3,x4), x5+x6); with t, P{time < t}";
         s.tree = CalcTree::parse("max(max(x1,x2),min(x3,x4),sum(x5,x6))");
         s.laws = exponentials({kRates[0], kRates[1], kRates[2], kRates[3], kRates[4], kRates[5]});
         s.sizes.assign(6, 10);
         s.t_grid = {5, 10, 15, 20, 30};
         return s;
       }},
      {"block-query",
       [] {
         Scenario s;
         s.name = "block-query";
         s.doc = "[hierarchical] subqueries in blocks: R(t) = prod_i (1 - F_i(t)^l_i), l = (2,3,2)";
         s.kind = ScenarioKind::blocks;
         s.laws = exponentials({kRates[0], kRates[1], kRates[2]});
         s.sizes.assign(3, 10);
         s.multiplicity = {2, 3, 2};
         s.t = 2.0;
         s.t_grid = {0.5, 1, 2, 4, 8};
         return s;
       }},
      {"hier-query-partial",
       [] {
         Scenario s;
         s.name = "hier-query-partial";
         s.doc = "[partial] P{min(max(x1,z1), x2, z2, x3+z3) > t} with z laws known";
         s.kind = ScenarioKind::partial;
         s.tree = CalcTree::parse("gt[t=1](min(max(x1,z1),x2,z2,sum(x3,z3)))");
         s.laws = exponentials({kRates[0], kRates[2], kRates[4]});
         s.known = exponentials({kRates[1], kRates[3], kRates[5]});
         s.sizes.assign(3, 10);
         s.t = 1.0;
         s.t_grid = {0.25, 0.5, 1, 2, 4};
         return s;
       }},
      {"min-selection",
       [] {
         Scenario s;
         s.name = "min-selection";
         s.doc = "[interval] probability that x_m is below every other input (correct selection)";
         s.kind = ScenarioKind::coverage;
         s.laws = uniforms(3);
         s.sizes = {3, 3, 3};
         s.functional = RankFunctional::min_selection;
         s.r = 10;
         return s;
       }},
      {"ordering",
       [] {
         Scenario s;
         s.name = "ordering";
         s.doc = "[interval] probability that x1 < x2 < ... < xm (correct ordering)";
         s.kind = ScenarioKind::coverage;
         s.laws = uniforms(3);
         s.sizes = {3, 3, 3};
         s.functional = RankFunctional::ordering;
         s.r = 10;
         return s;
       }},
  };
  return c;
}

}  // namespace

const char* to_string(ScenarioKind kind) noexcept {
  switch (kind) {
    case ScenarioKind::tree: return "tree";
    case ScenarioKind::blocks: return "blocks";
    case ScenarioKind::partial: return "partial";
    case ScenarioKind::coverage: return "coverage";
  }
  return "?";
}

std::vector<ScenarioInfo> list_scenarios() {
  std::vector<ScenarioInfo> out;
  for (const auto& [name, make] : catalog()) out.push_back({name, make().doc});
  return out;
}

Scenario load_scenario(std::string_view name) {
  const auto& c = catalog();
  if (auto it = c.find(name); it != c.end()) return it->second();
  std::string names;
  for (const auto& [n, make] : c) names += (names.empty() ? "" : ", ") + n;
  fail(ErrorKind::unknown_scenario, "unknown scenario '" + std::string(name) + "'; valid names: " + names);
}

CalcTree with_threshold(const CalcTree& tree, double t) {
  const auto kind = tree.root().kind;
  if (kind == NodeKind::k_of_n || kind == NodeKind::indicator_less || kind == NodeKind::indicator_greater) {
    auto nodes = tree.nodes();
    nodes.back().threshold = t;
    return CalcTree::from_nodes(std::move(nodes));
  }
  return tree.wrapped(NodeKind::indicator_less, t);
}

bool rank_event(RankFunctional f, std::span<const double> x) {
  const std::size_t m = x.size();
  if (f == RankFunctional::min_selection) {
    for (std::size_t i = 0; i + 1 < m; ++i)
      if (!(x[m - 1] < x[i])) return false;
    return true;
  }
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (!(x[i] < x[i + 1])) return false;
  return true;
}

}  // namespace resamplex

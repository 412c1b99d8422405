#include <catch_amalgamated.hpp>

#include <random>

#include "resamplex/optimizer.hpp"
#include "resamplex/scenarios.hpp"
#include "resamplex/variance.hpp"
#include "support.hpp"

using namespace resamplex;
using namespace testing;
using Catch::Approx;

namespace {

// Every allocation with n_v >= 1 and cost <= budget, unit weights.
void for_each_allocation(std::size_t nodes, std::size_t budget, auto&& fn) {
  std::vector<std::size_t> a(nodes, 1);
  while (true) {
    std::size_t cost = 0;
    for (auto v : a) cost += v;
    if (cost <= budget) fn(a);
    std::size_t i = 0;
    while (i < nodes) {
      ++a[i];
      std::size_t c = 0;
      for (auto v : a) c += v;
      if (c <= budget) break;
      a[i] = 1;
      ++i;
    }
    if (i == nodes) return;
  }
}

const std::vector<std::string>& small_trees() {
  static const std::vector<std::string> trees{
      "x1",           "sum(x1)",        "max(x1)",        "sum(x1,x2)",        "max(x1,x2)",
      "min(x1,x2)",   "sum(x1,x2,x3)",  "max(x1,x2,x3)",  "sum(sum(x1),x2)",   "max(sum(x1),x2)",
      "min(x1,max(x2))", "sum(max(x1,x2))", "sum(sum(sum(x1)))", "kofn[k=1,t=1](x1,x2,x3)"};
  return trees;
}

}  // namespace

TEST_CASE("gradients at the mean") {
  TreeNode sum{.kind = NodeKind::sum, .children = {0, 1, 2}};
  CHECK(gradient_at_mean(sum, std::vector<double>{4, -1, 7}) == std::vector<double>{1, 1, 1});
  TreeNode mx{.kind = NodeKind::max, .children = {0, 1}};
  CHECK(gradient_at_mean(mx, std::vector<double>{1, 3}) == std::vector<double>{0, 1});
  TreeNode mn{.kind = NodeKind::min, .children = {0, 1}};
  CHECK(gradient_at_mean(mn, std::vector<double>{2, 2}) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("psi building blocks") {
  CHECK(psi_leaf(4.0, 0.0, 1.0) == 4.0);
  CHECK(psi_leaf(4.0, 1.0, 0.5) == 2.5);
  CHECK(advance(Rational(0), 2) == Rational(1, 2));
  CHECK(advance(Rational(1, 2), 3) == Rational(2, 3));

  auto config = make_config(CalcTree::parse("sum(x1,x2)"), {two_point(0, 2), two_point(0, 4)}, {1, 1, 1}, 10);
  config.advance = AdvanceSize::child;
  config.leaf_covariance = LeafCovariance::zero;
  CHECK(psi_value(config, 2, Rational(0), std::vector<std::size_t>{2, 2, 5}) == Approx(2.5));
}

TEST_CASE("single leaf under an identity root") {
  const auto tree = CalcTree::parse("sum(x1)");
  const std::vector<Distribution> laws{two_point(0, 4)};
  const auto config = make_config(tree, laws, {1, 1}, 4);
  const auto best = bellman_optimize(config);
  CHECK(best.allocation == std::vector<std::size_t>{2, 2});
  CHECK(best.cost == 4);
  CHECK(best.variance == Approx(3.0));
  CHECK(best.variance == Approx(to_double(hierarchical_variance_exact(tree.with_sizes(best.allocation), laws))));
  const auto oracle = exhaustive_optimize_oracle(config);
  CHECK(oracle.allocation == best.allocation);
  CHECK(oracle.variance == best.variance);
}

TEST_CASE("three-leaf sum tree") {
  const auto tree = CalcTree::parse("sum(x1,x2,x3)");
  const std::vector<Distribution> laws{two_point(0, 2), two_point(0, 4), two_point(0, 6)};
  const auto config = make_config(tree, laws, {1, 1, 1, 1}, 12);
  const auto best = bellman_optimize(config);
  const auto oracle = exhaustive_optimize_oracle(config);
  CHECK(best.allocation == oracle.allocation);
  CHECK(best.variance == oracle.variance);
  CHECK(best.allocation[0] <= best.allocation[1]);
  CHECK(best.allocation[1] <= best.allocation[2]);
  CHECK(best.cost <= 12);
}

TEST_CASE("budget edge cases") {
  const auto tree = CalcTree::parse("max(x1,sum(x2,x3))");
  const std::vector<Distribution> laws{two_point(0, 2), two_point(1, 2), two_point(0, 3)};
  CHECK_THROWS_AS(bellman_optimize(make_config(tree, laws, {1, 1, 1, 1, 1}, 4)), Error);
  const auto tight = bellman_optimize(make_config(tree, laws, {1, 1, 1, 1, 1}, 5));
  CHECK(tight.allocation == std::vector<std::size_t>(5, 1));
  const auto weighted = bellman_optimize(make_config(tree, laws, {2, 1, 3, 1, 1}, 8));
  CHECK(weighted.allocation == std::vector<std::size_t>(5, 1));

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t b = 5; b <= 30; ++b) {
    const auto r = bellman_optimize(make_config(tree, laws, {1, 1, 1, 1, 1}, b));
    CHECK(r.variance <= previous);
    CHECK(r.cost <= b);
    CHECK(allocation_cost(make_config(tree, laws, {1, 1, 1, 1, 1}, b), r.allocation) == r.cost);
    previous = r.variance;
  }
}

TEST_CASE("zero-cost nodes are capped") {
  const auto tree = CalcTree::parse("sum(x1,x2)");
  auto config = make_config(tree, {two_point(0, 2), two_point(0, 2)}, {1, 1, 0}, 6);
  config.free_size_cap = 9;
  const auto best = bellman_optimize(config);
  CHECK(best.allocation[2] == 9);
  CHECK(best.allocation == exhaustive_optimize_oracle(config).allocation);
}

TEST_CASE("Bellman pass equals exhaustive search on small trees") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> spread(0.5, 4.0);
  for (const auto& text : small_trees()) {
    const auto tree = CalcTree::parse(text);
    for (int trial = 0; trial < 2; ++trial) {
      std::vector<Distribution> laws;
      for (std::size_t i = 0; i < tree.arity(); ++i) laws.push_back(two_point(spread(rng), spread(rng) + 4.0));
      for (std::size_t b = tree.size(); b <= 15; ++b) {
        for (auto advance : {AdvanceSize::parent, AdvanceSize::child}) {
          auto config = make_config(tree, laws, std::vector<std::size_t>(tree.size(), 1), b);
          config.advance = advance;
          const auto dp = bellman_optimize(config);
          const auto ex = exhaustive_optimize_oracle(config);
          INFO(text << " b=" << b);
          CHECK(dp.variance == ex.variance);
          CHECK(dp.allocation == ex.allocation);
        }
      }
    }
  }
}

TEST_CASE("default objective is the exact variance on sum trees") {
  const std::vector<Distribution> laws{two_point(0, 2), Distribution::discrete({0, 1, 5}, {0.2, 0.5, 0.3}),
                                       two_point(-1, 3)};
  for (const char* text : {"sum(x1)", "sum(x1,x2)", "sum(sum(x1,x2),x3)", "sum(sum(x1),sum(x2))"}) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    const auto config = make_config(tree, used, std::vector<std::size_t>(tree.size(), 1), tree.size() + 5);
    for_each_allocation(tree.size(), tree.size() + 5, [&](const std::vector<std::size_t>& a) {
      const double engine = to_double(hierarchical_variance_exact(tree.with_sizes(a), used));
      INFO(text);
      CHECK(allocation_variance(config, a) == Approx(engine).margin(1e-9));
    });
  }
}

TEST_CASE("zero leaf covariance does not match the engine") {
  const auto tree = CalcTree::parse("sum(x1,x2)");
  const std::vector<Distribution> laws{two_point(0, 2), two_point(0, 4)};
  for (auto advance : {AdvanceSize::parent, AdvanceSize::child}) {
    auto config = make_config(tree, laws, {1, 1, 1}, 20);
    config.leaf_covariance = LeafCovariance::zero;
    config.advance = advance;
    const std::vector<std::size_t> a{2, 3, 2};
    const double engine = to_double(hierarchical_variance_exact(tree.with_sizes(a), laws));
    CHECK(std::abs(allocation_variance(config, a) - engine) > 1e-3);
  }
}

TEST_CASE("alpha tables stay bounded") {
  const auto s = load_scenario("hier-query");
  const auto config = make_config(s.tree, s.laws, std::vector<std::size_t>(s.tree.size(), 1), 30);
  const auto best = bellman_optimize(config);
  CHECK(best.alpha_values > 0);
  // At most one alpha per size choice along each root path.
  std::size_t bound = 0;
  for (const auto& v : s.tree.nodes()) {
    std::size_t depth = 0;
    for (std::size_t id = v.id; id != s.tree.root_id();) {
      for (const auto& p : s.tree.nodes())
        if (std::find(p.children.begin(), p.children.end(), id) != p.children.end()) {
          id = p.id;
          break;
        }
      ++depth;
    }
    std::size_t paths = 1;
    for (std::size_t d = 0; d < depth; ++d) paths *= 30;
    bound += paths;
  }
  CHECK(best.alpha_values <= bound);
  CHECK(best.table_cells <= config.table_cap);
}

TEST_CASE("optimized allocation beats equal allocation on the query tree") {
  const auto s = load_scenario("hier-query");
  const std::vector<std::pair<std::vector<double>, std::size_t>> rows{
      {{0.1, 0.7, 0.2, 0.4, 0.8, 0.5}, 50},
      {{0.2, 0.2, 0.4, 0.4, 0.8, 0.8}, 60},
      {{0.2, 0.3, 1.0, 1.2, 0.5, 0.3}, 50},
      {{1.2, 0.1, 0.3, 2.1, 0.1, 1.5}, 50}};
  for (const auto& [rates, b] : rows) {
    std::vector<Distribution> laws;
    for (double l : rates) laws.push_back(Distribution::exponential(l));
    const auto config = make_config(s.tree, laws, std::vector<std::size_t>(10, 1), b);
    const auto best = bellman_optimize(config);
    const double equal = allocation_variance(config, std::vector<std::size_t>(10, b / 10));
    CHECK(best.variance < equal);
    CHECK(best.cost <= b);
  }
}

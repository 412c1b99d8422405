#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "resamplex/sample.hpp"
#include "resamplex/tree.hpp"
#include "support.hpp"

using namespace resamplex;
using Catch::Approx;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::invalid_argument;
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> x(m);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("query tree parses into ten nodes") {
  const auto tree = CalcTree::parse("max(max(x1,x2), min(x3,x4), sum(x5,x6))");
  CHECK(tree.size() == 10);
  CHECK(tree.arity() == 6);
  std::size_t leaves = 0;
  for (const auto& n : tree.nodes()) leaves += n.is_leaf();
  CHECK(leaves == 6);
  CHECK(tree.root().kind == NodeKind::max);
  CHECK(tree.root().children.size() == 3);
  CHECK(tree.depth() == 2);
  for (const auto& n : tree.nodes())
    for (auto c : n.children) CHECK(c < n.id);
}

TEST_CASE("single leaf tree") {
  for (const char* text : {"leaf(x1)", "x1"}) {
    const auto tree = CalcTree::parse(text);
    CHECK(tree.size() == 1);
    CHECK(tree.arity() == 1);
    CHECK(tree.eval({2.5}) == 2.5);
  }
}

TEST_CASE("malformed trees are rejected") {
  CHECK(kind_of([] { CalcTree::parse("sum(x1,x3,x3)"); }) == ErrorKind::duplicate_leaf);
  CHECK(kind_of([] { CalcTree::parse("sum(x1,x3)"); }) == ErrorKind::missing_leaf);
  CHECK(kind_of([] { CalcTree::parse("avg(x1,x2)"); }) == ErrorKind::parse);
  CHECK(kind_of([] { CalcTree::parse("kofn[k=2](x1,x2)"); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { CalcTree::parse("sum[q=1](x1,x2)"); }) == ErrorKind::parse);
  CHECK(kind_of([] { CalcTree::parse("sum(x1,x2"); }) == ErrorKind::parse);
  CHECK(kind_of([] { CalcTree::parse("x0"); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { CalcTree::parse("x1").eval({1.0, 2.0}); }) == ErrorKind::arity_mismatch);
}

TEST_CASE("text form round-trips") {
  for (const char* text : {"max(max(x1,x2),min(x3,x4),sum(x5,x6))", "kofn[k=2,t=0.5](x1,x2,x3)",
                           "lt[t=4](sum[n=10](x1[n=3],z1))", "gt[t=1](min(max(x1,z1),x2,z2,sum(x3,z3)))"}) {
    const auto tree = CalcTree::parse(text);
    const auto again = CalcTree::parse(tree.to_string());
    CHECK(again.to_string() == tree.to_string());
    CHECK(again.sizes() == tree.sizes());
  }
  const auto t = CalcTree::parse("lt[t=4](sum[n=10](x1[n=3],z1))");
  CHECK(t.known_arity() == 1);
  CHECK(t.node(t.leaf_of(0)).size == 3);
  CHECK(t.node(t.root().children[0]).size == 10);
}

TEST_CASE("evaluation examples") {
  const auto query = CalcTree::parse("max(max(x1,x2), min(x3,x4), sum(x5,x6))");
  CHECK(query.eval({1, 2, 3, 4, 5, 6}) == 11.0);

  const auto two_of_three = CalcTree::parse("kofn[k=2,t=0](x1,x2,x3)");
  CHECK(two_of_three.eval({1, 2, 3}) == 1.0);
  CHECK(CalcTree::parse("kofn[k=2,t=2.5](x1,x2,x3)").eval({1, 2, 3}) == 0.0);
  // Ties at the threshold count as failure.
  CHECK(CalcTree::parse("gt[t=2](x1)").eval({2.0}) == 0.0);
  CHECK(CalcTree::parse("lt[t=2](x1)").eval({2.0}) == 0.0);
  CHECK(CalcTree::parse("kofn[k=3,t=-inf](x1,x2,x3)").eval({-1e300, 0, 1}) == 1.0);
}

TEST_CASE("sum trees add exactly") {
  std::mt19937_64 rng(11);
  const auto tree = CalcTree::parse("sum(sum(x1,x2),x3,sum(x4))");
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_point(rng, 4);
    CHECK(tree.eval(x) == ((x[0] + x[1]) + x[2]) + x[3]);
  }
}

TEST_CASE("monotone catalog trees are monotone in every input") {
  std::mt19937_64 rng(12);
  const auto tree = CalcTree::parse("kofn[k=2,t=1](sum(x1,x2),max(x3,x4),min(x5,gt[t=0](x6)))");
  const auto plain = CalcTree::parse("max(sum(x1,x2),min(x3,x4),x5,x6)");
  std::uniform_real_distribution<double> bump(0.0, 3.0);
  for (int trial = 0; trial < 500; ++trial) {
    auto x = random_point(rng, 6);
    const double before = tree.eval(x), before_plain = plain.eval(x);
    const std::size_t i = trial % 6;
    x[i] += bump(rng);
    CHECK(tree.eval(x) >= before);
    CHECK(plain.eval(x) >= before_plain);
  }
}

TEST_CASE("child order does not matter for sum, max and min") {
  std::mt19937_64 rng(13);
  for (const char* kind : {"sum", "max", "min"}) {
    const std::string k(kind);
    const auto a = CalcTree::parse(k + "(x1,x2,x3,x4)");
    const auto b = CalcTree::parse(k + "(x3,x1,x4,x2)");
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_point(rng, 4);
      if (k == "sum")
        CHECK(a.eval(x) == Approx(b.eval(x)).margin(1e-12));
      else
        CHECK(a.eval(x) == b.eval(x));
    }
  }
}

TEST_CASE("k-of-n boundary cases") {
  std::mt19937_64 rng(14);
  const auto k1 = CalcTree::parse("kofn[k=1,t=0.5](x1,x2,x3)");
  const auto any = CalcTree::parse("gt[t=0.5](max(x1,x2,x3))");
  const auto kn = CalcTree::parse("kofn[k=3,t=0.5](x1,x2,x3)");
  const auto all = CalcTree::parse("gt[t=0.5](min(x1,x2,x3))");
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = random_point(rng, 3);
    CHECK(k1.eval(x) == any.eval(x));
    CHECK(kn.eval(x) == all.eval(x));
  }
}

TEST_CASE("threshold wrapping and size helpers") {
  const auto tree = CalcTree::parse("sum(x1,x2)");
  const auto wrapped = tree.wrapped(NodeKind::indicator_less, 3.0);
  CHECK(wrapped.size() == 4);
  CHECK(wrapped.eval({1.0, 1.5}) == 1.0);
  CHECK(wrapped.eval({1.0, 2.5}) == 0.0);
  const auto sized = tree.with_internal_sizes(7).with_leaf_sizes(std::vector<std::size_t>{2, 3});
  CHECK(sized.sizes() == std::vector<std::size_t>{2, 3, 7});
  CHECK(tree.descendants(2) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("distributions") {
  const auto e = Distribution::exponential(2.0);
  CHECK(e.mean() == Approx(0.5));
  CHECK(e.variance() == Approx(0.25));
  CHECK(e.cdf(1.0) == Approx(1.0 - std::exp(-2.0)));
  CHECK(e.quantile(e.cdf(0.7)) == Approx(0.7));
  const auto u = Distribution::uniform(0.0, 1.0);
  CHECK(u.variance() == Approx(1.0 / 12.0));
  const auto d = Distribution::discrete({0.0, 2.0}, {0.5, 0.5});
  CHECK(d.mean() == 1.0);
  CHECK(d.variance() == 1.0);
  CHECK(d.is_finite());
  CHECK_FALSE(e.is_finite());
  CHECK(Distribution::point(std::numeric_limits<double>::infinity()).survival(1e300) == 1.0);
}

TEST_CASE("empirical law is a right-continuous step") {
  const auto emp = Distribution::empirical({1.0, 3.0, 3.0, 5.0});
  CHECK(emp.cdf(0.999) == 0.0);
  CHECK(emp.cdf(1.0) == 0.25);
  CHECK(emp.cdf(3.0) == 0.75);
  CHECK(emp.cdf(4.9) == 0.75);
  CHECK(emp.cdf(5.0) == 1.0);
  CHECK(emp.support().size() == 4);
  CHECK(emp.mean() == 3.0);
}

TEST_CASE("law text round-trips") {
  for (const char* text : {"exponential(0.1)", "uniform(0,1)", "discrete(0:0.5,2:0.5)", "point(3)",
                           "empirical(1,2,3)"}) {
    const auto law = Distribution::parse(text);
    CHECK(Distribution::parse(law.describe()).describe() == law.describe());
  }
  CHECK(Distribution::parse("exponential(0.1)").describe() == "exponential(0.1)");
  CHECK(kind_of([] { Distribution::parse("gamma(2)"); }) == ErrorKind::parse);
  CHECK(kind_of([] { Distribution::exponential(-1.0); }) == ErrorKind::invalid_argument);
  CHECK(kind_of([] { Distribution::discrete({0, 1}, {0.5, 0.6}); }) == ErrorKind::invalid_argument);
}

TEST_CASE("sampling") {
  const auto pool = draw_sample(Distribution::exponential(2.0), 100'000, 42);
  CHECK(std::abs(pool.mean() - 0.5) <= 3 * 0.5 / std::sqrt(1e5));

  const auto d = Distribution::discrete({0.0, 2.0}, {0.5, 0.5});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto one = draw_sample(d, 1, seed);
    CHECK((one[0] == 0.0 || one[0] == 2.0));
  }
  const auto a = draw_sample(Distribution::uniform(0, 1), 50, 9);
  const auto b = draw_sample(Distribution::uniform(0, 1), 50, 9);
  CHECK(a.values() == b.values());
  CHECK(a.values() != draw_sample(Distribution::uniform(0, 1), 50, 9, 1).values());
  CHECK(kind_of([&] { draw_sample(d, 0, 1); }) == ErrorKind::invalid_argument);

  const auto pools = draw_pools({d, Distribution::uniform(0, 1)}, {3, 4}, 5);
  REQUIRE(pools.size() == 2);
  CHECK(pools[1].size() == 4);
  CHECK(pools[1].values() == draw_sample(Distribution::uniform(0, 1), 4, 5, 1).values());
}

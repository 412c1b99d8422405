#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <limits>

#include "resamplex/estimator.hpp"
#include "resamplex/oracle.hpp"
#include "support.hpp"

using namespace resamplex;
using namespace testing;
using Catch::Approx;

namespace {

// theta = E phi(X) by direct enumeration of the joint support.
double exact_theta(const CalcTree& tree, const std::vector<Distribution>& laws) {
  return enumerate_paths([&](ExhaustiveSource& s) {
           std::vector<double> x;
           for (const auto& law : laws) x.push_back(s.draw(law));
           return tree.eval(x);
         })
      .mean;
}

struct ForceThreads {
  ForceThreads() { setenv("RESAMPLEX_THREADS", "4", 1); }
  ~ForceThreads() { unsetenv("RESAMPLEX_THREADS"); }
};

}  // namespace

TEST_CASE("simple estimate examples") {
  const auto pools = pools_of({{1.0, 3.0}, {2.0, 4.0}, {0.5}});
  const auto always = CalcTree::parse("kofn[k=3,t=-inf](x1,x2,x3)");
  CHECK(simple_estimate(pools, always, 37, 1).value == 1.0);

  const auto singletons = pools_of({{1.5}, {2.0}, {0.25}});
  const auto tree = CalcTree::parse("sum(max(x1,x2),x3)");
  for (std::size_t r : {1, 5, 5000}) CHECK(simple_estimate(singletons, tree, r, 3).value == 2.25);

  const auto a = simple_estimate(pools, CalcTree::parse("max(x1,x2,x3)"), 1000, 99);
  const auto b = simple_estimate(pools, CalcTree::parse("max(x1,x2,x3)"), 1000, 99);
  CHECK(a.value == b.value);
  CHECK(a.standard_error == b.standard_error);
  CHECK(a.method == "simple");
  CHECK(a.seed == 99);
  CHECK(a.sizes == std::vector<std::size_t>{2, 2, 1});
  CHECK(a.standard_error.has_value());
}

TEST_CASE("estimator input validation") {
  const auto pools = pools_of({{1.0}, {2.0}});
  CHECK_THROWS_AS(simple_estimate(pools, CalcTree::parse("sum(x1,x2,x3)"), 10, 1), Error);
  CHECK_THROWS_AS(simple_estimate(pools, CalcTree::parse("sum(x1,x2)"), 0, 1), Error);
  CHECK_THROWS_AS(simple_estimate(pools, CalcTree::parse("sum(x1,z1)"), 10, 1), Error);
}

TEST_CASE("plug-in estimate examples") {
  const auto pools = pools_of({{1.0, 3.0}, {2.0, 4.0}});
  CHECK(plugin_estimate(pools, CalcTree::parse("sum(x1,x2)")) == 5.0);
  CHECK(plugin_estimate(pools, CalcTree::parse("max(x1,x2)")) == 3.25);
  CHECK(plugin_estimate(pools_of({{1.0}, {2.0}, {3.0}}), CalcTree::parse("kofn[k=2,t=2.5](x1,x2,x3)")) == 0.0);
  CHECK_THROWS_AS(plugin_estimate(pools, CalcTree::parse("sum(x1,x2)"), 3), Error);
}

TEST_CASE("exhaustive index iteration gives the plug-in estimate") {
  const auto pools = pools_of({{1.0, 3.0, 7.0}, {2.0, 4.0}, {0.0, 5.0}});
  const auto tree = CalcTree::parse("max(sum(x1,x2),x3)");
  // Every index combination once = the mean over all single-draw paths.
  const auto paths = enumerate_paths([&](ExhaustiveSource& s) { return simple_estimate_with(pools, tree, 1, s); });
  CHECK(paths.paths == 12);
  CHECK(paths.mean == Approx(plugin_estimate(pools, tree)).margin(1e-12));
}

TEST_CASE("simple estimator is unbiased on finite models") {
  const std::vector<std::string> trees{"sum(x1,x2)", "max(x1,x2,x3)", "min(x1,x2)", "kofn[k=2,t=1](x1,x2,x3)",
                                       "sum(max(x1,x2),x3)"};
  const std::vector<Distribution> laws{Distribution::discrete({0, 1, 3}, {0.2, 0.5, 0.3}), two_point(0, 2),
                                       Distribution::discrete({-1, 2}, {0.25, 0.75})};
  for (const auto& text : trees) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    const double theta = exact_theta(tree, used);
    for (std::size_t n : {1, 2}) {
      for (std::size_t r : {1, 2}) {
        const std::vector<std::size_t> sizes(tree.arity(), n);
        const auto m = exhaustive_moments(used, sizes, 1e3, 10'000'000, Execution::serial,
                                          [&](const Pools& p, ExhaustiveSource& s) {
                                            return simple_estimate_with(p, tree, r, s);
                                          });
        INFO(text << " n=" << n << " r=" << r);
        CHECK(m.mean == Approx(theta).margin(1e-12));
      }
    }
  }
}

TEST_CASE("hierarchical estimator is unbiased on finite models") {
  const std::vector<Distribution> laws{two_point(0, 2), Distribution::discrete({0, 1, 3}, {0.2, 0.5, 0.3}),
                                       two_point(1, 4)};
  for (const char* text : {"sum[n=2](x1[n=2],x2[n=1])", "max[n=2](sum[n=2](x1[n=2],x2[n=1]),x3[n=1])",
                           "min[n=1](max[n=2](x1[n=2],x2[n=2]),x3[n=1])", "kofn[k=1,t=1,n=2](x1[n=2],x2[n=1])"}) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < tree.arity(); ++i) sizes.push_back(tree.node(tree.leaf_of(i)).size);
    const auto m = exhaustive_moments(used, sizes, 1e4, 50'000'000, Execution::serial,
                                      [&](const Pools& p, ExhaustiveSource& s) {
                                        return hierarchical_estimate_with(p, tree, s);
                                      });
    INFO(text);
    CHECK(m.mean == Approx(exact_theta(tree, used)).margin(1e-12));
  }
}

TEST_CASE("one internal node of size r matches simple resampling in law") {
  const auto pools = pools_of({{0.0, 2.0}, {1.0, 5.0}});
  for (std::size_t r : {1, 2, 3}) {
    const auto flat = CalcTree::parse("max(x1,x2)");
    const auto hier = flat.with_internal_sizes(r);
    const auto simple_law = outcome_law([&](ExhaustiveSource& s) { return simple_estimate_with(pools, flat, r, s); });
    const auto hier_law = outcome_law([&](ExhaustiveSource& s) { return hierarchical_estimate_with(pools, hier, s); });
    CHECK(same_law(simple_law, hier_law));
  }
}

TEST_CASE("chain with one slot returns a single pool element") {
  const auto pools = pools_of({{1.0, 4.0, 9.0}});
  const auto tree = CalcTree::parse("sum[n=1](x1)");
  const auto law = outcome_law([&](ExhaustiveSource& s) { return hierarchical_estimate_with(pools, tree, s); });
  REQUIRE(law.size() == 3);
  for (const auto& [v, p] : law) CHECK(p == Approx(1.0 / 3.0));
  const double v = hierarchical_estimate(pools, tree, 5).value;
  CHECK((v == 1.0 || v == 4.0 || v == 9.0));
}

TEST_CASE("hierarchical estimate is reproducible") {
  const auto pools = draw_pools({Distribution::exponential(1.0), Distribution::exponential(2.0)}, {20, 30}, 3);
  const auto tree = CalcTree::parse("max(x1,x2)").with_internal_sizes(50);
  const auto a = hierarchical_estimate(pools, tree, 8);
  const auto b = hierarchical_estimate(pools, tree, 8);
  CHECK(a.value == b.value);
  CHECK(a.method == "hierarchical");
  CHECK(a.replications == 50);
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  ForceThreads threads;
  const auto pools = draw_pools({Distribution::exponential(0.5), Distribution::uniform(0, 3), Distribution::exponential(2)},
                                {15, 20, 25}, 21);
  const auto tree = CalcTree::parse("max(sum(x1,x2),x3)");
  for (std::size_t r : {1, 4095, 4096, 4097, 30'000}) {
    const auto s = simple_estimate(pools, tree, r, 5, Execution::serial);
    const auto p = simple_estimate(pools, tree, r, 5, Execution::parallel);
    CHECK(s.value == p.value);
    CHECK(s.standard_error == p.standard_error);
  }
  const auto hier = tree.with_internal_sizes(9000);
  CHECK(hierarchical_estimate(pools, hier, 2, Execution::serial).value ==
        hierarchical_estimate(pools, hier, 2, Execution::parallel).value);
  CHECK(plugin_estimate(pools, tree, 10'000'000, Execution::serial) ==
        plugin_estimate(pools, tree, 10'000'000, Execution::parallel));
  BlockSystem sys{{{pools[0], 2}, {pools[1], 3}}};
  CHECK(resampling_block_reliability(sys, 1.0, 20'000, 4, Execution::serial).value ==
        resampling_block_reliability(sys, 1.0, 20'000, 4, Execution::parallel).value);
}

TEST_CASE("plug-in block reliability examples") {
  CHECK(plugin_block_reliability({{{SamplePool({3.0}), 2}}}, 1.0) == 1.0);
  CHECK(plugin_block_reliability({{{SamplePool({0.5}), 2}}}, 1.0) == 0.0);
  CHECK(plugin_block_reliability({{{SamplePool({1.0, 3.0}), 1}, {SamplePool({2.0, 4.0}), 1}}}, 2.0) == 0.25);
}

TEST_CASE("block resampling examples") {
  const BlockSystem one{{{SamplePool({0.0, 2.0}), 2}}};
  const auto law = outcome_law([&](ExhaustiveSource& s) { return resampling_block_reliability_with(one, 1.0, 1, s); });
  REQUIRE(law.size() == 1);
  CHECK(law.begin()->first == 1.0);
  CHECK(resampling_block_reliability(one, 1.0, 100, 3).value == 1.0);

  // l = 1: the mean of r survival indicators.
  const BlockSystem single{{{SamplePool({0.0, 2.0, 3.0}), 1}}};
  const auto paths = enumerate_paths([&](ExhaustiveSource& s) { return resampling_block_reliability_with(single, 1.0, 2, s); });
  CHECK(paths.mean == Approx(2.0 / 3.0));

  CHECK_THROWS_AS(resampling_block_reliability({{{SamplePool({1.0}), 2}}}, 1.0, 10, 1), Error);
}

TEST_CASE("block estimators in expectation") {
  const auto law = two_point(0, 2);
  const double t = 1.0;
  CHECK(block_reliability({law}, {2}, t) == 0.75);

  auto resampled = [&](std::vector<Distribution> laws, std::vector<std::size_t> l, std::vector<std::size_t> n,
                       std::size_t r) {
    return exhaustive_moments(laws, n, 1e4, 10'000'000, Execution::serial, [&](const Pools& p, ExhaustiveSource& s) {
             BlockSystem sys;
             for (std::size_t i = 0; i < p.size(); ++i) sys.blocks.push_back({p[i], l[i]});
             return resampling_block_reliability_with(sys, t, r, s);
           })
        .mean;
  };
  CHECK(resampled({law}, {2}, {2}, 1) == Approx(0.75).margin(1e-12));
  const auto three = Distribution::discrete({0, 1.5, 3}, {0.3, 0.3, 0.4});
  for (std::size_t r : {1, 2}) {
    CHECK(resampled({law, three}, {2, 1}, {2, 2}, r) ==
          Approx(block_reliability({law, three}, {2, 1}, t)).margin(1e-12));
    CHECK(resampled({three, law}, {3, 2}, {3, 2}, r) ==
          Approx(block_reliability({three, law}, {3, 2}, t)).margin(1e-12));
  }

  // Plug-in with l = 2, n = 1 has expectation 1 - F(t) < 1 - F(t)^2.
  const auto plugin = exhaustive_moments({law}, {1}, 1, 1000, Execution::serial,
                                         [&](const Pools& p, ExhaustiveSource&) {
                                           return plugin_block_reliability({{{p[0], 2}}}, t);
                                         });
  CHECK(plugin.mean == Approx(0.5));
  CHECK(plugin.mean < block_reliability({law}, {2}, t));
}

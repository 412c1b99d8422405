// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <tuple>

#include "resamplex/cli.hpp"
#include "resamplex/coverage.hpp"
#include "resamplex/estimator.hpp"
#include "resamplex/optimizer.hpp"
#include "resamplex/oracle.hpp"
#include "resamplex/partial.hpp"
#include "resamplex/scenarios.hpp"
#include "resamplex/variance.hpp"

using namespace resamplex;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

Distribution two_point(double a, double b) { return Distribution::equiprobable({a, b}); }

double exact_theta(const CalcTree& tree, const std::vector<Distribution>& x_laws,
                   const std::vector<Distribution>& z_laws = {}) {
  return enumerate_paths([&](ExhaustiveSource& s) {
           std::vector<double> x, z;
           for (const auto& l : x_laws) x.push_back(s.draw(l));
           for (const auto& l : z_laws) z.push_back(s.draw(l));
           return tree.eval<double>(std::span<const double>(x), std::span<const double>(z));
         })
      .mean;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

Outcome table1() {
  Outcome o;
  const std::vector<std::array<double, 3>> rows{{1, 781.25, 781.25},     {2, 390.625, 398.437},
                                                {3, 260.417, 270.833},   {5, 156.25, 168.75},
                                                {8, 97.6562, 111.328},   {10, 78.125, 92.1875},
                                                {13, 60.0962, 74.5192},  {15, 52.0833, 66.6667}};
  std::ostringstream out, err;
  if (run_cli({"reproduce", "table1", "--format", "csv"}, out, err) != 0) return {false, err.str()};
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  double worst = 0.0;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    const auto cells = cells_of(line);
    const auto& ref = rows.at(seen++);
    if (std::stod(cells[0]) != ref[0]) o.pass = false;
    worst = std::max({worst, std::abs(std::stod(cells[1]) - ref[1]), std::abs(std::stod(cells[2]) - ref[2])});
  }
  o.pass = o.pass && seen == rows.size() && worst <= 0.005;
  o.detail = "8 rows, max abs deviation " + fmt(worst);
  return o;
}

Outcome table2_classical() {
  const std::vector<std::pair<std::size_t, double>> rows{{1, 9.02778}, {2, 4.51389},   {3, 3.00926},   {5, 1.80556},
                                                         {8, 1.12847}, {10, 0.902778}, {12, 0.752315}, {15, 0.601852}};
  double worst = 0.0;
  for (const auto& [n, v] : rows)
    worst = std::max(worst, std::abs(single_sample_variance(9.02778, n, 10).classical - v));
  return {worst <= 0.005, "classical = 9.02778/n, max abs deviation " + fmt(worst)};
}

Outcome variance_oracle() {
  const std::vector<std::vector<Distribution>> law_sets{
      {two_point(0, 2), two_point(0, 4), two_point(-1, 1)},
      {Distribution::discrete({1, 4}, {0.3, 0.7}), two_point(0.5, 2.5), Distribution::discrete({0, 3}, {0.8, 0.2})}};
  std::vector<std::string> trees;
  for (const char* f : {"sum", "max", "min"}) {
    trees.push_back(std::string(f) + "(x1)");
    trees.push_back(std::string(f) + "(x1,x2)");
    trees.push_back(std::string(f) + "(x1,x2,x3)");
  }
  trees.push_back("kofn[k=2,t=1](x1,x2,x3)");
  std::size_t cases = 0;
  double worst = 0.0;
  for (const auto& laws : law_sets) {
    for (const auto& text : trees) {
      const auto tree = CalcTree::parse(text);
      const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
      for (std::size_t code = 0; code < (1u << tree.arity()); ++code) {
        std::vector<std::size_t> n;
        for (std::size_t i = 0; i < tree.arity(); ++i) n.push_back(1 + ((code >> i) & 1));
        for (std::size_t r = 1; r <= 3; ++r) {
          const double engine = resampling_variance(tree, used, n, r).variance;
          const double oracle = brute_force_variance_oracle(tree, used, n, r);
          worst = std::max(worst, std::abs(engine - oracle));
          ++cases;
        }
      }
    }
  }
  return {worst <= 1e-10, std::to_string(cases) + " configurations, max abs difference " + fmt(worst)};
}

Outcome unbiasedness() {
  double worst = 0.0;
  std::size_t cases = 0;
  auto record = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    ++cases;
  };
  const std::vector<Distribution> laws{two_point(0, 2), Distribution::discrete({0, 1, 3}, {0.2, 0.5, 0.3}),
                                       two_point(-1, 3)};
  for (const char* text : {"sum(x1,x2)", "max(x1,x2,x3)", "min(x1,x2)", "kofn[k=2,t=1](x1,x2,x3)"}) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    const double theta = exact_theta(tree, used);
    for (std::size_t n : {1, 2})
      for (std::size_t r : {1, 2, 3})
        record(exhaustive_moments(used, std::vector<std::size_t>(tree.arity(), n), 1e3, 100'000'000, Execution::parallel,
                                  [&](const Pools& p, ExhaustiveSource& s) { return simple_estimate_with(p, tree, r, s); })
                   .mean,
               theta);
  }
  for (const char* text : {"sum[n=2](x1[n=2],x2[n=1])", "max[n=2](sum[n=2](x1[n=2],x2[n=1]),x3[n=1])",
                           "kofn[k=2,t=1,n=2](x1[n=2],x2[n=1],x3[n=1])"}) {
    const auto tree = CalcTree::parse(text);
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < tree.arity(); ++i) sizes.push_back(tree.node(tree.leaf_of(i)).size);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    record(exhaustive_moments(used, sizes, 1e4, 100'000'000, Execution::parallel,
                              [&](const Pools& p, ExhaustiveSource& s) { return hierarchical_estimate_with(p, tree, s); })
               .mean,
           exact_theta(tree, used));
  }
  const std::vector<Distribution> blocks{two_point(0, 2), Distribution::discrete({0, 1.5, 3}, {0.3, 0.3, 0.4})};
  for (std::size_t r : {1, 2}) {
    record(exhaustive_moments(blocks, {2, 2}, 1e4, 10'000'000, Execution::parallel,
                              [&](const Pools& p, ExhaustiveSource& s) {
                                return resampling_block_reliability_with({{{p[0], 2}, {p[1], 1}}}, 1.0, r, s);
                              })
               .mean,
           block_reliability(blocks, {2, 1}, 1.0));
  }
  const auto query = CalcTree::parse("gt[t=1](min(max(x1,z1),x2,z2,sum(x3,z3)))");
  const std::vector<Distribution> x_laws{two_point(0.5, 2.0), two_point(0.8, 3.0), two_point(0.1, 1.5)};
  const std::vector<Distribution> z_laws{two_point(0.5, 2.5), Distribution::discrete({0.0, 2.0}, {0.3, 0.7}),
                                         two_point(0.2, 1.2)};
  const double theta = exact_theta(query, x_laws, z_laws);
  for (std::size_t n : {1, 2}) {
    const std::vector<std::size_t> sizes(3, n);
    record(exhaustive_moments(x_laws, sizes, 1e3, 100'000'000, Execution::parallel,
                              [&](const Pools& p, ExhaustiveSource& s) {
                                return estimate_known_subfunction_with(PartialModel{query, z_laws, p}, 2, s);
                              })
               .mean,
           theta);
    record(exhaustive_moments(x_laws, sizes, 1e3, 100'000'000, Execution::parallel,
                              [&](const Pools& p, ExhaustiveSource& s) {
                                return estimate_simulated_subfunction_with(PartialModel{query, z_laws, p}, 1, 2, s);
                              })
               .mean,
           theta);
  }
  // Plug-in product estimator: biased low when l >= 2 and 0 < F(t) < 1.
  const auto law = Distribution::discrete({0, 2}, {0.4, 0.6});
  const double plugin = exhaustive_moments({law}, {1}, 1, 100, Execution::serial,
                                           [&](const Pools& p, ExhaustiveSource&) {
                                             return plugin_block_reliability({{{p[0], 2}}}, 1.0);
                                           })
                            .mean;
  const double reliability = block_reliability({law}, {2}, 1.0);
  const bool biased = plugin < reliability;
  return {worst <= 1e-12 && biased, std::to_string(cases) + " exhaustive checks, max |E - theta| " + fmt(worst) +
                                        "; plug-in E " + fmt(plugin) + " < R " + fmt(reliability)};
}

Outcome optimizer() {
  const std::vector<std::string> trees{"x1",         "sum(x1)",         "max(x1)",         "sum(x1,x2)",
                                       "max(x1,x2)", "min(x1,x2)",      "sum(x1,x2,x3)",   "max(x1,x2,x3)",
                                       "min(x1,x2,x3)", "sum(sum(x1),x2)", "max(sum(x1),x2)", "min(x1,max(x2))",
                                       "sum(max(x1,x2))", "max(min(x1,x2))", "sum(sum(sum(x1)))", "kofn[k=2,t=2](x1,x2,x3)"};
  const std::vector<Distribution> laws{two_point(0, 2), two_point(1, 5), Distribution::discrete({0, 1, 5}, {0.2, 0.5, 0.3})};
  std::size_t configs = 0, mismatches = 0;
  for (const auto& text : trees) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    for (std::size_t b = tree.size(); b <= 15; ++b) {
      const auto config = make_config(tree, used, std::vector<std::size_t>(tree.size(), 1), b);
      const auto dp = bellman_optimize(config);
      const auto ex = exhaustive_optimize_oracle(config);
      ++configs;
      if (dp.variance != ex.variance || dp.allocation != ex.allocation) ++mismatches;
    }
  }
  double worst = 0.0;
  std::size_t allocations = 0;
  for (const char* text : {"sum(x1)", "sum(x1,x2)", "sum(sum(x1,x2),x3)", "sum(sum(x1),sum(x2))"}) {
    const auto tree = CalcTree::parse(text);
    const std::vector<Distribution> used(laws.begin(), laws.begin() + tree.arity());
    const std::size_t b = tree.size() + 4;
    const auto config = make_config(tree, used, std::vector<std::size_t>(tree.size(), 1), b);
    std::vector<std::size_t> a(tree.size(), 1);
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t i, std::size_t left) {
      if (i == a.size()) {
        const double engine = to_double(hierarchical_variance_exact(tree.with_sizes(a), used));
        worst = std::max(worst, std::abs(allocation_variance(config, a) - engine));
        ++allocations;
        return;
      }
      const std::size_t rest = a.size() - i - 1;
      for (std::size_t n = 1; n + rest <= left; ++n) {
        a[i] = n;
        walk(i + 1, left - n);
      }
    };
    walk(0, b);
  }
  return {mismatches == 0 && worst <= 1e-9,
          std::to_string(configs) + " configurations, " + std::to_string(mismatches) + " mismatches; sum-tree objective vs engine over " +
              std::to_string(allocations) + " allocations, max abs difference " + fmt(worst)};
}

Outcome table5_direction() {
  const auto s = load_scenario("hier-query");
  std::vector<Distribution> laws;
  for (double rate : {0.1, 0.7, 0.2, 0.4, 0.8, 0.5}) laws.push_back(Distribution::exponential(rate));
  const auto config = make_config(s.tree, laws, std::vector<std::size_t>(10, 1), 50);
  const auto best = bellman_optimize(config);
  const double equal = allocation_variance(config, std::vector<std::size_t>(10, 5));
  const double pct = 100.0 * (equal - best.variance) / equal;
  return {best.variance < equal && best.cost <= 50,
          "b = 50: optimized " + fmt(best.variance) + " vs equal allocation " + fmt(equal) + " (" + fmt(pct) + "% better)"};
}

Outcome coverage() {
  Outcome o;
  for (std::size_t r = 1; r <= 15; ++r)
    for (std::size_t k = 1; k <= r; ++k) {
      const double gamma = 1.0 - (static_cast<double>(k) + 0.5) / static_cast<double>(r);
      if (gamma <= 0.0) continue;
      if (actual_coverage({{1, 1}, gamma, r, RankFunctional::min_selection}).coverage != 0.5) o.pass = false;
    }
  // k = r needs gamma = 0, so sum the conditional coverage over protocols directly.
  const std::vector<std::size_t> pair{1, 1};
  const auto dist = success_distribution(pair, RankFunctional::min_selection);
  const Rational theta = theta_value(RankFunctional::min_selection, 2);
  for (std::size_t r = 1; r <= 15; ++r)
    for (std::size_t k = 1; k <= r; ++k) {
      double total = 0.0;
      for (const auto& [successes, count] : dist.protocols)
        total += static_cast<double>(count) / static_cast<double>(dist.total) *
                 conditional_coverage(Rational(BigInt(successes)) / Rational(BigInt(dist.tuples)), theta, r, k);
      if (total != 0.5) o.pass = false;
    }
  double worst_z = 0.0;
  std::uint64_t seed = 100;
  for (auto f : {RankFunctional::min_selection, RankFunctional::ordering})
    for (const auto& sizes : std::vector<std::vector<std::size_t>>{{3, 3, 3}, {4, 4, 4}})
      for (double gamma : {0.5, 0.7, 0.9}) {
        const CoverageConfig cfg{sizes, gamma, 10, f};
        const double exact = actual_coverage(cfg).coverage;
        const auto mc = coverage_simulation_mc(cfg, 100'000, seed++);
        const double se = std::sqrt(exact * (1 - exact) / 100'000.0);
        worst_z = std::max(worst_z, std::abs(exact - mc.coverage) / se);
      }
  if (worst_z > 3.0) o.pass = false;
  bool monotone = true;
  for (auto f : {RankFunctional::min_selection, RankFunctional::ordering})
    for (const auto& row : reference_table(f))
      for (std::size_t r : {10, 30, 100}) {
        double previous = 0.0;
        for (double gamma : reference_gammas()) {
          const double c = actual_coverage({row.sizes, gamma, r, f}).coverage;
          if (c < previous - 1e-15) monotone = false;
          previous = c;
        }
      }
  o.pass = o.pass && monotone;
  o.detail = "(1,1) gives 1/2 for all k; exact vs 1e5-run simulation max |z| " + fmt(worst_z) +
             "; monotone in gamma on every reference row: " + (monotone ? "yes" : "no");
  return o;
}

Outcome symmetry() {
  std::size_t cases = 0;
  bool ok = true;
  for (std::size_t a = 1; a <= 4; ++a)
    for (std::size_t b = 1; b <= 4; ++b)
      for (std::size_t c = 1; c <= 4; ++c)
        for (auto f : {RankFunctional::min_selection, RankFunctional::ordering}) {
          const std::vector<std::size_t> sizes{a, b, c};
          const auto dist = success_distribution_by_listing(sizes, f);
          Rational sum = 0;
          for (const auto& [successes, count] : dist.protocols)
            sum += Rational(BigInt(count)) * protocol_probability(sizes) * Rational(BigInt(successes)) /
                   Rational(BigInt(dist.tuples));
          ok = ok && sum == theta_value(f, 3) && success_distribution(sizes, f).protocols == dist.protocols;
          ++cases;
        }
  return {ok, std::to_string(cases) + " size triples x functionals, sum P p equals 1/3 and 1/6 exactly"};
}

Outcome scan() {
  std::ostringstream detail;
  for (auto f : {RankFunctional::min_selection, RankFunctional::ordering}) {
    const auto rows = scan_reference(f, 5, 200, 1);
    double best = 1.0, worst = 0.0;
    for (const auto& row : rows) {
      best = std::min(best, row.max_deviation);
      worst = std::max(worst, row.max_deviation);
    }
    detail << to_string(f) << ": " << rows.size() << " rows, best-fit residual " << fmt(best) << ".." << fmt(worst)
           << "; ";
  }
  return {true, "informational, " + detail.str() + "reference values not asserted"};
}

Outcome determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"estimate", "--scenario", "two-of-three", "--t", "1.0", "--r", "20000", "--seed", "7"},
      {"estimate", "--scenario", "hier-query", "--method", "hierarchical", "--internal-size", "5000", "--seed", "7"},
      {"estimate", "--scenario", "block-query", "--seed", "7", "--format", "csv"},
      {"variance", "--scenario", "hier-query", "--t", "10", "--mc-runs", "20000", "--seed", "7"},
      {"partial", "--scenario", "hier-query-partial", "--situation", "simulated", "--r", "9000", "--seed", "7"},
      {"coverage", "--sizes", "4,4,4", "--mc", "20000", "--mc-mode", "simulation", "--seed", "7"},
      {"reproduce", "partial-comparison", "--r", "50", "--seed", "7"},
  };
  std::size_t same = 0;
  for (auto cmd : commands) {
    std::ostringstream a, b, c, err;
    const int code = run_cli(cmd, a, err);
    run_cli(cmd, b, err);
    cmd.push_back("--serial");
    run_cli(cmd, c, err);
    if (code == 0 && a.str() == b.str() && a.str() == c.str()) ++same;
  }
  return {same == commands.size(), std::to_string(same) + "/" + std::to_string(commands.size()) +
                                       " randomized commands byte-identical across repeats and serial/parallel"};
}

}  // namespace

int main() {
  const std::vector<std::tuple<int, const char*, double, std::function<Outcome()>>> criteria{
      {1, "reproduce table1", 1.0, table1},
      {2, "single-sample classical variance", 0.0, table2_classical},
      {3, "variance engine equals brute-force oracle", 60.0, variance_oracle},
      {4, "unbiasedness and plug-in bias direction", 0.0, unbiasedness},
      {5, "optimizer equals exhaustive search", 30.0, optimizer},
      {6, "optimized allocation beats equal allocation", 0.0, table5_direction},
      {7, "coverage exactness", 120.0, coverage},
      {8, "protocol symmetry identities", 0.0, symmetry},
      {9, "coverage reference r scan", 0.0, scan},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& [id, name, limit, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit > 0.0 && seconds > limit) {
      o.pass = false;
      o.detail += "; over the " + fmt(limit) + " s limit";
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2f s", seconds);
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << name << " - " << o.detail << " ["
              << timing << "]\n";
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}

#pragma once

// Ready-to-run configurations of the worked examples.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resamplex/coverage.hpp"
#include "resamplex/distribution.hpp"
#include "resamplex/tree.hpp"

namespace resamplex {

enum class ScenarioKind {
  tree,      // phi as a CalcTree over sampled inputs
  blocks,    // block reliability
  partial,   // tree over sampled and known inputs
  coverage,  // rank functional with interval estimation
};

const char* to_string(ScenarioKind kind) noexcept;

struct Scenario {
  std::string name;
  std::string doc;  // one line, starts with a method-family tag such as "[point]"
  ScenarioKind kind = ScenarioKind::tree;
  CalcTree tree;
  std::vector<Distribution> laws;        // sampled inputs
  std::vector<Distribution> known;       // known inputs (partial)
  std::vector<std::size_t> sizes;        // default pool sizes
  std::size_t internal_size = 10;        // hierarchical node sample size
  std::size_t r = 1000;
  std::size_t replicates = 10;           // N for the simulated estimator
  std::optional<double> t;               // default threshold
  std::vector<double> t_grid;
  std::vector<std::size_t> multiplicity; // blocks
  RankFunctional functional = RankFunctional::min_selection;
  double gamma = 0.9;
};

/// Sorted names with docs.
struct ScenarioInfo {
  std::string name;
  std::string doc;
};

std::vector<ScenarioInfo> list_scenarios();

/// UnknownScenario (listing valid names) for names outside the catalog.
Scenario load_scenario(std::string_view name);

/// Same tree with the root threshold replaced (threshold roots) or the root
/// wrapped in lt[t] (value roots: P{phi < t}).
CalcTree with_threshold(const CalcTree& tree, double t);

/// Order event of a rank functional on one input vector.
bool rank_event(RankFunctional f, std::span<const double> x);

}  // namespace resamplex

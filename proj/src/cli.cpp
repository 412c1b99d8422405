#include "resamplex/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "resamplex/coverage.hpp"
#include "resamplex/estimator.hpp"
#include "resamplex/optimizer.hpp"
#include "resamplex/partial.hpp"
#include "resamplex/scenarios.hpp"
#include "resamplex/variance.hpp"
#include "text.hpp"

namespace resamplex {

namespace {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void usage(const std::string& what) { throw UsageError(what); }

// Seed offset for drawing synthetic pools, kept apart from resampling streams.
constexpr std::uint64_t kDataStream = 1ULL << 40;

struct RunConfig {
  std::string command;
  std::string scenario;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t r = 0;
  std::size_t replicates = 0;
  std::vector<std::size_t> sizes;
  double gamma = 0.0;
  std::optional<double> t;
  std::vector<double> t_grid;
  std::string format = "json";
  std::string output;
  std::string method;
  std::string situation = "known";
  std::size_t internal_size = 0;
  std::size_t budget = 0;
  std::vector<std::size_t> weights;
  std::string advance = "parent";
  std::string leaf_covariance = "resampled";
  std::size_t free_size_cap = 64;
  std::string functional;
  std::size_t batch = 1;
  std::size_t mc_runs = 0;
  std::string mc_mode = "protocol";
  bool exact = false;
  std::string table;
  std::string export_name;
  std::size_t r_min = 5, r_max = 200;
  bool serial = false;
};

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (!c.scenario.empty()) j["scenario"] = c.scenario;
  if (!c.config_path.empty()) j["config"] = c.config_path;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  const auto& cmd = c.command;
  if (cmd == "estimate" || cmd == "variance" || cmd == "partial" || cmd == "coverage") j["r"] = c.r;
  if (cmd == "partial") {
    j["situation"] = c.situation;
    j["N"] = c.replicates;
  }
  if (!c.sizes.empty()) j["sizes"] = c.sizes;
  if (cmd == "coverage") {
    j["gamma"] = c.gamma;
    j["functional"] = c.functional;
    j["batch"] = c.batch;
    j["mode"] = c.exact ? "exact" : c.mc_mode;
    if (!c.exact) j["mc_runs"] = c.mc_runs;
  }
  if (c.t) j["t"] = *c.t;
  if (!c.t_grid.empty()) j["t_grid"] = c.t_grid;
  if (!c.method.empty()) j["method"] = c.method;
  if (c.internal_size) j["internal_size"] = c.internal_size;
  if (cmd == "variance") j["mc_runs"] = c.mc_runs;
  if (cmd == "optimize") {
    j["budget"] = c.budget;
    j["weights"] = c.weights;
    j["advance"] = c.advance;
    j["leaf_covariance"] = c.leaf_covariance;
    j["free_size_cap"] = c.free_size_cap;
  }
  if (cmd == "reproduce") {
    j["table"] = c.table;
    if (c.table == "table6-scan" || c.table == "table7-scan") {
      j["r_min"] = c.r_min;
      j["r_max"] = c.r_max;
      j["batch"] = c.batch;
    }
  }
  j["format"] = c.format;
  return j;
}

// Output --------------------------------------------------------------------

struct Report {
  json result;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string num(double v) { return detail::format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join_sizes(const std::vector<std::size_t>& v, char sep = ' ') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

void emit(const RunConfig& cfg, const Report& rep, std::ostream& out) {
  std::ostringstream body;
  if (cfg.format == "json") {
    json j;
    j["config"] = to_json(cfg);
    j["result"] = rep.result;
    body << j.dump(2) << '\n';
  } else {
    for (std::size_t i = 0; i < rep.header.size(); ++i) body << (i ? "," : "") << csv_field(rep.header[i]);
    body << '\n';
    for (const auto& row : rep.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) body << (i ? "," : "") << csv_field(row[i]);
      body << '\n';
    }
  }
  if (cfg.output.empty()) {
    out << body.str();
    return;
  }
  std::ofstream file(cfg.output, std::ios::binary);
  if (!file) usage("cannot write output file '" + cfg.output + "'");
  file << body.str();
}

// Models --------------------------------------------------------------------

struct Model {
  Scenario s;
  std::vector<std::vector<double>> samples;  // explicit pools; empty means draw from laws
};

std::vector<Distribution> parse_laws(const std::string& text) {
  std::vector<Distribution> out;
  for (const auto& part : detail::split(text, ',')) out.push_back(Distribution::parse(part));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& part : detail::split(text, ',')) out.push_back(detail::parse_size(part));
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : detail::split(text, ',')) out.push_back(detail::parse_double(part));
  return out;
}

using FlatConfig = std::map<std::string, std::string>;

FlatConfig read_ini(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::parse, std::string("config: ") + e.what());
  }
  FlatConfig flat;
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) fail(ErrorKind::parse, "config: key '" + section + "' outside a section");
    for (const auto& [key, value] : entries) flat[section + "." + key] = detail::trim(value.data());
  }
  return flat;
}

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return num(v.get<double>());
  return v.dump();
}

FlatConfig read_json(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::parse, "config: top level must be an object of sections");
  FlatConfig flat;
  for (const auto& [section, entries] : j.items()) {
    if (!entries.is_object()) fail(ErrorKind::parse, "config: section '" + section + "' must be an object");
    for (const auto& [key, value] : entries.items()) {
      std::string text;
      if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) text += (i ? ", " : "") + json_scalar(value[i]);
      } else {
        text = json_scalar(value);
      }
      flat[section + "." + key] = text;
    }
  }
  return flat;
}

ScenarioKind parse_kind(const std::string& s) {
  if (s == "tree") return ScenarioKind::tree;
  if (s == "blocks") return ScenarioKind::blocks;
  if (s == "partial") return ScenarioKind::partial;
  if (s == "coverage") return ScenarioKind::coverage;
  fail(ErrorKind::parse, "config: unknown model kind '" + s + "'");
}

Model model_from_flat(const FlatConfig& flat) {
  Model m;
  m.s.name = "config";
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    if (auto it = flat.find(key); it != flat.end()) return it->second;
    return std::nullopt;
  };
  for (const auto& [key, value] : flat) {
    static const std::vector<std::string> known{
        "model.kind", "model.tree",      "model.laws",       "model.known",   "model.sizes", "model.multiplicity",
        "model.functional", "model.internal_size", "run.r", "run.t", "run.t_grid", "run.replicates", "run.gamma"};
    if (key.rfind("samples.", 0) == 0) continue;
    if (std::find(known.begin(), known.end(), key) == known.end())
      fail(ErrorKind::parse, "config: unknown key '" + key + "'");
  }
  if (auto v = take("model.kind")) m.s.kind = parse_kind(*v);
  if (auto v = take("model.tree")) m.s.tree = CalcTree::parse(*v);
  if (auto v = take("model.laws")) m.s.laws = parse_laws(*v);
  if (auto v = take("model.known")) m.s.known = parse_laws(*v);
  if (auto v = take("model.sizes")) m.s.sizes = parse_sizes(*v);
  if (auto v = take("model.multiplicity")) m.s.multiplicity = parse_sizes(*v);
  if (auto v = take("model.functional")) m.s.functional = parse_functional(*v);
  if (auto v = take("model.internal_size")) m.s.internal_size = detail::parse_size(*v);
  if (auto v = take("run.r")) m.s.r = detail::parse_size(*v);
  if (auto v = take("run.t")) m.s.t = detail::parse_double(*v);
  if (auto v = take("run.t_grid")) m.s.t_grid = parse_doubles(*v);
  if (auto v = take("run.replicates")) m.s.replicates = detail::parse_size(*v);
  if (auto v = take("run.gamma")) m.s.gamma = detail::parse_double(*v);

  std::map<std::size_t, std::vector<double>> samples;
  for (const auto& [key, value] : flat) {
    if (key.rfind("samples.", 0) != 0) continue;
    const std::string name = key.substr(8);
    if (name.size() < 2 || name[0] != 'x') fail(ErrorKind::parse, "config: sample keys are x1, x2, ...");
    const std::size_t i = detail::parse_size(name.substr(1));
    if (i == 0) fail(ErrorKind::parse, "config: sample keys are 1-based");
    samples[i - 1] = parse_doubles(value);
  }
  for (const auto& [i, values] : samples) {
    if (i != m.samples.size()) fail(ErrorKind::parse, "config: samples must be x1..xm without gaps");
    m.samples.push_back(values);
  }
  if (!m.samples.empty()) {
    m.s.sizes.clear();
    for (const auto& v : m.samples) m.s.sizes.push_back(v.size());
  }
  if (m.s.kind == ScenarioKind::tree || m.s.kind == ScenarioKind::partial) {
    if (!take("model.tree")) fail(ErrorKind::parse, "config: model.tree is required");
    const std::size_t m_in = m.s.tree.arity();
    if (m.s.sizes.empty()) m.s.sizes.assign(m_in, 10);
  }
  if (m.s.kind == ScenarioKind::blocks && m.s.multiplicity.empty())
    fail(ErrorKind::parse, "config: model.multiplicity is required for blocks");
  return m;
}

Model load_model(const RunConfig& cfg, bool required = true) {
  if (!cfg.scenario.empty() && !cfg.config_path.empty()) usage("give either --scenario or --config, not both");
  if (!cfg.scenario.empty()) return Model{load_scenario(cfg.scenario), {}};
  if (!cfg.config_path.empty()) {
    std::ifstream in(cfg.config_path, std::ios::binary);
    if (!in) usage("cannot read config file '" + cfg.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    std::istringstream src(text);
    const bool is_json = first != std::string::npos && text[first] == '{';
    return model_from_flat(is_json ? read_json(src) : read_ini(src));
  }
  if (required) usage("a model is required: --scenario NAME or --config FILE");
  return {};
}

std::string export_ini(const Scenario& s) {
  std::ostringstream os;
  auto laws = [](const std::vector<Distribution>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i].describe();
    return out;
  };
  os << "[model]\n";
  os << "kind = " << to_string(s.kind) << '\n';
  if (s.kind == ScenarioKind::tree || s.kind == ScenarioKind::partial) os << "tree = " << s.tree.to_string() << '\n';
  if (!s.laws.empty()) os << "laws = " << laws(s.laws) << '\n';
  if (!s.known.empty()) os << "known = " << laws(s.known) << '\n';
  os << "sizes = " << join_sizes(s.sizes, ',') << '\n';
  if (!s.multiplicity.empty()) os << "multiplicity = " << join_sizes(s.multiplicity, ',') << '\n';
  if (s.kind == ScenarioKind::coverage) os << "functional = " << to_string(s.functional) << '\n';
  if (s.kind == ScenarioKind::tree) os << "internal_size = " << s.internal_size << '\n';
  os << "\n[run]\n";
  os << "r = " << s.r << '\n';
  if (s.kind == ScenarioKind::partial) os << "replicates = " << s.replicates << '\n';
  if (s.t) os << "t = " << num(*s.t) << '\n';
  if (!s.t_grid.empty()) {
    os << "t_grid = ";
    for (std::size_t i = 0; i < s.t_grid.size(); ++i) os << (i ? "," : "") << num(s.t_grid[i]);
    os << '\n';
  }
  if (s.kind == ScenarioKind::coverage) os << "gamma = " << num(s.gamma) << '\n';
  return os.str();
}

// Shared resolution ---------------------------------------------------------

Execution exec_of(const RunConfig& cfg) { return cfg.serial ? Execution::serial : Execution::parallel; }

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) usage("'" + cfg.command + "' is randomized and needs --seed");
  return *cfg.seed;
}

void resolve_common(RunConfig& cfg, const Model& m) {
  if (cfg.r == 0) cfg.r = m.s.r;
  if (cfg.replicates == 0) cfg.replicates = m.s.replicates;
  if (cfg.sizes.empty()) cfg.sizes = m.s.sizes;
  if (!cfg.t && cfg.t_grid.empty() && m.s.t && m.s.kind != ScenarioKind::tree) cfg.t = m.s.t;
  if (cfg.internal_size == 0) cfg.internal_size = m.s.internal_size;
}

Pools make_pools(const Model& m, const RunConfig& cfg) {
  if (!m.samples.empty()) {
    if (cfg.sizes != m.s.sizes) usage("--sizes cannot override explicit samples");
    Pools pools;
    for (const auto& v : m.samples) pools.emplace_back(v);
    return pools;
  }
  if (m.s.laws.empty()) usage("the model has neither laws nor samples");
  if (cfg.sizes.size() != m.s.laws.size())
    usage("expected " + std::to_string(m.s.laws.size()) + " sizes, got " + std::to_string(cfg.sizes.size()));
  return draw_pools(m.s.laws, cfg.sizes, stream_seed(require_seed(cfg), kDataStream));
}

// Thresholds to evaluate: the grid, a single t, or none.
std::vector<std::optional<double>> thresholds(const RunConfig& cfg) {
  if (!cfg.t_grid.empty()) {
    if (cfg.t) usage("give either --t or --t-grid");
    return {cfg.t_grid.begin(), cfg.t_grid.end()};
  }
  return {cfg.t};
}

CalcTree tree_at(const CalcTree& base, const std::optional<double>& t) {
  return t ? with_threshold(base, *t) : base;
}

CalcTree hierarchical_tree(const CalcTree& tree, const RunConfig& cfg) {
  bool explicit_sizes = false;
  for (const auto& v : tree.nodes())
    if (!v.is_leaf() && v.size != 1) explicit_sizes = true;
  return explicit_sizes ? tree : tree.with_internal_sizes(cfg.internal_size);
}

json estimate_json(const EstimateReport& rep, const std::optional<double>& t) {
  json j;
  j["t"] = opt_json(t);
  j["value"] = rep.value;
  j["standard_error"] = opt_json(rep.standard_error);
  j["method"] = rep.method;
  j["replications"] = rep.replications;
  j["sizes"] = rep.sizes;
  j["seed"] = rep.seed;
  return j;
}

// Commands ------------------------------------------------------------------

Report cmd_estimate(RunConfig& cfg) {
  const Model m = load_model(cfg);
  resolve_common(cfg, m);
  const auto seed = require_seed(cfg);
  const auto exec = exec_of(cfg);
  Report rep;
  rep.result = json::array();
  rep.header = {"t", "method", "value", "standard_error", "replications", "seed"};

  auto add = [&](const EstimateReport& e, const std::optional<double>& t, json extra = json::object()) {
    json j = estimate_json(e, t);
    for (auto& [k, v] : extra.items()) j[k] = v;
    rep.result.push_back(j);
    rep.rows.push_back({t ? num(*t) : "", e.method, num(e.value), opt_num(e.standard_error), num(e.replications),
                        std::to_string(e.seed)});
  };

  switch (m.s.kind) {
    case ScenarioKind::tree: {
      const Pools pools = make_pools(m, cfg);
      if (cfg.method.empty()) cfg.method = "simple";
      for (const auto& t : thresholds(cfg)) {
        const CalcTree tree = tree_at(m.s.tree, t);
        if (cfg.method == "simple") {
          add(simple_estimate(pools, tree, cfg.r, seed, exec), t);
        } else if (cfg.method == "hierarchical") {
          add(hierarchical_estimate(pools, hierarchical_tree(tree, cfg), seed, exec), t);
        } else if (cfg.method == "plugin") {
          EstimateReport e;
          e.value = plugin_estimate(pools, tree, 10'000'000, exec);
          e.method = "plugin";
          for (const auto& p : pools) e.sizes.push_back(p.size());
          e.seed = seed;
          add(e, t);
        } else {
          usage("unknown --method '" + cfg.method + "' (simple, hierarchical, plugin)");
        }
      }
      break;
    }
    case ScenarioKind::blocks: {
      const Pools pools = make_pools(m, cfg);
      if (pools.size() != m.s.multiplicity.size()) usage("one multiplicity per block pool expected");
      BlockSystem system;
      for (std::size_t i = 0; i < pools.size(); ++i) system.blocks.push_back({pools[i], m.s.multiplicity[i]});
      cfg.method = "block-resampling";
      if (!cfg.t && cfg.t_grid.empty()) usage("block reliability needs --t or --t-grid");
      rep.header.insert(rep.header.end(), {"plugin", "exact"});
      for (const auto& t : thresholds(cfg)) {
        json extra;
        extra["plugin"] = plugin_block_reliability(system, *t);
        std::string exact;
        if (m.samples.empty()) {
          extra["exact"] = block_reliability(m.s.laws, m.s.multiplicity, *t);
          exact = num(extra["exact"].get<double>());
        }
        add(resampling_block_reliability(system, *t, cfg.r, seed, exec), t, extra);
        rep.rows.back().push_back(num(extra["plugin"].get<double>()));
        rep.rows.back().push_back(exact);
      }
      break;
    }
    case ScenarioKind::partial: {
      const Pools pools = make_pools(m, cfg);
      cfg.method = "known-subfunction";
      for (const auto& t : thresholds(cfg)) {
        PartialModel pm{tree_at(m.s.tree, t), m.s.known, pools};
        add(estimate_known_subfunction(pm, cfg.r, seed, exec), t);
      }
      break;
    }
    case ScenarioKind::coverage: {
      const Pools pools = make_pools(m, cfg);
      if (cfg.t || !cfg.t_grid.empty()) usage("rank functionals take no threshold");
      const auto f = m.s.functional;
      auto phi = [f](std::span<const double> x) { return rank_event(f, x) ? 1.0 : 0.0; };
      cfg.method = "simple";
      json extra;
      extra["theta"] = to_double(theta_value(f, pools.size()));
      add(simple_estimate_fn(pools, phi, cfg.r, seed, exec), std::nullopt, extra);
      break;
    }
  }
  return rep;
}

Report cmd_variance(RunConfig& cfg) {
  const Model m = load_model(cfg);
  resolve_common(cfg, m);
  if (m.s.kind != ScenarioKind::tree) usage("variance supports tree models only");
  if (m.s.laws.empty()) usage("variance needs input laws (model.laws)");
  if (cfg.method.empty()) cfg.method = "simple";
  VarianceOptions opt;
  opt.seed = cfg.seed.value_or(1);
  if (!cfg.seed) cfg.seed = opt.seed;
  if (cfg.mc_runs == 0) cfg.mc_runs = opt.mc_runs;
  opt.mc_runs = cfg.mc_runs;
  opt.exec = exec_of(cfg);

  Report rep;
  rep.result = json::array();
  rep.header = {"t", "method", "variance", "standard_error", "mean", "second_moment", "mixed_moment", "classical"};
  for (const auto& t : thresholds(cfg)) {
    const CalcTree tree = tree_at(m.s.tree, t);
    VarianceResult v;
    std::optional<double> classical;
    if (cfg.method == "simple") {
      v = resampling_variance(tree, m.s.laws, cfg.sizes, cfg.r, opt);
      if (tree.arity() == 1 && tree.root().is_leaf())
        classical = single_sample_variance(m.s.laws[0].variance(), cfg.sizes[0], cfg.r).classical;
    } else if (cfg.method == "hierarchical") {
      v = hierarchical_variance(hierarchical_tree(tree, cfg).with_leaf_sizes(cfg.sizes), m.s.laws, opt);
    } else {
      usage("unknown --method '" + cfg.method + "' (simple, hierarchical)");
    }
    json j;
    j["t"] = opt_json(t);
    j["variance"] = v.variance;
    j["standard_error"] = opt_json(v.standard_error);
    j["method"] = v.method;
    j["mean"] = opt_json(v.mean);
    j["second_moment"] = opt_json(v.second_moment);
    j["mixed_moment"] = opt_json(v.mixed_moment);
    j["classical"] = opt_json(classical);
    rep.result.push_back(j);
    rep.rows.push_back({t ? num(*t) : "", v.method, num(v.variance), opt_num(v.standard_error), opt_num(v.mean),
                        opt_num(v.second_moment), opt_num(v.mixed_moment), opt_num(classical)});
  }
  return rep;
}

Report cmd_optimize(RunConfig& cfg) {
  const Model m = load_model(cfg);
  resolve_common(cfg, m);
  if (m.s.kind != ScenarioKind::tree) usage("optimize supports tree models only");
  if (m.s.laws.empty()) usage("optimize needs input laws (model.laws)");
  if (cfg.t_grid.size() > 0) usage("optimize takes a single --t");
  const CalcTree tree = tree_at(m.s.tree, cfg.t);
  std::vector<std::size_t> weights = cfg.weights;
  if (weights.empty()) weights = {1};
  if (weights.size() == 1) weights.assign(tree.size(), weights[0]);
  cfg.weights = weights;
  OptimizerConfig oc = make_config(tree, m.s.laws, weights, cfg.budget);
  if (cfg.advance == "parent")
    oc.advance = AdvanceSize::parent;
  else if (cfg.advance == "child")
    oc.advance = AdvanceSize::child;
  else
    usage("--advance must be parent or child");
  if (cfg.leaf_covariance == "resampled")
    oc.leaf_covariance = LeafCovariance::resampled;
  else if (cfg.leaf_covariance == "zero")
    oc.leaf_covariance = LeafCovariance::zero;
  else
    usage("--leaf-cov must be resampled or zero");
  oc.free_size_cap = cfg.free_size_cap;

  const auto best = bellman_optimize(oc);
  std::size_t total_weight = 0;
  for (auto a : weights) total_weight += a;
  std::optional<double> equal;
  std::optional<std::size_t> equal_n;
  if (total_weight > 0 && cfg.budget / total_weight >= 1) {
    equal_n = cfg.budget / total_weight;
    equal = allocation_variance(oc, std::vector<std::size_t>(tree.size(), *equal_n));
  }

  Report rep;
  json nodes = json::array();
  for (const auto& v : tree.nodes()) {
    json n;
    n["id"] = v.id;
    n["kind"] = to_string(v.kind);
    if (v.is_leaf()) n["input"] = "x" + std::to_string(v.input + 1);
    n["weight"] = weights[v.id];
    n["size"] = best.allocation[v.id];
    nodes.push_back(n);
    rep.rows.push_back({num(v.id), to_string(v.kind), v.is_leaf() ? "x" + std::to_string(v.input + 1) : "",
                        num(weights[v.id]), num(best.allocation[v.id]), num(best.variance), num(best.cost)});
  }
  rep.header = {"node", "kind", "input", "weight", "size", "variance", "cost"};
  rep.result["variance"] = best.variance;
  rep.result["cost"] = best.cost;
  rep.result["allocation"] = best.allocation;
  rep.result["nodes"] = nodes;
  rep.result["table_cells"] = best.table_cells;
  rep.result["equal_allocation_size"] = equal_n ? json(*equal_n) : json(nullptr);
  rep.result["equal_allocation_variance"] = opt_json(equal);
  rep.result["tree"] = tree.to_string();
  return rep;
}

Report cmd_partial(RunConfig& cfg) {
  const Model m = load_model(cfg);
  resolve_common(cfg, m);
  if (m.s.kind != ScenarioKind::partial) usage("partial needs a model with known inputs (kind = partial)");
  const auto seed = require_seed(cfg);
  const Pools pools = make_pools(m, cfg);
  Report rep;
  rep.result = json::array();
  rep.header = {"t", "method", "value", "standard_error", "replications", "N", "seed"};
  for (const auto& t : thresholds(cfg)) {
    PartialModel pm{tree_at(m.s.tree, t), m.s.known, pools};
    EstimateReport e;
    json extra;
    if (cfg.situation == "known") {
      e = estimate_known_subfunction(pm, cfg.r, seed, exec_of(cfg));
      static const char* names[] = {"identity", "closed-form", "enumeration"};
      extra["conditional"] = names[static_cast<int>(conditional_method(pm))];
    } else if (cfg.situation == "simulated") {
      e = estimate_simulated_subfunction(pm, cfg.r, cfg.replicates, seed, exec_of(cfg));
      extra["N"] = cfg.replicates;
    } else {
      usage("--situation must be known or simulated");
    }
    json j = estimate_json(e, t);
    for (auto& [k, v] : extra.items()) j[k] = v;
    rep.result.push_back(j);
    rep.rows.push_back({t ? num(*t) : "", e.method, num(e.value), opt_num(e.standard_error), num(e.replications),
                        cfg.situation == "simulated" ? num(cfg.replicates) : "", std::to_string(seed)});
  }
  return rep;
}

Report cmd_coverage(RunConfig& cfg) {
  const Model m = load_model(cfg, false);
  const bool has_model = !m.s.name.empty();
  if (has_model && m.s.kind != ScenarioKind::coverage) usage("coverage needs a rank-functional model");
  if (cfg.sizes.empty()) cfg.sizes = has_model ? m.s.sizes : std::vector<std::size_t>{3, 3, 3};
  if (cfg.r == 0) cfg.r = has_model ? m.s.r : 10;
  if (cfg.gamma == 0.0) cfg.gamma = has_model ? m.s.gamma : 0.9;
  if (cfg.functional.empty()) cfg.functional = to_string(has_model ? m.s.functional : RankFunctional::min_selection);
  if (cfg.exact && cfg.mc_runs) usage("give either --exact or --mc RUNS");
  if (!cfg.mc_runs) cfg.exact = true;

  CoverageConfig cc{cfg.sizes, cfg.gamma, cfg.r, parse_functional(cfg.functional), cfg.batch};
  check_coverage_config(cc);
  CoverageResult res;
  if (cfg.exact) {
    CoverageOptions opt;
    opt.exec = exec_of(cfg);
    opt.seed = cfg.seed.value_or(1);
    res = actual_coverage(cc, opt);
  } else {
    const auto seed = require_seed(cfg);
    if (cfg.mc_mode == "protocol")
      res = coverage_protocol_mc(cc, cfg.mc_runs, seed, exec_of(cfg));
    else if (cfg.mc_mode == "simulation")
      res = coverage_simulation_mc(cc, cfg.mc_runs, seed, exec_of(cfg));
    else
      usage("--mc-mode must be protocol or simulation");
  }
  Report rep;
  rep.result["coverage"] = res.coverage;
  rep.result["standard_error"] = opt_json(res.standard_error);
  rep.result["method"] = res.method;
  rep.result["k"] = res.k;
  rep.result["theta"] = res.theta;
  rep.result["runs"] = res.runs;
  rep.header = {"sizes", "gamma", "r", "functional", "k", "theta", "method", "coverage", "standard_error"};
  rep.rows.push_back({join_sizes(cfg.sizes), num(cfg.gamma), num(cfg.r), cfg.functional, num(res.k), num(res.theta),
                      res.method, num(res.coverage), opt_num(res.standard_error)});
  return rep;
}

// Reproductions ---------------------------------------------------------------

Report reproduce_table1() {
  Report rep;
  rep.header = {"n", "classical", "resampling"};
  rep.result = json::array();
  const double sigma2 = 781.25;
  const std::size_t r = 50;
  for (std::size_t n : {1, 2, 3, 5, 8, 10, 13, 15}) {
    const auto v = single_sample_variance(sigma2, n, r);
    rep.rows.push_back({num(n), num(v.classical), num(v.resampling)});
    rep.result.push_back({{"n", n}, {"classical", v.classical}, {"resampling", v.resampling}});
  }
  return rep;
}

struct Table5Row {
  std::vector<double> rates;
  std::size_t budget;
};

const std::vector<Table5Row>& table5_rows() {
  static const std::vector<Table5Row> rows{
      {{0.1, 0.7, 0.2, 0.4, 0.8, 0.5}, 50},
      {{0.2, 0.2, 0.4, 0.4, 0.8, 0.8}, 60},
      {{0.2, 0.3, 1.0, 1.2, 0.5, 0.3}, 50},
      {{1.2, 0.1, 0.3, 2.1, 0.1, 1.5}, 50},
  };
  return rows;
}

Report reproduce_table5() {
  Report rep;
  rep.header = {"row", "rates", "budget", "optimized", "equal_allocation", "improvement_pct", "allocation"};
  rep.result = json::array();
  const CalcTree tree = load_scenario("hier-query").tree;
  for (std::size_t i = 0; i < table5_rows().size(); ++i) {
    const auto& row = table5_rows()[i];
    std::vector<Distribution> laws;
    for (double l : row.rates) laws.push_back(Distribution::exponential(l));
    const auto oc = make_config(tree, laws, std::vector<std::size_t>(tree.size(), 1), row.budget);
    const auto best = bellman_optimize(oc);
    const double equal = allocation_variance(oc, std::vector<std::size_t>(tree.size(), row.budget / tree.size()));
    const double pct = 100.0 * (equal - best.variance) / equal;
    std::string rates;
    for (std::size_t k = 0; k < row.rates.size(); ++k) rates += (k ? " " : "") + num(row.rates[k]);
    rep.rows.push_back({num(i + 1), rates, num(row.budget), num(best.variance), num(equal), num(pct),
                        join_sizes(best.allocation)});
    rep.result.push_back({{"row", i + 1},
                          {"rates", row.rates},
                          {"budget", row.budget},
                          {"optimized", best.variance},
                          {"equal_allocation", equal},
                          {"improvement_pct", pct},
                          {"allocation", best.allocation}});
  }
  return rep;
}

Report reproduce_scan(RankFunctional f, const RunConfig& cfg) {
  Report rep;
  rep.header = {"sizes", "best_r", "max_deviation"};
  for (double g : reference_gammas()) rep.header.push_back("computed_" + num(g));
  for (double g : reference_gammas()) rep.header.push_back("reference_" + num(g));
  rep.result = json::array();
  for (const auto& row : scan_reference(f, cfg.r_min, cfg.r_max, cfg.batch)) {
    std::vector<std::string> line{join_sizes(row.sizes), num(row.best_r), num(row.max_deviation)};
    for (double c : row.computed) line.push_back(num(c));
    for (double c : row.reference) line.push_back(num(c));
    rep.rows.push_back(line);
    rep.result.push_back({{"sizes", row.sizes},
                          {"best_r", row.best_r},
                          {"max_deviation", row.max_deviation},
                          {"computed", row.computed},
                          {"reference", row.reference}});
  }
  return rep;
}

// Unknown laws everywhere against known z laws: spread of the estimators
// over repeated samples, per pool size.
Report reproduce_partial_comparison(RunConfig& cfg) {
  const auto seed = require_seed(cfg);
  const Scenario s = load_scenario("hier-query-partial");
  const double t = *s.t;
  const std::size_t repetitions = 200;
  const std::size_t r = cfg.r ? cfg.r : 200;
  cfg.r = r;
  // All six inputs sampled: the z leaves become x4..x6.
  const CalcTree unknown_tree = CalcTree::parse("gt[t=" + num(t) + "](min(max(x1,x4),x2,x5,sum(x3,x6)))");
  std::vector<Distribution> all_laws = s.laws;
  all_laws.insert(all_laws.end(), s.known.begin(), s.known.end());

  Report rep;
  rep.header = {"n", "unknown_variance", "partial_variance"};
  rep.result = json::array();
  for (std::size_t n : {2, 3, 5, 8, 10, 15, 20}) {
    RunningMoments unknown, partial;
    for (std::size_t k = 0; k < repetitions; ++k) {
      const std::uint64_t rep_seed = stream_seed(seed, n * 1000 + k);
      const Pools all = draw_pools(all_laws, std::vector<std::size_t>(6, n), stream_seed(rep_seed, kDataStream));
      unknown.add(simple_estimate(all, unknown_tree, r, rep_seed, exec_of(cfg)).value);
      const Pools xs(all.begin(), all.begin() + 3);
      PartialModel pm{s.tree, s.known, xs};
      partial.add(estimate_known_subfunction(pm, r, rep_seed, exec_of(cfg)).value);
    }
    const double m = static_cast<double>(repetitions);
    auto var = [m](const RunningMoments& acc) {
      const double mean = acc.sum.value() / m;
      return std::max(0.0, (acc.sum_sq.value() - m * mean * mean) / (m - 1.0));
    };
    rep.rows.push_back({num(n), num(var(unknown)), num(var(partial))});
    rep.result.push_back({{"n", n}, {"unknown_variance", var(unknown)}, {"partial_variance", var(partial)}});
  }
  return rep;
}

Report cmd_reproduce(RunConfig& cfg) {
  if (cfg.table == "table1") return reproduce_table1();
  if (cfg.table == "table5-direction") return reproduce_table5();
  if (cfg.table == "table6-scan") return reproduce_scan(RankFunctional::min_selection, cfg);
  if (cfg.table == "table7-scan") return reproduce_scan(RankFunctional::ordering, cfg);
  if (cfg.table == "partial-comparison") return reproduce_partial_comparison(cfg);
  usage("unknown table '" + cfg.table +
        "' (table1, table5-direction, table6-scan, table7-scan, partial-comparison)");
}

Report cmd_list(RunConfig& cfg, std::ostream& out, bool& printed) {
  if (!cfg.export_name.empty()) {
    out << export_ini(load_scenario(cfg.export_name));
    printed = true;
    return {};
  }
  Report rep;
  rep.header = {"name", "kind", "doc"};
  rep.result = json::array();
  for (const auto& info : list_scenarios()) {
    const auto kind = to_string(load_scenario(info.name).kind);
    rep.rows.push_back({info.name, kind, info.doc});
    rep.result.push_back({{"name", info.name}, {"kind", kind}, {"doc", info.doc}});
  }
  return rep;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::cap_exceeded:
    case ErrorKind::infeasible:
    case ErrorKind::tied_values:
    case ErrorKind::unsupported:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Resampling estimators for functions of random inputs", "resamplex"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto common = [&](CLI::App* sub, bool model = true) {
    if (model) {
      sub->add_option("--scenario", cfg.scenario, "Catalog scenario name (see 'list')");
      sub->add_option("--config", cfg.config_path, "Model file (INI-style key = value sections, or JSON)");
    }
    sub->add_option("--seed", cfg.seed, "Master seed (64-bit)");
    sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--output", cfg.output, "Write the report to this file instead of stdout");
    sub->add_flag("--serial", cfg.serial, "Run the serial reference kernels");
  };
  auto sizes_opt = [&](CLI::App* sub) {
    sub->add_option("--sizes", cfg.sizes, "Sample sizes n_1,...,n_m")->delimiter(',');
  };
  auto t_opts = [&](CLI::App* sub) {
    sub->add_option("--t", cfg.t, "Threshold t");
    sub->add_option("--t-grid", cfg.t_grid, "Comma-separated thresholds")->delimiter(',');
  };

  auto* estimate = app.add_subcommand("estimate", "Point estimate of E phi");
  common(estimate);
  sizes_opt(estimate);
  t_opts(estimate);
  estimate->add_option("--r", cfg.r, "Realizations");
  estimate->add_option("--method", cfg.method, "simple, hierarchical or plugin");
  estimate->add_option("--internal-size", cfg.internal_size, "Sample size of every internal node (hierarchical)");

  auto* variance = app.add_subcommand("variance", "Variance of the resampling estimator");
  common(variance);
  sizes_opt(variance);
  t_opts(variance);
  variance->add_option("--r", cfg.r, "Realizations");
  variance->add_option("--method", cfg.method, "simple or hierarchical");
  variance->add_option("--internal-size", cfg.internal_size, "Sample size of every internal node (hierarchical)");
  variance->add_option("--mc-runs", cfg.mc_runs, "Monte Carlo runs when exact evaluation is out of reach");

  auto* optimize = app.add_subcommand("optimize", "Optimal node sample sizes under a budget");
  common(optimize);
  optimize->add_option("--t", cfg.t, "Threshold t");
  optimize->add_option("--budget", cfg.budget, "Budget b")->required();
  optimize->add_option("--weights", cfg.weights, "Per-node costs a_v (one value applies to all)")->delimiter(',');
  optimize->add_option("--advance", cfg.advance, "Size driving alpha + (1 - alpha)/n: parent or child");
  optimize->add_option("--leaf-cov", cfg.leaf_covariance, "Leaf covariance model: resampled or zero");
  optimize->add_option("--free-cap", cfg.free_size_cap, "Size bound for zero-cost nodes");

  auto* partial = app.add_subcommand("partial", "Estimators with known-law inputs");
  common(partial);
  sizes_opt(partial);
  t_opts(partial);
  partial->add_option("--r", cfg.r, "Realizations");
  partial->add_option("--situation", cfg.situation, "known (conditional expectation) or simulated");
  partial->add_option("--replicates", cfg.replicates, "N known-input replicates per realization (simulated)");

  auto* coverage = app.add_subcommand("coverage", "Actual coverage of the resampling upper bound");
  common(coverage);
  sizes_opt(coverage);
  coverage->add_option("--gamma", cfg.gamma, "Confidence level in (0, 1)");
  coverage->add_option("--r", cfg.r, "Realizations");
  coverage->add_option("--functional", cfg.functional, "min-selection or ordering");
  coverage->add_option("--batch", cfg.batch, "Draws averaged per realization");
  coverage->add_flag("--exact", cfg.exact, "Exact protocol computation (default)");
  coverage->add_option("--mc", cfg.mc_runs, "Monte Carlo with this many runs");
  coverage->add_option("--mc-mode", cfg.mc_mode, "protocol or simulation");

  auto* reproduce = app.add_subcommand("reproduce", "Reproduce a reference table");
  common(reproduce, false);
  reproduce->add_option("table", cfg.table, "table1, table5-direction, table6-scan, table7-scan, partial-comparison")
      ->required();
  reproduce->add_option("--r", cfg.r, "Realizations (partial-comparison)");
  reproduce->add_option("--r-min", cfg.r_min, "Scan start");
  reproduce->add_option("--r-max", cfg.r_max, "Scan end");
  reproduce->add_option("--batch", cfg.batch, "Draws averaged per realization (scans)");

  auto* list = app.add_subcommand("list", "List catalog scenarios");
  list->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  list->add_option("--export", cfg.export_name, "Print the named scenario as a model file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    Report rep;
    bool printed = false;
    if (estimate->parsed()) {
      cfg.command = "estimate";
      rep = cmd_estimate(cfg);
    } else if (variance->parsed()) {
      cfg.command = "variance";
      rep = cmd_variance(cfg);
    } else if (optimize->parsed()) {
      cfg.command = "optimize";
      rep = cmd_optimize(cfg);
    } else if (partial->parsed()) {
      cfg.command = "partial";
      rep = cmd_partial(cfg);
    } else if (coverage->parsed()) {
      cfg.command = "coverage";
      rep = cmd_coverage(cfg);
    } else if (reproduce->parsed()) {
      cfg.command = "reproduce";
      if (reproduce->get_option("--format")->count() == 0) cfg.format = "csv";
      rep = cmd_reproduce(cfg);
    } else {
      cfg.command = "list";
      rep = cmd_list(cfg, out, printed);
    }
    if (!printed) emit(cfg, rep, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  }
}

}  // namespace resamplex

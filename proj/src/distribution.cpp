#include "resamplex/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "resamplex/error.hpp"
#include "text.hpp"

namespace resamplex {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Distribution Distribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    fail(ErrorKind::invalid_argument, "exponential rate must be positive and finite");
  return Distribution(Exponential{rate});
}

Distribution Distribution::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    fail(ErrorKind::invalid_argument, "uniform requires finite lo < hi");
  return Distribution(Uniform{lo, hi});
}

Distribution Distribution::discrete(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    fail(ErrorKind::invalid_argument, "discrete law needs matching non-empty values and probabilities");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) fail(ErrorKind::invalid_argument, "discrete probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    fail(ErrorKind::invalid_argument, "discrete probabilities must sum to 1");
  for (double v : values)
    if (std::isnan(v)) fail(ErrorKind::invalid_argument, "discrete values must not be NaN");
  return Distribution(Discrete{std::move(values), std::move(probs)});
}

Distribution Distribution::equiprobable(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "equiprobable law needs values");
  std::vector<double> probs(values.size(), 1.0 / static_cast<double>(values.size()));
  return discrete(std::move(values), std::move(probs));
}

Distribution Distribution::point(double value) { return discrete({value}, {1.0}); }

Distribution Distribution::empirical(std::vector<double> sample) {
  if (sample.empty()) fail(ErrorKind::invalid_argument, "empirical law needs a non-empty sample");
  for (double v : sample)
    if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "empirical sample values must be finite");
  return Distribution(Empirical{std::move(sample)});
}

Distribution Distribution::parse(std::string_view text) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    fail(ErrorKind::parse, "bad distribution '" + std::string(text) + "'");
  const std::string kind = detail::trim(text.substr(0, open));
  const auto args = detail::split(text.substr(open + 1, close - open - 1), ',');
  auto num = [&](std::size_t i) { return detail::parse_double(args.at(i)); };

  if (kind == "exponential" || kind == "exp") {
    if (args.size() != 1) fail(ErrorKind::parse, "exponential takes one rate");
    return exponential(num(0));
  }
  if (kind == "uniform") {
    if (args.size() != 2) fail(ErrorKind::parse, "uniform takes lo,hi");
    return uniform(num(0), num(1));
  }
  if (kind == "point") {
    if (args.size() != 1) fail(ErrorKind::parse, "point takes one value");
    return point(num(0));
  }
  if (kind == "empirical") {
    std::vector<double> v;
    for (std::size_t i = 0; i < args.size(); ++i) v.push_back(num(i));
    return empirical(std::move(v));
  }
  if (kind == "discrete") {
    std::vector<double> values, probs;
    for (const auto& a : args) {
      const auto colon = a.find(':');
      if (colon == std::string::npos) fail(ErrorKind::parse, "discrete entries are value:prob");
      values.push_back(detail::parse_double(a.substr(0, colon)));
      probs.push_back(detail::parse_double(a.substr(colon + 1)));
    }
    return discrete(std::move(values), std::move(probs));
  }
  fail(ErrorKind::parse, "unknown distribution kind '" + kind + "'");
}

double Distribution::mean() const {
  return std::visit(overloaded{
                        [](const Exponential& e) { return 1.0 / e.rate; },
                        [](const Uniform& u) { return 0.5 * (u.lo + u.hi); },
                        [](const Discrete& d) {
                          double m = 0.0;
                          for (std::size_t i = 0; i < d.values.size(); ++i)
                            if (d.probs[i] > 0.0) m += d.probs[i] * d.values[i];
                          return m;
                        },
                        [](const Empirical& e) {
                          return std::accumulate(e.sample.begin(), e.sample.end(), 0.0) /
                                 static_cast<double>(e.sample.size());
                        },
                    },
                    law_);
}

double Distribution::variance() const {
  const double mu = mean();
  return std::visit(overloaded{
                        [](const Exponential& e) { return 1.0 / (e.rate * e.rate); },
                        [](const Uniform& u) { return (u.hi - u.lo) * (u.hi - u.lo) / 12.0; },
                        [mu](const Discrete& d) {
                          if (d.values.size() == 1) return 0.0;
                          double v = 0.0;
                          for (std::size_t i = 0; i < d.values.size(); ++i)
                            if (d.probs[i] > 0.0) v += d.probs[i] * (d.values[i] - mu) * (d.values[i] - mu);
                          return v;
                        },
                        [mu](const Empirical& e) {
                          double v = 0.0;
                          for (double x : e.sample) v += (x - mu) * (x - mu);
                          return v / static_cast<double>(e.sample.size());
                        },
                    },
                    law_);
}

double Distribution::cdf(double x) const {
  return std::visit(overloaded{
                        [x](const Exponential& e) { return x <= 0.0 ? 0.0 : -std::expm1(-e.rate * x); },
                        [x](const Uniform& u) {
                          if (x <= u.lo) return 0.0;
                          if (x >= u.hi) return 1.0;
                          return (x - u.lo) / (u.hi - u.lo);
                        },
                        [x](const Discrete& d) {
                          double f = 0.0;
                          for (std::size_t i = 0; i < d.values.size(); ++i)
                            if (d.values[i] <= x) f += d.probs[i];
                          return std::min(f, 1.0);
                        },
                        [x](const Empirical& e) {
                          const auto below = std::count_if(e.sample.begin(), e.sample.end(),
                                                           [x](double v) { return v <= x; });
                          return static_cast<double>(below) / static_cast<double>(e.sample.size());
                        },
                    },
                    law_);
}

double Distribution::quantile(double u) const {
  return std::visit(overloaded{
                        [u](const Exponential& e) { return -std::log1p(-u) / e.rate; },
                        [u](const Uniform& un) { return un.lo + u * (un.hi - un.lo); },
                        [](const Discrete&) -> double {
                          fail(ErrorKind::unsupported, "quantile is defined for continuous laws only");
                        },
                        [](const Empirical&) -> double {
                          fail(ErrorKind::unsupported, "quantile is defined for continuous laws only");
                        },
                    },
                    law_);
}

bool Distribution::is_finite() const {
  return std::holds_alternative<Discrete>(law_) || std::holds_alternative<Empirical>(law_);
}

std::vector<std::pair<double, double>> Distribution::support() const {
  std::vector<std::pair<double, double>> out;
  if (const auto* d = std::get_if<Discrete>(&law_)) {
    for (std::size_t i = 0; i < d->values.size(); ++i)
      if (d->probs[i] > 0.0) out.emplace_back(d->values[i], d->probs[i]);
  } else if (const auto* e = std::get_if<Empirical>(&law_)) {
    const double p = 1.0 / static_cast<double>(e->sample.size());
    for (double v : e->sample) out.emplace_back(v, p);
  } else {
    fail(ErrorKind::unsupported, "law " + describe() + " has no finite support");
  }
  return out;
}

double Distribution::lower_support() const {
  return std::visit(overloaded{
                        [](const Exponential&) { return 0.0; },
                        [](const Uniform& u) { return u.lo; },
                        [](const Discrete& d) {
                          double lo = std::numeric_limits<double>::infinity();
                          for (std::size_t i = 0; i < d.values.size(); ++i)
                            if (d.probs[i] > 0.0) lo = std::min(lo, d.values[i]);
                          return lo;
                        },
                        [](const Empirical& e) { return *std::min_element(e.sample.begin(), e.sample.end()); },
                    },
                    law_);
}

std::string Distribution::describe() const {
  using detail::format_double;
  std::string out;
  std::visit(overloaded{
                 [&](const Exponential& e) { out = "exponential(" + format_double(e.rate) + ")"; },
                 [&](const Uniform& u) { out = "uniform(" + format_double(u.lo) + "," + format_double(u.hi) + ")"; },
                 [&](const Discrete& d) {
                   if (d.values.size() == 1) {
                     out = "point(" + format_double(d.values[0]) + ")";
                     return;
                   }
                   out = "discrete(";
                   for (std::size_t i = 0; i < d.values.size(); ++i)
                     out += (i ? "," : "") + format_double(d.values[i]) + ":" + format_double(d.probs[i]);
                   out += ")";
                 },
                 [&](const Empirical& e) {
                   out = "empirical(";
                   for (std::size_t i = 0; i < e.sample.size(); ++i) out += (i ? "," : "") + format_double(e.sample[i]);
                   out += ")";
                 },
             },
             law_);
  return out;
}

}  // namespace resamplex

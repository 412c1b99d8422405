#pragma once

#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace resamplex {

struct Exponential {
  double rate;
};

struct Uniform {
  double lo;
  double hi;
};

struct Discrete {
  std::vector<double> values;
  std::vector<double> probs;
};

struct Empirical {
  std::vector<double> sample;
};

/// An input law: exponential, uniform, finite-discrete, or the empirical law
/// of an observed sample. Immutable after construction.
class Distribution {
public:
  static Distribution exponential(double rate);
  static Distribution uniform(double lo, double hi);
  static Distribution discrete(std::vector<double> values, std::vector<double> probs);
  /// Equiprobable finite law over `values`.
  static Distribution equiprobable(std::vector<double> values);
  static Distribution point(double value);
  static Distribution empirical(std::vector<double> sample);

  /// Parses "exponential(2)", "uniform(0,1)", "discrete(0:0.5,2:0.5)",
  /// "point(3)" or "empirical(1,2,3)".
  static Distribution parse(std::string_view text);

  double mean() const;
  double variance() const;
  double cdf(double x) const;
  double survival(double x) const { return 1.0 - cdf(x); }
  /// Inverse CDF on (0,1); continuous laws only.
  double quantile(double u) const;

  bool is_finite() const;
  /// Support points with probabilities. Finite laws only; empirical samples
  /// contribute one entry per element.
  std::vector<std::pair<double, double>> support() const;
  double lower_support() const;

  std::string describe() const;

  template <class URBG>
  double sample(URBG& rng) const;

  const auto& law() const { return law_; }

private:
  using Law = std::variant<Exponential, Uniform, Discrete, Empirical>;
  explicit Distribution(Law law) : law_(std::move(law)) {}
  Law law_;
};

template <class URBG>
double Distribution::sample(URBG& rng) const {
  struct Visitor {
    URBG& rng;
    double operator()(const Exponential& e) const {
      return std::exponential_distribution<double>(e.rate)(rng);
    }
    double operator()(const Uniform& u) const {
      return std::uniform_real_distribution<double>(u.lo, u.hi)(rng);
    }
    double operator()(const Discrete& d) const {
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < d.values.size(); ++i) {
        acc += d.probs[i];
        if (u < acc) return d.values[i];
      }
      return d.values.back();
    }
    double operator()(const Empirical& e) const {
      std::uniform_int_distribution<std::size_t> pick(0, e.sample.size() - 1);
      return e.sample[pick(rng)];
    }
  };
  return std::visit(Visitor{rng}, law_);
}

}  // namespace resamplex

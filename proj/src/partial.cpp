#include "resamplex/partial.hpp"

#include <algorithm>
#include <cmath>

namespace resamplex {

namespace {

bool is_input(const TreeNode& v, InputKind kind) { return v.is_leaf() && v.input_kind == kind; }

bool all_finite(const std::vector<Distribution>& laws) {
  return std::all_of(laws.begin(), laws.end(), [](const auto& l) { return l.is_finite(); });
}

template <class Reduce>
EstimateReport chunked_report(std::size_t r, std::uint64_t seed, Execution exec, const Pools& pools,
                              const char* method, Reduce&& realization_chunk) {
  const std::size_t chunks = chunk_count(r);
  std::vector<RunningMoments> partial(chunks);
  for_each_chunk(chunks, exec, [&](std::size_t c) {
    RngSource src(seed, c);
    const std::size_t count = std::min(kChunk, r - c * kChunk);
    realization_chunk(count, src, partial[c]);
  });
  RunningMoments total;
  for (const auto& p : partial) {
    total.sum.add(p.sum.value());
    total.sum_sq.add(p.sum_sq.value());
  }
  EstimateReport rep;
  const double rr = static_cast<double>(r);
  rep.value = total.sum.value() / rr;
  rep.method = method;
  rep.replications = r;
  for (const auto& p : pools) rep.sizes.push_back(p.size());
  rep.seed = seed;
  if (r > 1) {
    const double var = std::max(0.0, (total.sum_sq.value() - rr * rep.value * rep.value) / (rr - 1.0));
    rep.standard_error = std::sqrt(var / rr);
  }
  return rep;
}

}  // namespace

void check_model(const PartialModel& model) {
  if (model.pools.size() != model.tree.arity())
    fail(ErrorKind::arity_mismatch, "tree has " + std::to_string(model.tree.arity()) + " sampled inputs but " +
                                        std::to_string(model.pools.size()) + " pools were given");
  if (model.known.size() != model.tree.known_arity())
    fail(ErrorKind::arity_mismatch, "tree has " + std::to_string(model.tree.known_arity()) + " known inputs but " +
                                        std::to_string(model.known.size()) + " laws were given");
}

std::optional<QueryForm> match_query_form(const CalcTree& tree) {
  const auto& root = tree.root();
  if (root.kind != NodeKind::indicator_greater) return std::nullopt;
  const auto& mn = tree.node(root.children[0]);
  if (mn.kind != NodeKind::min || mn.children.size() != 4) return std::nullopt;
  const auto& mx = tree.node(mn.children[0]);
  const auto& xb = tree.node(mn.children[1]);
  const auto& zq = tree.node(mn.children[2]);
  const auto& sm = tree.node(mn.children[3]);
  if (mx.kind != NodeKind::max || mx.children.size() != 2) return std::nullopt;
  if (sm.kind != NodeKind::sum || sm.children.size() != 2) return std::nullopt;
  const auto& xa = tree.node(mx.children[0]);
  const auto& zp = tree.node(mx.children[1]);
  const auto& xc = tree.node(sm.children[0]);
  const auto& zs = tree.node(sm.children[1]);
  if (!is_input(xa, InputKind::sampled) || !is_input(xb, InputKind::sampled) || !is_input(xc, InputKind::sampled) ||
      !is_input(zp, InputKind::known) || !is_input(zq, InputKind::known) || !is_input(zs, InputKind::known))
    return std::nullopt;
  return QueryForm{xa.input, xb.input, xc.input, zp.input, zq.input, zs.input, root.threshold};
}

double query_conditional_expectation(const QueryForm& f, const std::vector<Distribution>& known,
                                     std::span<const double> x) {
  const double t = f.t;
  if (!(x[f.x_direct] > t)) return 0.0;
  const double first = x[f.x_max] > t ? 1.0 : known[f.z_max].survival(t);
  const double last = x[f.x_sum] > t ? 1.0 : known[f.z_sum].survival(t - x[f.x_sum]);
  return first * known[f.z_direct].survival(t) * last;
}

ConditionalMethod conditional_method(const PartialModel& model) {
  if (model.tree.known_arity() == 0) return ConditionalMethod::identity;
  if (auto form = match_query_form(model.tree); form && model.known.at(form->z_sum).lower_support() >= 0.0)
    return ConditionalMethod::closed_form;
  if (all_finite(model.known)) return ConditionalMethod::enumeration;
  fail(ErrorKind::unsupported,
       "no closed-form conditional expectation for this tree and known laws; use the simulated estimator");
}

ConditionalEvaluator::ConditionalEvaluator(const PartialModel& model, std::size_t enumeration_cap)
    : model_(&model), method_(conditional_method(model)), scratch_(model.tree.size()) {
  check_model(model);
  if (method_ == ConditionalMethod::closed_form) form_ = match_query_form(model.tree);
  if (method_ == ConditionalMethod::enumeration) {
    std::size_t total = 1;
    for (const auto& law : model.known) {
      support_.push_back(law.support());
      total *= support_.back().size();
      if (total > enumeration_cap)
        fail(ErrorKind::cap_exceeded, "known-law support product exceeds " + std::to_string(enumeration_cap));
    }
    z_.resize(model.known.size());
    digit_.resize(model.known.size());
  }
}

double ConditionalEvaluator::operator()(std::span<const double> x) {
  switch (method_) {
    case ConditionalMethod::identity:
      return model_->tree.eval<double>(x, {}, std::span<double>(scratch_));
    case ConditionalMethod::closed_form:
      return query_conditional_expectation(*form_, model_->known, x);
    case ConditionalMethod::enumeration:
      break;
  }
  std::fill(digit_.begin(), digit_.end(), 0);
  CompensatedSum s;
  for (;;) {
    double p = 1.0;
    for (std::size_t j = 0; j < support_.size(); ++j) {
      z_[j] = support_[j][digit_[j]].first;
      p *= support_[j][digit_[j]].second;
    }
    s.add(p * model_->tree.eval<double>(x, std::span<const double>(z_), std::span<double>(scratch_)));
    std::size_t j = 0;
    for (; j < digit_.size(); ++j) {
      if (++digit_[j] < support_[j].size()) break;
      digit_[j] = 0;
    }
    if (j == digit_.size()) break;
  }
  return s.value();
}

double conditional_expectation(const PartialModel& model, std::span<const double> x) {
  if (x.size() != model.tree.arity()) fail(ErrorKind::arity_mismatch, "one value per sampled input expected");
  ConditionalEvaluator ce(model);
  return ce(x);
}

EstimateReport estimate_known_subfunction(const PartialModel& model, std::size_t r, std::uint64_t seed,
                                          Execution exec) {
  check_model(model);
  if (r == 0) fail(ErrorKind::invalid_argument, "replication count r must be at least 1");
  const ConditionalEvaluator proto(model);
  return chunked_report(r, seed, exec, model.pools, "known-subfunction",
                        [&](std::size_t count, RngSource& src, RunningMoments& acc) {
                          ConditionalEvaluator ce = proto;
                          kernel::simple_realizations(model.pools, ce, count, src, acc);
                        });
}

EstimateReport estimate_simulated_subfunction(const PartialModel& model, std::size_t r, std::size_t replicates,
                                              std::uint64_t seed, Execution exec) {
  check_model(model);
  if (r == 0 || replicates == 0) fail(ErrorKind::invalid_argument, "r and N must be at least 1");
  return chunked_report(r, seed, exec, model.pools, "simulated-subfunction",
                        [&](std::size_t count, RngSource& src, RunningMoments& acc) {
                          std::vector<double> x(model.pools.size()), z(model.known.size()), scratch(model.tree.size());
                          for (std::size_t l = 0; l < count; ++l)
                            acc.add(kernel::simulated_realization(model, replicates, src, x, z, scratch));
                        });
}

}  // namespace resamplex

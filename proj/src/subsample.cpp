#include "dsubcox/subsample.hpp"

#include "dsubcox/errors.hpp"
#include "dsubcox/linalg.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace dsubcox {

namespace {

std::string format_iterate(const Vector& beta) {
  std::string out = "[";
  for (Index j = 0; j < beta.size(); ++j) {
    if (j > 0) out += ", ";
    out += std::to_string(beta[j]);
  }
  return out + "]";
}

}  // namespace

void validate(const SamplingPlan& plan) {
  const Index n = plan.probabilities.size();
  if (n == 0) throw std::invalid_argument("sampling plan: empty");
  if (!(plan.delta >= 0.0 && plan.delta <= 1.0))
    throw std::invalid_argument("sampling plan: delta must lie in [0,1]");
  for (Index i = 0; i < n; ++i) {
    const double pi = plan.probabilities[i];
    if (!(pi > 0.0 && pi <= 1.0))
      throw std::invalid_argument("sampling plan: probabilities must lie in (0,1]");
  }
  if (std::abs(compensated_sum(plan.probabilities) - 1.0) > 1e-10)
    throw std::invalid_argument("sampling plan: probabilities must sum to one");
  const double floor_mass = plan.delta / static_cast<double>(n);
  if (plan.kind == PlanKind::Optimal) {
    if (plan.probabilities.minCoeff() < floor_mass * (1.0 - 1e-12))
      throw std::invalid_argument("sampling plan: optimal probabilities fell below delta/n");
  } else {
    const double uniform_mass = 1.0 / static_cast<double>(n);
    if ((plan.probabilities.array() != uniform_mass).any())
      throw std::invalid_argument("sampling plan: uniform plan must assign 1/n everywhere");
  }
}

SamplingPlan uniform_plan(Index n) {
  if (n < 1) throw std::invalid_argument("uniform_plan: n must be >= 1");
  SamplingPlan plan;
  plan.probabilities = Vector::Constant(n, 1.0 / static_cast<double>(n));
  plan.kind = PlanKind::Uniform;
  plan.delta = 0.0;
  return plan;
}

SamplingPlan optimal_plan(const SurvivalDataset& data, const PilotEstimate& pilot, double delta,
                          const EstimationSettings& settings) {
  if (!pilot.converged)
    throw numerical_error("optimal_plan: pilot estimate did not converge");
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("optimal_plan: delta must lie in [0,1]");
  const Index n = data.n();

  const Matrix residuals = score_residuals(data, pilot.beta_pilot, settings);
  const Vector norms = residuals.rowwise().norm();
  const double total = norms.sum();

  SamplingPlan plan;
  plan.delta = delta;
  if (total <= 0.0) {
    plan.probabilities = Vector::Constant(n, 1.0 / static_cast<double>(n));
    plan.kind = PlanKind::Uniform;
    plan.degenerate_fallback = true;
    return plan;
  }
  plan.kind = PlanKind::Optimal;
  plan.probabilities =
      ((1.0 - delta) / total) * norms.array() + delta / static_cast<double>(n);
  return plan;
}

AliasTable::AliasTable(const Vector& probabilities) {
  const Index n = probabilities.size();
  if (n == 0) throw std::invalid_argument("AliasTable: empty probability vector");
  threshold_.assign(static_cast<std::size_t>(n), 0.0);
  alias_.assign(static_cast<std::size_t>(n), Index{0});

  std::deque<Index> small, large;
  for (Index i = 0; i < n; ++i) {
    threshold_[static_cast<std::size_t>(i)] = static_cast<double>(n) * probabilities[i];
    if (threshold_[static_cast<std::size_t>(i)] < 1.0) {
      small.push_back(i);
    } else {
      large.push_back(i);
    }
  }
  while (!small.empty() && !large.empty()) {
    const Index s = small.front();
    const Index l = large.front();
    small.pop_front();
    large.pop_front();
    alias_[static_cast<std::size_t>(s)] = l;
    threshold_[static_cast<std::size_t>(l)] -=
        1.0 - threshold_[static_cast<std::size_t>(s)];
    if (threshold_[static_cast<std::size_t>(l)] < 1.0) {
      small.push_back(l);
    } else {
      large.push_back(l);
    }
  }
  // leftovers are numerically 1
  for (Index l : large) threshold_[static_cast<std::size_t>(l)] = 1.0;
  for (Index s : small) threshold_[static_cast<std::size_t>(s)] = 1.0;
}

Index AliasTable::draw(Rng& rng) const {
  const Index k = static_cast<Index>(rng.below(static_cast<std::uint64_t>(size())));
  const double u = rng.uniform();
  return u < threshold_[static_cast<std::size_t>(k)] ? k : alias_[static_cast<std::size_t>(k)];
}

WeightedSample draw(const SurvivalDataset& data, const SamplingPlan& plan, long r, Rng& rng) {
  if (r < 1) throw std::invalid_argument("draw: subsample size must be >= 1");
  if (plan.probabilities.size() != data.n())
    throw std::invalid_argument("draw: plan does not match dataset size");
  const AliasTable table(plan.probabilities);
  std::vector<Index> draws(static_cast<std::size_t>(r));
  for (long k = 0; k < r; ++k) draws[static_cast<std::size_t>(k)] = table.draw(rng);
  return subsample(data, draws, plan.probabilities);
}

SiteSummary summarize_sample(const WeightedSample& sample, const Vector& beta_init,
                             const EstimationSettings& settings, const std::string& site_id,
                             double delta) {
  const NewtonResult fit = newton_fit(sample, beta_init, settings);
  if (!fit.converged) {
    throw numerical_error("site fit did not converge after " +
                          std::to_string(fit.iterations) +
                          " iterations; last iterate " + format_iterate(fit.beta));
  }
  SiteSummary summary;
  summary.site_id = site_id;
  summary.n = static_cast<long>(sample.source_n);
  summary.r = static_cast<long>(sample.r());
  summary.beta = fit.beta;
  summary.psi = weighted_information(sample, fit.beta, settings);
  summary.gamma = gamma_hat(sample, fit.beta, settings);
  summary.delta = delta;
  summary.schema_version = 1;
  return summary;
}

SiteSummary two_step_fit(const SurvivalDataset& data, const TwoStepOptions& options, Rng& rng) {
  if (options.r0 < 1 || options.r < 1)
    throw std::invalid_argument("two_step_fit: subsample sizes must be >= 1");
  const EstimationSettings& est = options.estimation;
  const Index p = data.p();

  if (options.census_override) {
    const WeightedSample census = census_sample(data);
    return summarize_sample(census, Vector::Zero(p), est, options.site_id, options.delta);
  }

  if (options.method == SamplingMethod::Uniform) {
    const WeightedSample sample = draw(data, uniform_plan(data.n()), options.r, rng);
    try {
      return summarize_sample(sample, Vector::Zero(p), est, options.site_id, options.delta);
    } catch (const numerical_error& e) {
      throw numerical_error("uniform stage: " + std::string(e.what()));
    }
  }

  // step 1: uniform pilot
  const WeightedSample pilot_sample = draw(data, uniform_plan(data.n()), options.r0, rng);
  NewtonResult pilot_fit;
  try {
    pilot_fit = newton_fit(pilot_sample, Vector::Zero(p), est);
  } catch (const numerical_error& e) {
    throw numerical_error("pilot stage: " + std::string(e.what()));
  } catch (const data_error& e) {
    throw numerical_error("pilot stage: " + std::string(e.what()));
  }
  if (!pilot_fit.converged) {
    throw numerical_error("pilot stage did not converge; last iterate " +
                          format_iterate(pilot_fit.beta));
  }
  const PilotEstimate pilot{pilot_fit.beta, options.r0, true};

  // steps 2-3: influence-based probabilities, main draw
  const SamplingPlan plan = optimal_plan(data, pilot, options.delta, est);
  const WeightedSample main_sample = draw(data, plan, options.r, rng);

  // steps 4-5: final fit warm-started at the pilot, then the summary
  try {
    return summarize_sample(main_sample, pilot.beta_pilot, est, options.site_id, options.delta);
  } catch (const numerical_error& e) {
    throw numerical_error("main stage: " + std::string(e.what()));
  }
}

SiteSummary two_step_fit(const SurvivalDataset& data, long r0, long r, double delta, Rng& rng,
                         const EstimationSettings& settings) {
  TwoStepOptions options;
  options.r0 = r0;
  options.r = r;
  options.delta = delta;
  options.estimation = settings;
  return two_step_fit(data, options, rng);
}

Matrix site_variance(const SiteSummary& summary) {
  return sandwich_variance(summary.psi, summary.gamma, "site information");
}

}  // namespace dsubcox

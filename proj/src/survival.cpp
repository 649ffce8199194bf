#include "dsubcox/survival.hpp"

#include "dsubcox/errors.hpp"
#include "dsubcox/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsubcox {

namespace {

constexpr double kLinPredBound = 700.0;  // exp overflows past this

// Borrowed columns of either a WeightedSample or a SurvivalDataset. A null
// pi means census weights: 1/(n * 1/n) = 1 for every unit, no copy needed.
struct SampleView {
  const Vector& time;
  const Eigen::VectorXi& status;
  const Matrix& covariates;
  const Vector* pi;
  double source_n;
  const std::vector<Index>& sort_index;

  Index r() const { return time.size(); }
  Index p() const { return covariates.cols(); }
  double ipw(Index i) const { return pi ? 1.0 / (source_n * (*pi)[i]) : 1.0; }
};

SampleView view_of(const WeightedSample& s) {
  return {s.time, s.status, s.covariates, &s.pi, s.source_n, s.sort_index};
}

SampleView view_of(const SurvivalDataset& d) {
  return {d.time, d.status, d.covariates, nullptr, static_cast<double>(d.n()), d.sort_index};
}

// b'X for every unit, with the overflow guard from the boundedness assumption
Vector linear_predictors(const SampleView& sample, const Vector& beta) {
  if (beta.size() != sample.p())
    throw std::invalid_argument("beta dimension does not match sample");
  if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");
  Vector eta = sample.covariates * beta;
  for (Index i = 0; i < eta.size(); ++i) {
    if (!(std::abs(eta[i]) <= kLinPredBound)) {
      throw numerical_error("linear predictor " + std::to_string(eta[i]) + " at unit " +
                            std::to_string(i) +
                            " would overflow exp; covariates must stay bounded");
    }
  }
  return eta;
}

struct SweepResult {
  double loglik = 0.0;
  Vector score;
  Matrix info;
  Index n_events = 0;
};

// Single pass over the time-sorted sample, accumulating the cumulative
// risk-set sums and visiting events. Tied event times share one risk set.
SweepResult partial_likelihood_sweep(const SampleView& sample, const Vector& beta, double tau,
                                     bool want_score, bool want_info) {
  const Index r = sample.r();
  const Index p = sample.p();
  if (r == 0) throw std::invalid_argument("empty sample");
  const Vector eta = linear_predictors(sample, beta);

  SweepResult out;
  if (want_score) out.score = Vector::Zero(p);
  if (want_info) out.info = Matrix::Zero(p, p);

  double s0 = 0.0;
  Vector s1 = Vector::Zero(p);
  Matrix s2 = want_info ? Matrix::Zero(p, p) : Matrix();
  Vector xbar(p);
  Matrix curvature = want_info ? Matrix(p, p) : Matrix();

  const auto& ord = sample.sort_index;
  Index i = 0;
  while (i < r) {
    const double t = sample.time[ord[static_cast<std::size_t>(i)]];
    Index j = i;
    for (; j < r && sample.time[ord[static_cast<std::size_t>(j)]] == t; ++j) {
      const Index u = ord[static_cast<std::size_t>(j)];
      const double c = std::exp(eta[u]) * sample.ipw(u);
      s0 += c;
      s1.noalias() += c * sample.covariates.row(u).transpose();
      if (want_info)
        s2.noalias() += c * sample.covariates.row(u).transpose() * sample.covariates.row(u);
    }
    if (t <= tau) {
      for (Index k = i; k < j; ++k) {
        const Index u = ord[static_cast<std::size_t>(k)];
        if (sample.status[u] != 1) continue;
        ++out.n_events;
        const double w = sample.ipw(u);
        out.loglik += w * (eta[u] - std::log(s0));
        if (want_score || want_info) xbar = s1 / s0;
        if (want_score)
          out.score.noalias() += w * (sample.covariates.row(u).transpose() - xbar);
        if (want_info) {
          curvature = s2 / s0;
          curvature.noalias() -= xbar * xbar.transpose();
          out.info += w * curvature;
        }
      }
    }
    i = j;
  }
  return out;
}

void require_events(const SweepResult& sweep) {
  if (sweep.n_events == 0) throw data_error("no events in sample");
}

// Distinct event times (ascending) with IPW means and Breslow increments.
struct EventProfile {
  std::vector<double> times;
  std::vector<double> jumps;
  Matrix xbar;                    // one row per distinct event time
  std::vector<Index> event_slot;  // unit -> row in `times`, -1 if censored
};

EventProfile make_event_profile(const SampleView& sample, const Vector& beta,
                                const Vector& eta) {
  const Index r = sample.r();
  const Index p = sample.p();
  if (r == 0) throw std::invalid_argument("empty sample");
  (void)beta;

  const auto& ord = sample.sort_index;
  std::vector<double> times_desc;
  std::vector<double> jumps_desc;
  std::vector<Vector> xbar_desc;
  EventProfile profile;
  profile.event_slot.assign(static_cast<std::size_t>(r), Index{-1});

  double s0 = 0.0;
  Vector s1 = Vector::Zero(p);
  Index i = 0;
  while (i < r) {
    const double t = sample.time[ord[static_cast<std::size_t>(i)]];
    Index j = i;
    for (; j < r && sample.time[ord[static_cast<std::size_t>(j)]] == t; ++j) {
      const Index u = ord[static_cast<std::size_t>(j)];
      const double c = std::exp(eta[u]) * sample.ipw(u);
      s0 += c;
      s1.noalias() += c * sample.covariates.row(u).transpose();
    }
    double jump = 0.0;
    bool has_event = false;
    for (Index k = i; k < j; ++k) {
      const Index u = ord[static_cast<std::size_t>(k)];
      if (sample.status[u] != 1) continue;
      has_event = true;
      jump += sample.ipw(u) / s0;
      profile.event_slot[static_cast<std::size_t>(u)] =
          static_cast<Index>(times_desc.size());  // fixed up after reversal
    }
    if (has_event) {
      times_desc.push_back(t);
      jumps_desc.push_back(jump);
      xbar_desc.push_back(s1 / s0);
    }
    i = j;
  }

  const Index e = static_cast<Index>(times_desc.size());
  if (e == 0) throw data_error("no events in sample");
  profile.times.resize(static_cast<std::size_t>(e));
  profile.jumps.resize(static_cast<std::size_t>(e));
  profile.xbar.resize(e, p);
  for (Index m = 0; m < e; ++m) {
    const Index src = e - 1 - m;
    profile.times[static_cast<std::size_t>(m)] = times_desc[static_cast<std::size_t>(src)];
    profile.jumps[static_cast<std::size_t>(m)] = jumps_desc[static_cast<std::size_t>(src)];
    profile.xbar.row(m) = xbar_desc[static_cast<std::size_t>(src)].transpose();
  }
  for (auto& slot : profile.event_slot) {
    if (slot >= 0) slot = e - 1 - slot;
  }
  return profile;
}

// residuals for all units given a profile whose jump sizes may come from a
// caller-supplied cumulative hazard
Matrix residuals_from_profile(const SampleView& sample, const Vector& eta,
                              const EventProfile& profile, const std::vector<double>& jumps,
                              double tau) {
  const Index r = sample.r();
  const Index p = sample.p();
  const Index e = static_cast<Index>(profile.times.size());

  // prefix sums over ascending event times: cumhaz and xbar-weighted cumhaz
  std::vector<double> lambda_prefix(static_cast<std::size_t>(e));
  Matrix xbar_lambda_prefix(e, p);
  double lam = 0.0;
  Vector blam = Vector::Zero(p);
  for (Index m = 0; m < e; ++m) {
    lam += jumps[static_cast<std::size_t>(m)];
    blam.noalias() += jumps[static_cast<std::size_t>(m)] * profile.xbar.row(m).transpose();
    lambda_prefix[static_cast<std::size_t>(m)] = lam;
    xbar_lambda_prefix.row(m) = blam.transpose();
  }

  Matrix residuals = Matrix::Zero(r, p);
  for (Index u = 0; u < r; ++u) {
    const double horizon = std::min(sample.time[u], tau);
    // last event time <= horizon
    const auto it = std::upper_bound(profile.times.begin(), profile.times.end(), horizon);
    const Index m = static_cast<Index>(it - profile.times.begin()) - 1;
    if (m >= 0) {
      const double scale = std::exp(eta[u]);
      residuals.row(u) =
          -scale * (lambda_prefix[static_cast<std::size_t>(m)] * sample.covariates.row(u) -
                    xbar_lambda_prefix.row(m));
    }
    if (sample.status[u] == 1 && sample.time[u] <= tau) {
      const Index slot = profile.event_slot[static_cast<std::size_t>(u)];
      residuals.row(u) += sample.covariates.row(u) - profile.xbar.row(slot);
    }
  }
  return residuals;
}

Matrix residuals_of_view(const SampleView& view, const Vector& beta, double tau) {
  const Vector eta = linear_predictors(view, beta);
  const EventProfile profile = make_event_profile(view, beta, eta);
  return residuals_from_profile(view, eta, profile, profile.jumps, tau);
}

double view_tau(const SampleView& view, const EstimationSettings& settings) {
  if (std::isnan(settings.tau)) return view.time.maxCoeff();
  return settings.tau;
}

}  // namespace

double effective_tau(const WeightedSample& sample, const EstimationSettings& settings) {
  if (std::isnan(settings.tau)) return sample.time.maxCoeff();
  return settings.tau;
}

RiskSetSums risk_set_sums(const WeightedSample& sample, const Vector& beta, double t) {
  const Index r = sample.r();
  const Index p = sample.p();
  if (r == 0) throw std::invalid_argument("empty sample");
  const Vector eta = linear_predictors(view_of(sample), beta);
  RiskSetSums sums;
  sums.s1 = Vector::Zero(p);
  sums.s2 = Matrix::Zero(p, p);
  const double inv_n = 1.0 / sample.source_n;
  for (Index i = 0; i < r; ++i) {
    if (sample.time[i] < t) continue;
    const double c = std::exp(eta[i]) * inv_n / sample.pi[i];
    sums.s0 += c;
    sums.s1.noalias() += c * sample.covariates.row(i).transpose();
    sums.s2.noalias() += c * sample.covariates.row(i).transpose() * sample.covariates.row(i);
  }
  return sums;
}

Vector weighted_score(const WeightedSample& sample, const Vector& beta,
                      const EstimationSettings& settings) {
  const auto view = view_of(sample);
  const auto sweep =
      partial_likelihood_sweep(view, beta, view_tau(view, settings), true, false);
  require_events(sweep);
  return sweep.score;
}

Matrix weighted_information(const WeightedSample& sample, const Vector& beta,
                            const EstimationSettings& settings) {
  const auto view = view_of(sample);
  auto sweep = partial_likelihood_sweep(view, beta, view_tau(view, settings), false, true);
  require_events(sweep);
  // exactly symmetric for downstream solvers
  sweep.info = ((sweep.info + sweep.info.transpose()) / 2.0).eval();
  return sweep.info;
}

double weighted_loglik(const WeightedSample& sample, const Vector& beta,
                       const EstimationSettings& settings) {
  const auto view = view_of(sample);
  const auto sweep =
      partial_likelihood_sweep(view, beta, view_tau(view, settings), false, false);
  require_events(sweep);
  return sweep.loglik;
}

NewtonResult newton_fit(const WeightedSample& sample, const Vector& beta_init,
                        const EstimationSettings& settings) {
  const auto view = view_of(sample);
  const double tau = view_tau(view, settings);
  NewtonResult result;
  result.beta = beta_init;

  auto sweep = partial_likelihood_sweep(view, result.beta, tau, true, true);
  require_events(sweep);

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    if (sweep.score.lpNorm<Eigen::Infinity>() <= settings.convergence_tol) {
      spd_factor(sweep.info, "information");  // a flat likelihood is not a fit
      result.converged = true;
      result.iterations = iter;
      return result;
    }
    const auto ldlt = spd_factor(sweep.info, "information");
    const Vector direction = ldlt.solve(sweep.score);

    // Halve until the log partial likelihood stops decreasing. Near the
    // optimum the true gain sinks below the rounding noise of the
    // likelihood sum, so "no worse than noise" must count as progress.
    const double noise = 1e-10 * (1.0 + std::abs(sweep.loglik));
    double step = 1.0;
    bool have_candidate = false;
    bool improved = false;
    Vector best_beta;
    SweepResult best_sweep;
    for (int h = 0; h <= settings.step_halving_max && !improved; ++h) {
      const Vector candidate = result.beta + step * direction;
      try {
        SweepResult next = partial_likelihood_sweep(view, candidate, tau, true, true);
        if (!have_candidate || next.loglik > best_sweep.loglik) {
          best_beta = candidate;
          best_sweep = std::move(next);
          have_candidate = true;
          improved = best_sweep.loglik > sweep.loglik - noise;
        }
      } catch (const numerical_error&) {
        // wild step overflowed exp, shrink
      }
      step /= 2.0;
    }
    if (!have_candidate)
      throw numerical_error("newton_fit: step halving could not produce a finite step");
    result.beta = std::move(best_beta);
    sweep = std::move(best_sweep);
  }

  if (sweep.score.lpNorm<Eigen::Infinity>() <= settings.convergence_tol) {
    spd_factor(sweep.info, "information");
    result.converged = true;
  }
  result.iterations = settings.max_iterations;
  return result;
}

StepFunction breslow_cumhaz(const WeightedSample& sample, const Vector& beta,
                            const EstimationSettings& settings) {
  (void)settings;
  const auto view = view_of(sample);
  const Vector eta = linear_predictors(view, beta);
  const auto profile = make_event_profile(view, beta, eta);
  return StepFunction(profile.times, profile.jumps);
}

Vector score_residual(Index unit_index, const WeightedSample& sample, const Vector& beta,
                      const StepFunction& cumhaz, const EstimationSettings& settings) {
  if (unit_index < 0 || unit_index >= sample.r())
    throw std::out_of_range("score_residual: unit index out of range");
  const auto view = view_of(sample);
  const Vector eta = linear_predictors(view, beta);
  const auto profile = make_event_profile(view, beta, eta);
  if (cumhaz.size() != static_cast<Index>(profile.times.size()))
    throw std::invalid_argument("score_residual: cumhaz was not built from this sample");
  const Matrix all = residuals_from_profile(view, eta, profile, cumhaz.increments(),
                                            view_tau(view, settings));
  return all.row(unit_index).transpose();
}

Matrix score_residuals(const WeightedSample& sample, const Vector& beta,
                       const EstimationSettings& settings) {
  const auto view = view_of(sample);
  return residuals_of_view(view, beta, view_tau(view, settings));
}

Matrix score_residuals(const SurvivalDataset& data, const Vector& beta,
                       const EstimationSettings& settings) {
  const auto view = view_of(data);
  return residuals_of_view(view, beta, view_tau(view, settings));
}

Matrix gamma_hat(const WeightedSample& sample, const Vector& beta,
                 const EstimationSettings& settings) {
  const Matrix residuals = score_residuals(sample, beta, settings);
  const Index r = sample.r();
  const Index p = sample.p();
  Matrix gamma = Matrix::Zero(p, p);
  Vector v(p);
  for (Index i = 0; i < r; ++i) {
    const double inv_pi = 1.0 / sample.pi[i];
    const double c = inv_pi * inv_pi - inv_pi;  // >= 0 since pi <= 1
    if (c == 0.0) continue;
    v = residuals.row(i).transpose();
    gamma.selfadjointView<Eigen::Lower>().rankUpdate(v, c);
  }
  gamma /= sample.source_n * sample.source_n;
  // lower triangle holds the sums; mirror for an exactly symmetric result
  gamma.triangularView<Eigen::StrictlyUpper>() = gamma.transpose();
  return gamma;
}

FullDataFit full_data_fit(const SurvivalDataset& data, const EstimationSettings& settings) {
  const WeightedSample sample = census_sample(data);
  const auto newton = newton_fit(sample, Vector::Zero(data.p()), settings);
  FullDataFit fit;
  fit.beta = newton.beta;
  fit.converged = newton.converged;
  fit.iterations = newton.iterations;
  fit.information = weighted_information(sample, fit.beta, settings);
  fit.loglik = weighted_loglik(sample, fit.beta, settings);
  return fit;
}

}  // namespace dsubcox

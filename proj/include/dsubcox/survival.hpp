#pragma once

#include "dsubcox/types.hpp"

namespace dsubcox {

// Weighted Cox partial-likelihood numerics. All functions treat the sample as
// immutable and are safe to call concurrently on disjoint inputs. Linear
// predictors with |b'X| > 700 raise numerical_error (exp would overflow).

RiskSetSums risk_set_sums(const WeightedSample& sample, const Vector& beta, double t);

// IPW estimating function (1/n) sum_{events, Y <= tau} (1/pi) {X - Xbar(Y)}.
// Root coincides with the weighted partial-likelihood maximizer.
Vector weighted_score(const WeightedSample& sample, const Vector& beta,
                      const EstimationSettings& settings = {});

// Negative Jacobian of weighted_score: (1/n) sum_events (1/pi) [s2/s0 - (s1/s0)^2].
Matrix weighted_information(const WeightedSample& sample, const Vector& beta,
                            const EstimationSettings& settings = {});

// Weighted log partial likelihood (up to an additive constant).
double weighted_loglik(const WeightedSample& sample, const Vector& beta,
                       const EstimationSettings& settings = {});

struct NewtonResult {
  Vector beta;
  bool converged = false;
  int iterations = 0;
};

// Newton-Raphson with step halving on the weighted log partial likelihood.
// Throws numerical_error("non-identifiable") on singular information.
NewtonResult newton_fit(const WeightedSample& sample, const Vector& beta_init,
                        const EstimationSettings& settings = {});

// IPW Breslow estimator of the cumulative baseline hazard: jumps at distinct
// event times, jump at t = sum over events at t of weight(i)/s0(t).
StepFunction breslow_cumhaz(const WeightedSample& sample, const Vector& beta,
                            const EstimationSettings& settings = {});

// Martingale score residual of one unit:
//   D_i {X_i - Xbar(Y_i)} - sum_{events t_j <= min(Y_i, tau)} {X_i - Xbar(t_j)} exp(b'X_i) dL0(t_j)
// cumhaz must come from breslow_cumhaz on the same sample and beta.
Vector score_residual(Index unit_index, const WeightedSample& sample, const Vector& beta,
                      const StepFunction& cumhaz, const EstimationSettings& settings = {});

// All residuals at once, row i = unit i. O((r + #events) p) sweep.
Matrix score_residuals(const WeightedSample& sample, const Vector& beta,
                       const EstimationSettings& settings = {});

// Census residuals straight off a dataset (pi = 1/n implied), copy-free.
Matrix score_residuals(const SurvivalDataset& data, const Vector& beta,
                       const EstimationSettings& settings = {});

// Meat of the sandwich variance: (1/n^2) sum_i (1/pi^2 - 1/pi) v_i v_i'.
// Symmetric PSD whenever all pi <= 1.
Matrix gamma_hat(const WeightedSample& sample, const Vector& beta,
                 const EstimationSettings& settings = {});

struct FullDataFit {
  Vector beta;
  Matrix information;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Classical Cox fit via the census sample (pi = 1/n); the full-data oracle.
FullDataFit full_data_fit(const SurvivalDataset& data, const EstimationSettings& settings = {});

// Resolved settings helper: tau defaulting to the sample's max observed time.
double effective_tau(const WeightedSample& sample, const EstimationSettings& settings);

}  // namespace dsubcox

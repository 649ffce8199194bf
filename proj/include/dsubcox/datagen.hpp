#pragma once

#include "dsubcox/rng.hpp"
#include "dsubcox/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dsubcox {

enum class CovariateCase {
  NormalEquiCorr,    // N(0, Y), Y_js = 0.3 off-diagonal, unit diagonal
  MixedNormal,       // 0.5 N(-1, Y) + 0.5 N(+1, Y), Y_js = 0.5^|j-s|
  IndepExponential,  // i.i.d. exponential, density 2 exp(-2x)
  StudentT,          // multivariate t, 10 df, scale Y_js = 0.5^|j-s|
};

std::string to_string(CovariateCase c);
CovariateCase covariate_case_from_string(const std::string& label);

// site layout used by the heterogeneous-sources experiment
std::vector<CovariateCase> heterogeneous_cases();

struct SimConfig {
  int k_sites = 4;
  long n_per_site = 100000;
  int p = 5;
  Vector beta0;                           // defaults to (-1,-0.5,0,0.5,1) when p = 5
  std::vector<CovariateCase> site_cases;  // length k_sites
  double target_cr = 0.2;
  long r0 = 200;
  std::vector<long> r_values = {800};
  double delta = 0.1;
  int replications = 200;
  std::uint64_t master_seed = 20240501;
  std::vector<double> censoring_scale;    // c0 per site, filled by calibrate_config
  int threads = 0;                        // 0 = hardware concurrency
  int timing_repeats = 3;
};

void validate(const SimConfig& config);

Matrix gen_covariates(CovariateCase covariate_case, int p, long n, Rng& rng);

// Closed-form inverse of the cumulative hazard 0.25 t^2 exp(lp):
// the event time solving 0.25 t^2 exp(lp) = e.
double event_time_from_exponential(double exponential_draw, double linear_predictor);

double gen_event_time(const Vector& x, const Vector& beta0, Rng& rng);

// Censoring C ~ Uniform(0, c0); returns the c0 whose empirical censoring rate
// on a size-1e5 calibration sample lands within tol of target_cr. Bisection;
// the rate is monotone decreasing in c0 under common random numbers.
double calibrate_censoring(CovariateCase covariate_case, int p, const Vector& beta0,
                           double target_cr, Rng& rng, double tol = 0.01);

// Fills censoring_scale, one bisection per distinct covariate case.
void calibrate_config(SimConfig& config);

// Deterministic given (master_seed, replicate_index, site_index).
SurvivalDataset gen_site_dataset(const SimConfig& config, int site_index, int replicate_index);

}  // namespace dsubcox

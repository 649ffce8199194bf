#include "dsubcox/datagen.hpp"

#include "dsubcox/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dsubcox {

namespace {

constexpr double kLinPredBound = 700.0;
constexpr long kCalibrationSize = 100000;

Matrix equicorrelation(int p, double rho) {
  Matrix y = Matrix::Constant(p, p, rho);
  y.diagonal().setOnes();
  return y;
}

Matrix ar1_correlation(int p, double rho) {
  Matrix y(p, p);
  for (int j = 0; j < p; ++j)
    for (int s = 0; s < p; ++s) y(j, s) = std::pow(rho, std::abs(j - s));
  return y;
}

Matrix cholesky_factor(const Matrix& correlation) {
  Eigen::LLT<Matrix> llt(correlation);
  if (llt.info() != Eigen::Success)
    throw numerical_error("covariate correlation matrix is not positive definite");
  return llt.matrixL();
}

void fill_standard_normal(Matrix& z, Rng& rng) {
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
}

// chi-square with 10 degrees of freedom = 2 * Gamma(5), five log draws
double chi_square_10(Rng& rng) {
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) sum += rng.exponential();
  return 2.0 * sum;
}

}  // namespace

std::string to_string(CovariateCase c) {
  switch (c) {
    case CovariateCase::NormalEquiCorr: return "I";
    case CovariateCase::MixedNormal: return "II";
    case CovariateCase::IndepExponential: return "III";
    case CovariateCase::StudentT: return "IV";
  }
  throw std::logic_error("unknown covariate case");
}

CovariateCase covariate_case_from_string(const std::string& label) {
  if (label == "I" || label == "normal") return CovariateCase::NormalEquiCorr;
  if (label == "II" || label == "mixed-normal") return CovariateCase::MixedNormal;
  if (label == "III" || label == "exponential") return CovariateCase::IndepExponential;
  if (label == "IV" || label == "student-t") return CovariateCase::StudentT;
  throw data_error("unknown covariate case '" + label + "' (expected I, II, III or IV)");
}

std::vector<CovariateCase> heterogeneous_cases() {
  return {CovariateCase::NormalEquiCorr, CovariateCase::IndepExponential,
          CovariateCase::IndepExponential, CovariateCase::StudentT};
}

void validate(const SimConfig& config) {
  if (config.k_sites < 1) throw std::invalid_argument("config: k_sites must be >= 1");
  if (config.n_per_site < 1) throw std::invalid_argument("config: n_per_site must be >= 1");
  if (config.p < 1) throw std::invalid_argument("config: p must be >= 1");
  if (config.beta0.size() != config.p)
    throw std::invalid_argument("config: beta0 length must equal p");
  if (static_cast<int>(config.site_cases.size()) != config.k_sites)
    throw std::invalid_argument("config: one covariate case per site required");
  if (!(config.target_cr > 0.0 && config.target_cr < 1.0))
    throw std::invalid_argument("config: target_cr must lie in (0,1)");
  if (config.r0 < 1) throw std::invalid_argument("config: r0 must be >= 1");
  if (config.r_values.empty()) throw std::invalid_argument("config: r_values must be nonempty");
  for (long r : config.r_values)
    if (r < 1) throw std::invalid_argument("config: subsample sizes must be >= 1");
  if (!(config.delta >= 0.0 && config.delta <= 1.0))
    throw std::invalid_argument("config: delta must lie in [0,1]");
  if (config.replications < 1)
    throw std::invalid_argument("config: replications must be >= 1");
  if (!config.censoring_scale.empty() &&
      static_cast<int>(config.censoring_scale.size()) != config.k_sites)
    throw std::invalid_argument("config: censoring_scale must have one entry per site");
}

Matrix gen_covariates(CovariateCase covariate_case, int p, long n, Rng& rng) {
  if (p < 1 || n < 1) throw std::invalid_argument("gen_covariates: p and n must be >= 1");
  Matrix x(n, p);
  switch (covariate_case) {
    case CovariateCase::NormalEquiCorr: {
      const Matrix l = cholesky_factor(equicorrelation(p, 0.3));
      fill_standard_normal(x, rng);
      x = x * l.transpose();
      break;
    }
    case CovariateCase::MixedNormal: {
      const Matrix l = cholesky_factor(ar1_correlation(p, 0.5));
      fill_standard_normal(x, rng);
      x = x * l.transpose();
      for (Index i = 0; i < n; ++i) {
        const double shift = rng.uniform() < 0.5 ? -1.0 : 1.0;
        x.row(i).array() += shift;
      }
      break;
    }
    case CovariateCase::IndepExponential: {
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = 0.5 * rng.exponential();
      break;
    }
    case CovariateCase::StudentT: {
      const Matrix l = cholesky_factor(ar1_correlation(p, 0.5));
      fill_standard_normal(x, rng);
      x = x * l.transpose();
      for (Index i = 0; i < n; ++i) {
        const double w = chi_square_10(rng);
        x.row(i) /= std::sqrt(w / 10.0);
      }
      break;
    }
  }
  return x;
}

double event_time_from_exponential(double exponential_draw, double linear_predictor) {
  if (!(exponential_draw > 0.0))
    throw std::invalid_argument("event_time_from_exponential: draw must be positive");
  if (!(std::abs(linear_predictor) <= kLinPredBound))
    throw numerical_error("event time generation: linear predictor " +
                          std::to_string(linear_predictor) + " would overflow exp");
  return 2.0 * std::sqrt(exponential_draw * std::exp(-linear_predictor));
}

double gen_event_time(const Vector& x, const Vector& beta0, Rng& rng) {
  if (x.size() != beta0.size())
    throw std::invalid_argument("gen_event_time: dimension mismatch");
  return event_time_from_exponential(rng.exponential(), beta0.dot(x));
}

double calibrate_censoring(CovariateCase covariate_case, int p, const Vector& beta0,
                           double target_cr, Rng& rng, double tol) {
  if (!(target_cr > 0.01 && target_cr < 0.99))
    throw std::invalid_argument("calibrate_censoring: target_cr must lie in (0.01, 0.99)");
  if (!(tol > 0.0)) throw std::invalid_argument("calibrate_censoring: tol must be positive");

  // common random numbers: the empirical rate is then exactly monotone in c0
  const Matrix x = gen_covariates(covariate_case, p, kCalibrationSize, rng);
  Vector event_times(kCalibrationSize);
  Vector censor_uniforms(kCalibrationSize);
  for (long i = 0; i < kCalibrationSize; ++i) {
    event_times[i] = gen_event_time(x.row(i).transpose(), beta0, rng);
    censor_uniforms[i] = rng.uniform_pos();
  }
  const auto censoring_rate = [&](double c0) {
    long censored = 0;
    for (long i = 0; i < kCalibrationSize; ++i)
      if (event_times[i] > c0 * censor_uniforms[i]) ++censored;
    return static_cast<double>(censored) / static_cast<double>(kCalibrationSize);
  };

  // aim for half the tolerance so fresh samples stay within tol
  const double goal = tol / 2.0;
  double lo = 1e-6;
  if (censoring_rate(lo) < target_cr)
    throw numerical_error("calibrate_censoring: bracket failure at the lower end");
  double hi = 1.0;
  int guard = 0;
  while (censoring_rate(hi) > target_cr) {
    hi *= 2.0;
    if (++guard > 60) throw numerical_error("calibrate_censoring: bracket failure (upper end)");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double cr = censoring_rate(mid);
    if (std::abs(cr - target_cr) <= goal) return mid;
    if (cr > target_cr) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mid = 0.5 * (lo + hi);
  if (std::abs(censoring_rate(mid) - target_cr) <= tol) return mid;
  throw numerical_error("calibrate_censoring: bisection did not reach the target rate");
}

void calibrate_config(SimConfig& config) {
  validate(config);
  std::map<CovariateCase, double> scale_by_case;
  config.censoring_scale.assign(static_cast<std::size_t>(config.k_sites), 0.0);
  for (int site = 0; site < config.k_sites; ++site) {
    const CovariateCase c = config.site_cases[static_cast<std::size_t>(site)];
    auto found = scale_by_case.find(c);
    if (found == scale_by_case.end()) {
      Rng rng = derive_stream(config.master_seed,
                              {stream::kCalibration, static_cast<std::uint64_t>(c)});
      const double c0 =
          calibrate_censoring(c, config.p, config.beta0, config.target_cr, rng);
      found = scale_by_case.emplace(c, c0).first;
    }
    config.censoring_scale[static_cast<std::size_t>(site)] = found->second;
  }
}

SurvivalDataset gen_site_dataset(const SimConfig& config, int site_index, int replicate_index) {
  validate(config);
  if (site_index < 0 || site_index >= config.k_sites)
    throw std::invalid_argument("gen_site_dataset: site index out of range");
  if (replicate_index < 0)
    throw std::invalid_argument("gen_site_dataset: replicate index must be >= 0");
  if (config.censoring_scale.empty())
    throw std::invalid_argument(
        "gen_site_dataset: censoring_scale unresolved; run calibrate_config first");

  const double c0 = config.censoring_scale[static_cast<std::size_t>(site_index)];
  const long n = config.n_per_site;
  Rng rng = derive_stream(config.master_seed,
                          {stream::kDataset, static_cast<std::uint64_t>(replicate_index),
                           static_cast<std::uint64_t>(site_index)});

  SurvivalDataset data;
  data.covariates =
      gen_covariates(config.site_cases[static_cast<std::size_t>(site_index)], config.p, n, rng);
  data.time.resize(n);
  data.status.resize(n);
  for (long i = 0; i < n; ++i) {
    const double t = gen_event_time(data.covariates.row(i).transpose(), config.beta0, rng);
    const double c = c0 * rng.uniform_pos();
    data.time[i] = std::min(t, c);
    data.status[i] = t <= c ? 1 : 0;
  }
  rebuild_sort_index(data);
  return data;
}

}  // namespace dsubcox

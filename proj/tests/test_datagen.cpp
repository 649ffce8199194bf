#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dsubcox/datagen.hpp"
#include "dsubcox/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

using namespace dsubcox;

namespace {

SimConfig base_config() {
  SimConfig config;
  config.k_sites = 1;
  config.n_per_site = 100000;
  config.p = 5;
  config.beta0.resize(5);
  config.beta0 << -1.0, -0.5, 0.0, 0.5, 1.0;
  config.site_cases = {CovariateCase::NormalEquiCorr};
  config.target_cr = 0.2;
  config.master_seed = 31337;
  return config;
}

double empirical_censoring(const SurvivalDataset& data) {
  long censored = 0;
  for (Index i = 0; i < data.n(); ++i)
    if (data.status[i] == 0) ++censored;
  return static_cast<double>(censored) / static_cast<double>(data.n());
}

// two-sided Kolmogorov-Smirnov statistic against a continuous CDF
double ks_statistic(std::vector<double> draws, const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace

TEST_CASE("gen_covariates: exponential components have mean 1/2") {
  Rng rng(1);
  const long n = 100000;
  const Matrix x = gen_covariates(CovariateCase::IndepExponential, 3, n, rng);
  const double sd_of_mean = 0.5 / std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < 3; ++j) {
    CHECK(std::abs(x.col(j).mean() - 0.5) < 4.0 * sd_of_mean);
    CHECK(x.col(j).minCoeff() > 0.0);
  }
}

TEST_CASE("gen_covariates: equicorrelated normals hit the 0.3 cross-correlation") {
  Rng rng(2);
  const long n = 100000;
  const Matrix x = gen_covariates(CovariateCase::NormalEquiCorr, 5, n, rng);
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  const double corr12 = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
  CHECK(std::abs(corr12 - 0.3) < 0.02);
  CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("gen_covariates: t draws carry the df/(df-2) variance inflation") {
  Rng rng(3);
  const long n = 100000;
  const Matrix x = gen_covariates(CovariateCase::StudentT, 4, n, rng);
  const double mean = x.col(0).mean();
  const double var =
      (x.col(0).array() - mean).square().sum() / static_cast<double>(n - 1);
  CHECK(var == doctest::Approx(1.25).epsilon(0.04));  // 10/8 scaling of the unit diagonal
}

TEST_CASE("gen_covariates: mixed normal centers at zero with inflated variance") {
  Rng rng(4);
  const long n = 100000;
  const Matrix x = gen_covariates(CovariateCase::MixedNormal, 3, n, rng);
  const double mean = x.col(1).mean();
  const double var =
      (x.col(1).array() - mean).square().sum() / static_cast<double>(n - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(2.0).epsilon(0.04));  // unit noise plus unit mixture shift
}

TEST_CASE("event_time_from_exponential: closed form agrees with numeric inversion") {
  // invert 0.25 t^2 exp(lp) = e by bisection, then compare
  const auto invert = [](double e, double lp) {
    double lo = 0.0, hi = 1000.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (0.25 * mid * mid * std::exp(lp) < e) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  CHECK(event_time_from_exponential(1.0, 0.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(event_time_from_exponential(1.0, std::log(4.0)) == doctest::Approx(1.0).epsilon(1e-12));
  for (const double e : {0.1, 0.5, 1.0, 2.5}) {
    for (const double lp : {-1.0, 0.0, 0.7}) {
      CHECK(event_time_from_exponential(e, lp) ==
            doctest::Approx(invert(e, lp)).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(event_time_from_exponential(1.0, 800.0), numerical_error);
}

TEST_CASE("gen_event_time: Kolmogorov-Smirnov fit at the 1% level") {
  Rng rng(5);
  const long n = 100000;
  const Vector x = Vector::Zero(5);
  Vector beta0(5);
  beta0 << -1.0, -0.5, 0.0, 0.5, 1.0;
  std::vector<double> draws(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = gen_event_time(x, beta0, rng);
  const double d = ks_statistic(
      std::move(draws), [](double t) { return 1.0 - std::exp(-0.25 * t * t); });
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("calibrate_censoring: achieves 20% and 60% on fresh samples") {
  for (const double target : {0.2, 0.6}) {
    SimConfig config = base_config();
    config.target_cr = target;
    calibrate_config(config);
    REQUIRE(config.censoring_scale.size() == 1);
    const SurvivalDataset data = gen_site_dataset(config, 0, 0);
    CHECK(std::abs(empirical_censoring(data) - target) <= 0.01);
  }
}

TEST_CASE("calibrate_censoring: rate falls as the horizon grows") {
  Rng rng(6);
  Vector beta0(2);
  beta0 << -0.5, 0.5;
  const double c20 =
      calibrate_censoring(CovariateCase::NormalEquiCorr, 2, beta0, 0.2, rng);
  Rng rng2(6);
  const double c60 =
      calibrate_censoring(CovariateCase::NormalEquiCorr, 2, beta0, 0.6, rng2);
  CHECK(c60 < c20);  // more censoring needs a shorter window
  Rng rng3(7);
  CHECK_THROWS_AS(
      calibrate_censoring(CovariateCase::NormalEquiCorr, 2, beta0, 0.995, rng3),
      std::invalid_argument);
}

TEST_CASE("gen_site_dataset: deterministic replay, distinct site streams") {
  SimConfig config = base_config();
  config.k_sites = 2;
  config.n_per_site = 500;
  config.site_cases = {CovariateCase::NormalEquiCorr, CovariateCase::NormalEquiCorr};
  config.censoring_scale = {3.0, 3.0};

  const SurvivalDataset a = gen_site_dataset(config, 0, 0);
  const SurvivalDataset b = gen_site_dataset(config, 0, 0);
  CHECK(a.time == b.time);
  CHECK(a.covariates == b.covariates);

  const SurvivalDataset other_site = gen_site_dataset(config, 1, 0);
  const SurvivalDataset other_rep = gen_site_dataset(config, 0, 1);
  int site_matches = 0, rep_matches = 0;
  for (Index i = 0; i < 100; ++i) {
    if (a.time[i] == other_site.time[i]) ++site_matches;
    if (a.time[i] == other_rep.time[i]) ++rep_matches;
  }
  CHECK(site_matches == 0);
  CHECK(rep_matches == 0);
}

TEST_CASE("gen_site_dataset: requires calibration first") {
  SimConfig config = base_config();
  config.censoring_scale.clear();
  CHECK_THROWS_AS(gen_site_dataset(config, 0, 0), std::invalid_argument);
}

TEST_CASE("heterogeneous_cases: the four-source layout") {
  const auto cases = heterogeneous_cases();
  REQUIRE(cases.size() == 4);
  CHECK(cases[0] == CovariateCase::NormalEquiCorr);
  CHECK(cases[1] == CovariateCase::IndepExponential);
  CHECK(cases[2] == CovariateCase::IndepExponential);
  CHECK(cases[3] == CovariateCase::StudentT);
}

TEST_CASE("covariate case labels round-trip") {
  for (const auto c : {CovariateCase::NormalEquiCorr, CovariateCase::MixedNormal,
                       CovariateCase::IndepExponential, CovariateCase::StudentT}) {
    CHECK(covariate_case_from_string(to_string(c)) == c);
  }
  CHECK_THROWS_AS(covariate_case_from_string("V"), data_error);
}

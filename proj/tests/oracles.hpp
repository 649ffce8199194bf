#pragma once

// Test-only reference implementations: plain loops and textbook formulas,
// deliberately independent of the library's sweep-based code paths.

#include "dsubcox/rng.hpp"
#include "dsubcox/types.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace dsubcox::testing {

inline RiskSetSums naive_risk_set_sums(const WeightedSample& s, const Vector& beta, double t) {
  RiskSetSums out;
  out.s1 = Vector::Zero(s.p());
  out.s2 = Matrix::Zero(s.p(), s.p());
  for (Index i = 0; i < s.r(); ++i) {
    if (s.time[i] < t) continue;
    const double c = std::exp(beta.dot(s.covariates.row(i))) / (s.source_n * s.pi[i]);
    out.s0 += c;
    out.s1 += c * s.covariates.row(i).transpose();
    out.s2 += c * s.covariates.row(i).transpose() * s.covariates.row(i);
  }
  return out;
}

// double loop: one risk-set scan per event
inline Vector naive_score(const WeightedSample& s, const Vector& beta, double tau) {
  Vector score = Vector::Zero(s.p());
  for (Index i = 0; i < s.r(); ++i) {
    if (s.status[i] != 1 || s.time[i] > tau) continue;
    const RiskSetSums at = naive_risk_set_sums(s, beta, s.time[i]);
    score += (s.covariates.row(i).transpose() - at.s1 / at.s0) / (s.source_n * s.pi[i]);
  }
  return score;
}

inline Matrix naive_information(const WeightedSample& s, const Vector& beta, double tau) {
  Matrix info = Matrix::Zero(s.p(), s.p());
  for (Index i = 0; i < s.r(); ++i) {
    if (s.status[i] != 1 || s.time[i] > tau) continue;
    const RiskSetSums at = naive_risk_set_sums(s, beta, s.time[i]);
    const Vector xbar = at.s1 / at.s0;
    info += (at.s2 / at.s0 - xbar * xbar.transpose()) / (s.source_n * s.pi[i]);
  }
  return info;
}

inline double naive_loglik(const WeightedSample& s, const Vector& beta, double tau) {
  double ll = 0.0;
  for (Index i = 0; i < s.r(); ++i) {
    if (s.status[i] != 1 || s.time[i] > tau) continue;
    const RiskSetSums at = naive_risk_set_sums(s, beta, s.time[i]);
    ll += (beta.dot(s.covariates.row(i)) - std::log(at.s0)) / (s.source_n * s.pi[i]);
  }
  return ll;
}

// literal evaluation of the residual integral as a finite sum over events
inline Vector naive_score_residual(const WeightedSample& s, const Vector& beta, Index unit,
                                   double tau) {
  Vector v = Vector::Zero(s.p());
  const double y = s.time[unit];
  if (s.status[unit] == 1 && y <= tau) {
    const RiskSetSums at = naive_risk_set_sums(s, beta, y);
    v += s.covariates.row(unit).transpose() - at.s1 / at.s0;
  }
  const double relative_risk = std::exp(beta.dot(s.covariates.row(unit)));
  const double horizon = std::min(y, tau);
  for (Index j = 0; j < s.r(); ++j) {
    if (s.status[j] != 1 || s.time[j] > horizon) continue;
    const RiskSetSums at = naive_risk_set_sums(s, beta, s.time[j]);
    const double jump = 1.0 / (s.source_n * s.pi[j] * at.s0);
    v -= relative_risk * jump * (s.covariates.row(unit).transpose() - at.s1 / at.s0);
  }
  return v;
}

inline Matrix naive_gamma(const WeightedSample& s, const Vector& beta, double tau) {
  Matrix g = Matrix::Zero(s.p(), s.p());
  for (Index i = 0; i < s.r(); ++i) {
    const Vector v = naive_score_residual(s, beta, i, tau);
    const double inv_pi = 1.0 / s.pi[i];
    g += (inv_pi * inv_pi - inv_pi) * v * v.transpose();
  }
  return g / (s.source_n * s.source_n);
}

inline Matrix central_difference_jacobian(const std::function<Vector(const Vector&)>& f,
                                          const Vector& x, double h) {
  const Index p = x.size();
  const Index m = f(x).size();
  Matrix jac(m, p);
  for (Index j = 0; j < p; ++j) {
    Vector lo = x, hi = x;
    hi[j] += h;
    lo[j] -= h;
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return jac;
}

inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-10) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2.0;
}

inline double bisect_normal_quantile(double prob) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Gauss-Jordan with partial pivoting; not Eigen's code path
inline Vector gauss_solve(Matrix a, Vector b) {
  const Index n = a.rows();
  for (Index col = 0; col < n; ++col) {
    Index pivot = col;
    for (Index row = col + 1; row < n; ++row)
      if (std::abs(a(row, col)) > std::abs(a(pivot, col))) pivot = row;
    a.row(col).swap(a.row(pivot));
    std::swap(b[col], b[pivot]);
    const double d = a(col, col);
    for (Index row = 0; row < n; ++row) {
      if (row == col) continue;
      const double factor = a(row, col) / d;
      a.row(row) -= factor * a.row(col);
      b[row] -= factor * b[col];
    }
  }
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = b[i] / a(i, i);
  return x;
}

inline Matrix gauss_solve_matrix(const Matrix& a, const Matrix& b) {
  Matrix x(a.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) x.col(j) = gauss_solve(a, b.col(j));
  return x;
}

// small random weighted samples for property tests; always has >= 1 event
// and a continuous covariate spread
inline WeightedSample random_sample(std::mt19937& gen, Index max_n = 20, Index max_p = 3) {
  std::uniform_int_distribution<Index> n_dist(2, max_n);
  std::uniform_int_distribution<Index> p_dist(1, max_p);
  std::uniform_real_distribution<double> time_dist(0.1, 5.0);
  std::uniform_real_distribution<double> x_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> pi_raw(0.2, 1.0);
  std::bernoulli_distribution event(0.6);

  const Index n = n_dist(gen);
  const Index p = p_dist(gen);
  WeightedSample s;
  s.time.resize(n);
  s.status.resize(n);
  s.covariates.resize(n, p);
  s.pi.resize(n);
  s.source_n = static_cast<double>(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    s.time[i] = time_dist(gen);
    s.status[i] = event(gen) ? 1 : 0;
    for (Index j = 0; j < p; ++j) s.covariates(i, j) = x_dist(gen);
    s.pi[i] = pi_raw(gen);
    total += s.pi[i];
  }
  s.status[0] = 1;  // guarantee an event
  s.pi /= total;
  rebuild_sort_index(s);
  return s;
}

}  // namespace dsubcox::testing

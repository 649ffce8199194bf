#include "dsubcox/linalg.hpp"

#include "dsubcox/errors.hpp"

#include <cmath>

namespace dsubcox {

Eigen::LDLT<Matrix> spd_factor(const Matrix& m, const std::string& context) {
  Eigen::LDLT<Matrix> ldlt(m);
  const Vector d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  if (!(dmax > 0.0) || d.minCoeff() <= dmax * 1e-13)
    throw numerical_error(context + ": matrix is singular (non-identifiable)");
  return ldlt;
}

Matrix sandwich_variance(const Matrix& bread, const Matrix& meat, const std::string& context) {
  const auto ldlt = spd_factor(bread, context);
  const Matrix half = ldlt.solve(meat);
  Matrix full = ldlt.solve(half.transpose());
  // enforce exact symmetry lost to rounding
  return ((full + full.transpose()) / 2.0).eval();
}

double compensated_sum(const Vector& values) {
  double sum = 0.0;
  double compensation = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      compensation += (sum - t) + v;
    } else {
      compensation += (v - t) + sum;
    }
    sum = t;
  }
  return sum + compensation;
}

}  // namespace dsubcox

#pragma once

#include "dsubcox/types.hpp"

#include <Eigen/Cholesky>

#include <string>

namespace dsubcox {

// LDLT of a symmetric PSD matrix with an explicit singularity verdict;
// `context` names the matrix in the error message.
Eigen::LDLT<Matrix> spd_factor(const Matrix& m, const std::string& context);

// bread^-1 * meat * bread^-1 via two symmetric solves (no explicit inverse).
Matrix sandwich_variance(const Matrix& bread, const Matrix& meat, const std::string& context);

// Neumaier-compensated sum; used wherever probabilities must add to one.
double compensated_sum(const Vector& values);

}  // namespace dsubcox

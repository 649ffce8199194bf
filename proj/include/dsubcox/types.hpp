#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace dsubcox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Subject {
  double time = 0.0;   // observed Y = min(T, C), > 0
  int status = 0;      // event indicator, 0 censored / 1 event
  Vector covariates;   // length p
};

/// Columnar survival data. `sort_index` ranks subjects by nonincreasing time
/// so cumulative risk-set sums run in a single O(n) sweep.
struct SurvivalDataset {
  Vector time;                     // n
  Eigen::VectorXi status;          // n, entries in {0,1}
  Matrix covariates;               // n x p, row i = subject i
  std::vector<Index> sort_index;   // permutation; time[sort_index[0]] is largest

  Index n() const { return time.size(); }
  Index p() const { return covariates.cols(); }
  Subject subject(Index i) const;
};

SurvivalDataset make_dataset(const std::vector<Subject>& subjects);
void rebuild_sort_index(SurvivalDataset& data);
void validate(const SurvivalDataset& data);

/// Subsample drawn with replacement; each unit carries its own inclusion
/// probability. A full dataset is representable as a census sample with
/// pi = 1/n and r = n.
struct WeightedSample {
  Vector time;                     // r
  Eigen::VectorXi status;          // r
  Matrix covariates;               // r x p
  Vector pi;                       // inclusion probabilities, (0,1]
  double source_n = 0.0;           // size of the originating dataset
  std::vector<Index> sort_index;   // nonincreasing time

  Index r() const { return time.size(); }
  Index p() const { return covariates.cols(); }
  // IPW weight of unit i
  double weight(Index i) const { return 1.0 / (source_n * pi[i]); }
};

WeightedSample census_sample(const SurvivalDataset& data);
WeightedSample subsample(const SurvivalDataset& data, const std::vector<Index>& draws,
                         const Vector& probabilities);
void rebuild_sort_index(WeightedSample& sample);
void validate(const WeightedSample& sample);

/// S^(v) risk-set sums at one time point: s_v = (1/n) sum_i w_i 1{Y_i >= t} X_i^(x)v exp(b'X_i).
struct RiskSetSums {
  double s0 = 0.0;
  Vector s1;
  Matrix s2;
};

/// Right-continuous nondecreasing step function (cumulative hazards).
class StepFunction {
 public:
  StepFunction() = default;
  // jump_times strictly increasing, increments >= 0, equal lengths
  StepFunction(std::vector<double> jump_times, std::vector<double> increments);

  // sum of increments with jump_time <= t
  double operator()(double t) const;

  const std::vector<double>& jump_times() const { return jump_times_; }
  const std::vector<double>& increments() const { return increments_; }
  Index size() const { return static_cast<Index>(jump_times_.size()); }

 private:
  std::vector<double> jump_times_;
  std::vector<double> increments_;
  std::vector<double> cumulative_;
};

struct EstimationSettings {
  int max_iterations = 50;
  double convergence_tol = 1e-8;   // on the score sup-norm
  int step_halving_max = 20;
  // study horizon; NaN means "use the maximum observed time in the sample"
  double tau = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace dsubcox

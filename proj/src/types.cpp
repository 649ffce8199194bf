#include "dsubcox/types.hpp"

#include "dsubcox/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dsubcox {

namespace {

std::vector<Index> decreasing_time_order(const Vector& time) {
  std::vector<Index> idx(static_cast<std::size_t>(time.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  // stable: ties keep storage order, so results are reproducible
  std::stable_sort(idx.begin(), idx.end(),
                   [&time](Index a, Index b) { return time[a] > time[b]; });
  return idx;
}

bool is_permutation_of_range(const std::vector<Index>& idx, Index n) {
  if (static_cast<Index>(idx.size()) != n) return false;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index i : idx) {
    if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) return false;
    seen[static_cast<std::size_t>(i)] = true;
  }
  return true;
}

}  // namespace

Subject SurvivalDataset::subject(Index i) const {
  if (i < 0 || i >= n()) throw std::out_of_range("SurvivalDataset::subject: index out of range");
  return Subject{time[i], status[i], covariates.row(i).transpose()};
}

SurvivalDataset make_dataset(const std::vector<Subject>& subjects) {
  if (subjects.empty()) throw std::invalid_argument("make_dataset: no subjects");
  const Index n = static_cast<Index>(subjects.size());
  const Index p = subjects.front().covariates.size();
  SurvivalDataset data;
  data.time.resize(n);
  data.status.resize(n);
  data.covariates.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    const Subject& s = subjects[static_cast<std::size_t>(i)];
    if (s.covariates.size() != p)
      throw std::invalid_argument("make_dataset: inconsistent covariate dimension");
    data.time[i] = s.time;
    data.status[i] = s.status;
    data.covariates.row(i) = s.covariates.transpose();
  }
  rebuild_sort_index(data);
  validate(data);
  return data;
}

void rebuild_sort_index(SurvivalDataset& data) {
  data.sort_index = decreasing_time_order(data.time);
}

void validate(const SurvivalDataset& data) {
  const Index n = data.n();
  if (n == 0) throw std::invalid_argument("dataset: empty");
  if (data.p() < 1) throw std::invalid_argument("dataset: covariate dimension must be >= 1");
  if (data.status.size() != n || data.covariates.rows() != n)
    throw std::invalid_argument("dataset: column lengths disagree");
  for (Index i = 0; i < n; ++i) {
    if (!(data.time[i] > 0.0)) throw std::invalid_argument("dataset: times must be positive");
    if (data.status[i] != 0 && data.status[i] != 1)
      throw std::invalid_argument("dataset: status must be 0 or 1");
  }
  if (!data.covariates.allFinite())
    throw std::invalid_argument("dataset: covariates must be finite");
  if (!is_permutation_of_range(data.sort_index, n))
    throw std::invalid_argument("dataset: sort_index is not a permutation");
  for (Index k = 1; k < n; ++k) {
    if (data.time[data.sort_index[static_cast<std::size_t>(k)]] >
        data.time[data.sort_index[static_cast<std::size_t>(k - 1)]])
      throw std::invalid_argument("dataset: sort_index does not order times nonincreasingly");
  }
}

WeightedSample census_sample(const SurvivalDataset& data) {
  WeightedSample sample;
  sample.time = data.time;
  sample.status = data.status;
  sample.covariates = data.covariates;
  sample.pi = Vector::Constant(data.n(), 1.0 / static_cast<double>(data.n()));
  sample.source_n = static_cast<double>(data.n());
  sample.sort_index = data.sort_index;
  return sample;
}

WeightedSample subsample(const SurvivalDataset& data, const std::vector<Index>& draws,
                         const Vector& probabilities) {
  if (draws.empty()) throw std::invalid_argument("subsample: no draws");
  if (probabilities.size() != data.n())
    throw std::invalid_argument("subsample: probability vector length mismatch");
  const Index r = static_cast<Index>(draws.size());
  WeightedSample sample;
  sample.time.resize(r);
  sample.status.resize(r);
  sample.covariates.resize(r, data.p());
  sample.pi.resize(r);
  sample.source_n = static_cast<double>(data.n());
  for (Index k = 0; k < r; ++k) {
    const Index i = draws[static_cast<std::size_t>(k)];
    if (i < 0 || i >= data.n()) throw std::out_of_range("subsample: drawn index out of range");
    sample.time[k] = data.time[i];
    sample.status[k] = data.status[i];
    sample.covariates.row(k) = data.covariates.row(i);
    sample.pi[k] = probabilities[i];
  }
  rebuild_sort_index(sample);
  return sample;
}

void rebuild_sort_index(WeightedSample& sample) {
  sample.sort_index = decreasing_time_order(sample.time);
}

void validate(const WeightedSample& sample) {
  const Index r = sample.r();
  if (r == 0) throw std::invalid_argument("sample: empty");
  if (sample.status.size() != r || sample.covariates.rows() != r || sample.pi.size() != r)
    throw std::invalid_argument("sample: column lengths disagree");
  if (!(sample.source_n >= 1.0)) throw std::invalid_argument("sample: source_n must be >= 1");
  for (Index i = 0; i < r; ++i) {
    if (!(sample.pi[i] > 0.0 && sample.pi[i] <= 1.0))
      throw std::invalid_argument("sample: inclusion probabilities must lie in (0,1]");
    if (!(sample.time[i] > 0.0)) throw std::invalid_argument("sample: times must be positive");
    if (sample.status[i] != 0 && sample.status[i] != 1)
      throw std::invalid_argument("sample: status must be 0 or 1");
  }
  if (!sample.covariates.allFinite())
    throw std::invalid_argument("sample: covariates must be finite");
  if (!is_permutation_of_range(sample.sort_index, r))
    throw std::invalid_argument("sample: sort_index is not a permutation");
}

StepFunction::StepFunction(std::vector<double> jump_times, std::vector<double> increments)
    : jump_times_(std::move(jump_times)), increments_(std::move(increments)) {
  if (jump_times_.size() != increments_.size())
    throw std::invalid_argument("StepFunction: length mismatch");
  cumulative_.resize(jump_times_.size());
  double running = 0.0;
  for (std::size_t j = 0; j < jump_times_.size(); ++j) {
    if (j > 0 && !(jump_times_[j] > jump_times_[j - 1]))
      throw std::invalid_argument("StepFunction: jump times must be strictly increasing");
    if (!(increments_[j] >= 0.0) || !std::isfinite(increments_[j]))
      throw std::invalid_argument("StepFunction: increments must be nonnegative");
    running += increments_[j];
    cumulative_[j] = running;
  }
}

double StepFunction::operator()(double t) const {
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

}  // namespace dsubcox

#pragma once

#include "dsubcox/rng.hpp"
#include "dsubcox/survival.hpp"
#include "dsubcox/types.hpp"

#include <string>
#include <vector>

namespace dsubcox {

enum class PlanKind { Uniform, Optimal };

struct SamplingPlan {
  Vector probabilities;              // length n, entries in (0,1], sum 1
  double delta = 0.0;                // uniform-mixture weight
  PlanKind kind = PlanKind::Uniform;
  bool degenerate_fallback = false;  // optimal construction collapsed to uniform
};

void validate(const SamplingPlan& plan);

struct PilotEstimate {
  Vector beta_pilot;
  long r0 = 0;
  bool converged = false;
};

/// The only payload a site ever transmits: estimate, curvature, score
/// variability and sizes. No individual-level records.
struct SiteSummary {
  std::string site_id;
  long n = 0;          // site full-data size
  long r = 0;          // subsample size actually used
  Vector beta;         // site estimate
  Matrix psi;          // information (sandwich bread)
  Matrix gamma;        // score variability (sandwich meat)
  double delta = 0.0;
  int schema_version = 1;

  Index p() const { return beta.size(); }
};

SamplingPlan uniform_plan(Index n);

// Influence-norm probabilities mixed with uniform mass:
//   pi_i = (1 - delta) * ||v_i|| / sum_j ||v_j|| + delta / n
// where v_i is the score residual of subject i at the pilot estimate using
// full-data risk sets and full-data baseline hazard. Falls back to uniform
// (flagged) when every norm is zero.
SamplingPlan optimal_plan(const SurvivalDataset& data, const PilotEstimate& pilot, double delta,
                          const EstimationSettings& settings = {});

/// Walker alias table for with-replacement draws: O(n) build, O(1) per draw.
class AliasTable {
 public:
  explicit AliasTable(const Vector& probabilities);
  Index draw(Rng& rng) const;
  Index size() const { return static_cast<Index>(threshold_.size()); }

 private:
  std::vector<double> threshold_;
  std::vector<Index> alias_;
};

// r i.i.d. with-replacement draws; each unit records its own inclusion
// probability. Deterministic given the rng state.
WeightedSample draw(const SurvivalDataset& data, const SamplingPlan& plan, long r, Rng& rng);

// Fit a drawn sample and package the transmittable summary.
SiteSummary summarize_sample(const WeightedSample& sample, const Vector& beta_init,
                             const EstimationSettings& settings, const std::string& site_id,
                             double delta);

enum class SamplingMethod { Optimal, Uniform };

struct TwoStepOptions {
  long r0 = 200;
  long r = 800;
  double delta = 0.1;
  SamplingMethod method = SamplingMethod::Optimal;
  // test hook: skip the random draw and use the full dataset at pi = 1/n
  bool census_override = false;
  std::string site_id = "site";
  EstimationSettings estimation{};
};

// Per-site pipeline: uniform pilot -> optimal probabilities -> main draw ->
// final fit and summary. method = Uniform skips the pilot and draws uniformly
// with a zero start.
SiteSummary two_step_fit(const SurvivalDataset& data, const TwoStepOptions& options, Rng& rng);

SiteSummary two_step_fit(const SurvivalDataset& data, long r0, long r, double delta, Rng& rng,
                         const EstimationSettings& settings = {});

// Sandwich variance of one site: psi^-1 gamma psi^-1.
Matrix site_variance(const SiteSummary& summary);

}  // namespace dsubcox

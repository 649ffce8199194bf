#pragma once

#include "dsubcox/subsample.hpp"

#include <string>
#include <vector>

namespace dsubcox {

struct DistributedEstimate {
  Vector beta_dse;
  Matrix omega_dse;
  int k = 0;                          // number of sites
  std::vector<SiteSummary> per_site;  // retained inputs
  long total_r = 0;

  Index p() const { return beta_dse.size(); }
};

struct ConfidenceInterval {
  Index coefficient = 0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

// One-round aggregation:
//   beta = (sum psi_k)^-1 (sum psi_k beta_k),  omega = (sum psi)^-1 (sum gamma) (sum psi)^-1
// Summaries must agree on p and schema version; a singular sum is an error,
// never silently pseudo-inverted.
DistributedEstimate aggregate(const std::vector<SiteSummary>& summaries);

// beta_j +/- z_{(1+level)/2} sqrt(omega_jj)
std::vector<ConfidenceInterval> wald_intervals(const DistributedEstimate& estimate,
                                               double level = 0.95);

// Deterministic consequence of PSD curvature weights: for any reference b,
//   ||beta_dse - b|| <= k * max_k ||beta_k - b||.
bool satisfies_aggregation_bound(const DistributedEstimate& estimate, const Vector& reference,
                                 double relative_slack = 1e-9);

// Versioned text interchange, one summary per payload. decode(encode(s)) == s
// bit-exactly (17 significant digits per float).
std::string encode_summary(const SiteSummary& summary);
SiteSummary decode_summary(const std::string& payload);

void write_summary_file(const SiteSummary& summary, const std::string& path);
SiteSummary read_summary_file(const std::string& path);

}  // namespace dsubcox

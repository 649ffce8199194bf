#pragma once

#include "dsubcox/datagen.hpp"
#include "dsubcox/federation.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dsubcox {

struct MetricsRow {
  std::string method;  // "OSP" or "UNIF"
  long r = 0;
  Vector bias;      // per coefficient: mean(estimate) - beta0
  Vector ese;       // empirical sd of estimates
  Vector se_mean;   // mean of model-based standard errors
  Vector cp;        // coverage of the 95% Wald interval
  double mse = 0.0; // mean squared Euclidean error
  int replications = 0;
};

struct TimingRow {
  std::string method;  // "UNIF", "OSP" or "FullData"
  long n_total = 0;
  int p = 0;
  double seconds = 0.0;  // mean wall clock over repeats
  int repeats = 0;
};

// Header `time,status,x1,...,xp`; parse failures abort with the line number.
// Streams row by row, never buffering the whole file.
SurvivalDataset ingest_csv(const std::string& path);
void write_csv(const SurvivalDataset& data, const std::string& path);

struct ReplicateEstimate {
  int replicate = 0;
  Vector estimate;
  Vector se;
};

struct ReplicateResult {
  int replicate = 0;
  bool failed = false;
  std::string failure_stage;
  // one aggregated estimate per entry of config.r_values, per method;
  // both methods consume the same generated site datasets
  std::vector<DistributedEstimate> osp;
  std::vector<DistributedEstimate> unif;
};

ReplicateResult run_replicate(const SimConfig& config, int replicate_index);

MetricsRow compute_metrics(const std::string& method, long r, const Vector& beta0,
                           const std::vector<ReplicateEstimate>& estimates,
                           double level = 0.95);

struct RawEstimateRow {
  std::string method;
  long r = 0;
  int replicate = 0;
  Vector estimate;
  Vector se;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;       // OSP rows first, r ascending
  std::vector<RawEstimateRow> raw;    // same ordering, replicate ascending
  int replications = 0;
  int failures = 0;
  // aggregated estimate escaping the per-site envelope around beta0 (never
  // expected; tested as an invariant)
  int aggregation_bound_violations = 0;
};

// Monte Carlo driver. Replicates run on a work pool with per-replicate rng
// streams; outputs are canonicalized by replicate index, so the thread count
// never changes results. Aborts when more than 5% of replicates fail.
ExperimentResult run_experiment(const SimConfig& config);

// Mean wall-clock seconds per method on one generated multi-site dataset,
// single-threaded, r = first entry of r_values.
std::vector<TimingRow> run_timing(const SimConfig& config);

// <prefix>_metrics.csv and <prefix>_raw.csv, byte-stable ordering.
void emit_reports(const ExperimentResult& result, const std::string& path_prefix);
std::vector<RawEstimateRow> read_raw_estimates(const std::string& path);

// Flat key=value config mirroring SimConfig.
SimConfig parse_config(std::istream& in);
SimConfig read_config_file(const std::string& path);

}  // namespace dsubcox

#include "dsubcox/harness.hpp"

#include "dsubcox/errors.hpp"
#include "dsubcox/linalg.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace dsubcox {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_csv_double(const std::string& tok, long line_no, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw data_error("line " + std::to_string(line_no) + ": malformed " + column + " value '" +
                     tok + "'");
  return v;
}

long parse_csv_long(const std::string& tok, long line_no, const std::string& column) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw data_error("line " + std::to_string(line_no) + ": malformed " + column + " value '" +
                     tok + "'");
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

SurvivalDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": missing header");
  strip_cr(line);
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "time" || header[1] != "status")
    throw data_error(path + ": header must be time,status,x1,...,xp");
  const Index p = static_cast<Index>(header.size()) - 2;
  for (Index j = 0; j < p; ++j) {
    if (header[static_cast<std::size_t>(j + 2)] != "x" + std::to_string(j + 1))
      throw data_error(path + ": header must be time,status,x1,...,xp");
  }

  std::vector<double> times;
  std::vector<int> statuses;
  std::vector<double> covariates;  // row-major
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (static_cast<Index>(fields.size()) != p + 2)
      throw data_error("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(p + 2) + " fields, found " +
                       std::to_string(fields.size()));
    const double time = parse_csv_double(fields[0], line_no, "time");
    if (!(time > 0.0))
      throw data_error("line " + std::to_string(line_no) + ": time must be positive");
    const long status = parse_csv_long(fields[1], line_no, "status");
    if (status != 0 && status != 1)
      throw data_error("line " + std::to_string(line_no) + ": status must be 0 or 1, found " +
                       std::to_string(status));
    times.push_back(time);
    statuses.push_back(static_cast<int>(status));
    for (Index j = 0; j < p; ++j)
      covariates.push_back(
          parse_csv_double(fields[static_cast<std::size_t>(j + 2)], line_no,
                           "x" + std::to_string(j + 1)));
  }
  if (times.empty()) throw data_error(path + ": no data rows");

  const Index n = static_cast<Index>(times.size());
  SurvivalDataset data;
  data.time = Eigen::Map<const Vector>(times.data(), n);
  data.status = Eigen::Map<const Eigen::VectorXi>(statuses.data(), n);
  data.covariates =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          covariates.data(), n, p);
  rebuild_sort_index(data);
  validate(data);
  return data;
}

void write_csv(const SurvivalDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << "time,status";
  for (Index j = 0; j < data.p(); ++j) out << ",x" << j + 1;
  out << "\n";
  for (Index i = 0; i < data.n(); ++i) {
    out << fmt17(data.time[i]) << ',' << data.status[i];
    for (Index j = 0; j < data.p(); ++j) out << ',' << fmt17(data.covariates(i, j));
    out << "\n";
  }
  if (!out) throw data_error("failed writing '" + path + "'");
}

ReplicateResult run_replicate(const SimConfig& config, int replicate_index) {
  validate(config);
  if (config.censoring_scale.empty())
    throw std::invalid_argument(
        "run_replicate: censoring_scale unresolved; run calibrate_config first");

  ReplicateResult out;
  out.replicate = replicate_index;
  const std::size_t n_r = config.r_values.size();
  std::vector<std::vector<SiteSummary>> osp_sites(n_r);
  std::vector<std::vector<SiteSummary>> unif_sites(n_r);
  const std::uint64_t rep = static_cast<std::uint64_t>(replicate_index);

  std::string stage = "setup";
  try {
    for (int site = 0; site < config.k_sites; ++site) {
      const std::string label = "site " + std::to_string(site + 1);
      const std::string site_id = "site_" + std::to_string(site + 1);
      stage = label + " data generation";
      const SurvivalDataset data = gen_site_dataset(config, site, replicate_index);

      {  // optimal-probability arm: pilot and plan are shared across r values
        Rng rng = derive_stream(config.master_seed, {stream::kSampling, rep,
                                                     static_cast<std::uint64_t>(site),
                                                     stream::kOptimal});
        stage = label + " pilot fit";
        const WeightedSample pilot_sample = draw(data, uniform_plan(data.n()), config.r0, rng);
        const NewtonResult pilot_fit =
            newton_fit(pilot_sample, Vector::Zero(config.p), EstimationSettings{});
        if (!pilot_fit.converged) throw numerical_error("pilot did not converge");
        stage = label + " sampling plan";
        const SamplingPlan plan =
            optimal_plan(data, PilotEstimate{pilot_fit.beta, config.r0, true}, config.delta);
        const AliasTable table(plan.probabilities);  // shared across r values
        for (std::size_t j = 0; j < n_r; ++j) {
          const long r = config.r_values[j];
          stage = label + " OSP fit (r=" + std::to_string(r) + ")";
          std::vector<Index> draws(static_cast<std::size_t>(r));
          for (long k = 0; k < r; ++k) draws[static_cast<std::size_t>(k)] = table.draw(rng);
          const WeightedSample sample = subsample(data, draws, plan.probabilities);
          osp_sites[j].push_back(
              summarize_sample(sample, pilot_fit.beta, EstimationSettings{}, site_id,
                               config.delta));
        }
      }

      {  // uniform arm on the same dataset
        Rng rng = derive_stream(config.master_seed, {stream::kSampling, rep,
                                                     static_cast<std::uint64_t>(site),
                                                     stream::kUniform});
        const SamplingPlan plan = uniform_plan(data.n());
        const AliasTable table(plan.probabilities);
        for (std::size_t j = 0; j < n_r; ++j) {
          const long r = config.r_values[j];
          stage = label + " UNIF fit (r=" + std::to_string(r) + ")";
          std::vector<Index> draws(static_cast<std::size_t>(r));
          for (long k = 0; k < r; ++k) draws[static_cast<std::size_t>(k)] = table.draw(rng);
          const WeightedSample sample = subsample(data, draws, plan.probabilities);
          unif_sites[j].push_back(summarize_sample(sample, Vector::Zero(config.p),
                                                   EstimationSettings{}, site_id, config.delta));
        }
      }
    }
    for (std::size_t j = 0; j < n_r; ++j) {
      stage = "aggregation (r=" + std::to_string(config.r_values[j]) + ")";
      out.osp.push_back(aggregate(osp_sites[j]));
      out.unif.push_back(aggregate(unif_sites[j]));
    }
  } catch (const numerical_error& e) {
    out.failed = true;
    out.failure_stage = stage + ": " + e.what();
    out.osp.clear();
    out.unif.clear();
  } catch (const data_error& e) {
    out.failed = true;
    out.failure_stage = stage + ": " + e.what();
    out.osp.clear();
    out.unif.clear();
  }
  return out;
}

MetricsRow compute_metrics(const std::string& method, long r, const Vector& beta0,
                           const std::vector<ReplicateEstimate>& estimates, double level) {
  const int b = static_cast<int>(estimates.size());
  if (b < 2) throw std::invalid_argument("compute_metrics: need at least two estimates");
  const Index p = beta0.size();

  MetricsRow row;
  row.method = method;
  row.r = r;
  row.replications = b;
  Vector mean = Vector::Zero(p);
  Vector se_mean = Vector::Zero(p);
  double mse = 0.0;
  for (const ReplicateEstimate& e : estimates) {
    if (e.estimate.size() != p || e.se.size() != p)
      throw std::invalid_argument("compute_metrics: estimate dimension mismatch");
    mean += e.estimate;
    se_mean += e.se;
    mse += (e.estimate - beta0).squaredNorm();
  }
  mean /= b;
  se_mean /= b;
  mse /= b;

  Vector variance = Vector::Zero(p);
  for (const ReplicateEstimate& e : estimates)
    variance.array() += (e.estimate - mean).array().square();
  variance /= b - 1;

  const double z = inverse_normal_cdf((1.0 + level) / 2.0);
  Vector covered = Vector::Zero(p);
  for (const ReplicateEstimate& e : estimates) {
    for (Index j = 0; j < p; ++j) {
      if (std::abs(e.estimate[j] - beta0[j]) <= z * e.se[j]) covered[j] += 1.0;
    }
  }

  row.bias = mean - beta0;
  row.ese = variance.array().sqrt();
  row.se_mean = se_mean;
  row.cp = covered / b;
  row.mse = mse;
  return row;
}

ExperimentResult run_experiment(const SimConfig& config_in) {
  SimConfig config = config_in;
  validate(config);
  if (config.replications < 2)
    throw std::invalid_argument("run_experiment: replications must be >= 2");
  if (config.censoring_scale.empty()) calibrate_config(config);

  const int b = config.replications;
  std::vector<ReplicateResult> results(static_cast<std::size_t>(b));
  int n_threads =
      config.threads > 0
          ? config.threads
          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, b);

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> worker_errors(static_cast<std::size_t>(n_threads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = next.fetch_add(1); i < b; i = next.fetch_add(1))
          results[static_cast<std::size_t>(i)] = run_replicate(config, i);
      } catch (...) {
        worker_errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : worker_errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult out;
  out.replications = b;
  std::string first_failure;
  for (const ReplicateResult& r : results) {
    if (r.failed) {
      if (first_failure.empty()) first_failure = r.failure_stage;
      ++out.failures;
    }
  }
  if (out.failures * 20 > b) {
    throw numerical_error("experiment aborted: " + std::to_string(out.failures) + " of " +
                          std::to_string(b) + " replicates failed; first failure: " +
                          first_failure);
  }

  const auto collect = [&](bool use_osp, std::size_t j) {
    std::vector<ReplicateEstimate> estimates;
    estimates.reserve(results.size());
    for (const ReplicateResult& r : results) {
      if (r.failed) continue;
      const DistributedEstimate& est = use_osp ? r.osp[j] : r.unif[j];
      if (!satisfies_aggregation_bound(est, config.beta0)) ++out.aggregation_bound_violations;
      estimates.push_back(
          {r.replicate, est.beta_dse, est.omega_dse.diagonal().array().sqrt()});
    }
    return estimates;
  };

  for (const bool use_osp : {true, false}) {
    const std::string method = use_osp ? "OSP" : "UNIF";
    for (std::size_t j = 0; j < config.r_values.size(); ++j) {
      const long r = config.r_values[j];
      const auto estimates = collect(use_osp, j);
      out.rows.push_back(compute_metrics(method, r, config.beta0, estimates));
      for (const ReplicateEstimate& e : estimates)
        out.raw.push_back({method, r, e.replicate, e.estimate, e.se});
    }
  }
  return out;
}

std::vector<TimingRow> run_timing(const SimConfig& config_in) {
  SimConfig config = config_in;
  validate(config);
  if (config.censoring_scale.empty()) calibrate_config(config);
  const long r = config.r_values.front();
  const long n_total = config.n_per_site * config.k_sites;

  // data generated once, outside the timers; both arms and the full-data
  // oracle see identical inputs
  std::vector<SurvivalDataset> sites;
  sites.reserve(static_cast<std::size_t>(config.k_sites));
  for (int k = 0; k < config.k_sites; ++k) sites.push_back(gen_site_dataset(config, k, 0));

  SurvivalDataset pooled;
  pooled.time.resize(n_total);
  pooled.status.resize(n_total);
  pooled.covariates.resize(n_total, config.p);
  Index offset = 0;
  for (const SurvivalDataset& s : sites) {
    pooled.time.segment(offset, s.n()) = s.time;
    pooled.status.segment(offset, s.n()) = s.status;
    pooled.covariates.middleRows(offset, s.n()) = s.covariates;
    offset += s.n();
  }
  rebuild_sort_index(pooled);

  const int repeats = std::max(1, config.timing_repeats);
  const auto time_method = [&](auto&& body) {
    double total = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      body(rep);
      const auto stop = std::chrono::steady_clock::now();
      total += std::chrono::duration<double>(stop - start).count();
    }
    return total / repeats;
  };

  const auto site_pass = [&](SamplingMethod method, int rep) {
    std::vector<SiteSummary> summaries;
    for (int k = 0; k < config.k_sites; ++k) {
      Rng rng = derive_stream(config.master_seed,
                              {stream::kSampling, static_cast<std::uint64_t>(rep),
                               static_cast<std::uint64_t>(k),
                               method == SamplingMethod::Optimal ? stream::kOptimal
                                                                 : stream::kUniform});
      TwoStepOptions options;
      options.r0 = config.r0;
      options.r = r;
      options.delta = config.delta;
      options.method = method;
      options.site_id = "site_" + std::to_string(k + 1);
      summaries.push_back(two_step_fit(sites[static_cast<std::size_t>(k)], options, rng));
    }
    aggregate(summaries);
  };

  std::vector<TimingRow> rows;
  rows.push_back({"UNIF", n_total, config.p,
                  time_method([&](int rep) { site_pass(SamplingMethod::Uniform, rep); }),
                  repeats});
  rows.push_back({"OSP", n_total, config.p,
                  time_method([&](int rep) { site_pass(SamplingMethod::Optimal, rep); }),
                  repeats});
  rows.push_back({"FullData", n_total, config.p,
                  time_method([&](int) { full_data_fit(pooled); }), repeats});
  return rows;
}

void emit_reports(const ExperimentResult& result, const std::string& path_prefix) {
  const std::string metrics_path = path_prefix + "_metrics.csv";
  std::ofstream metrics(metrics_path);
  if (!metrics) throw data_error("cannot open '" + metrics_path + "' for writing");
  metrics << "method,r,coef,bias,ese,se,cp,mse,reps\n";
  for (const MetricsRow& row : result.rows) {
    for (Index j = 0; j < row.bias.size(); ++j) {
      metrics << row.method << ',' << row.r << ',' << j + 1 << ',' << fmt17(row.bias[j]) << ','
              << fmt17(row.ese[j]) << ',' << fmt17(row.se_mean[j]) << ',' << fmt17(row.cp[j])
              << ',' << fmt17(row.mse) << ',' << row.replications << "\n";
    }
  }
  if (!metrics) throw data_error("failed writing '" + metrics_path + "'");

  const std::string raw_path = path_prefix + "_raw.csv";
  std::ofstream raw(raw_path);
  if (!raw) throw data_error("cannot open '" + raw_path + "' for writing");
  const Index p = result.raw.empty() ? 0 : result.raw.front().estimate.size();
  raw << "method,r,replicate";
  for (Index j = 0; j < p; ++j) raw << ",est" << j + 1;
  for (Index j = 0; j < p; ++j) raw << ",se" << j + 1;
  raw << "\n";
  for (const RawEstimateRow& row : result.raw) {
    raw << row.method << ',' << row.r << ',' << row.replicate;
    for (Index j = 0; j < p; ++j) raw << ',' << fmt17(row.estimate[j]);
    for (Index j = 0; j < p; ++j) raw << ',' << fmt17(row.se[j]);
    raw << "\n";
  }
  if (!raw) throw data_error("failed writing '" + raw_path + "'");
}

std::vector<RawEstimateRow> read_raw_estimates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": missing header");
  strip_cr(line);
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "method" || header[1] != "r" ||
      header[2] != "replicate" || (header.size() - 3) % 2 != 0)
    throw data_error(path + ": unexpected raw-estimates header");
  const Index p = static_cast<Index>((header.size() - 3) / 2);

  std::vector<RawEstimateRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (static_cast<Index>(fields.size()) != 3 + 2 * p)
      throw data_error("line " + std::to_string(line_no) + ": wrong field count");
    RawEstimateRow row;
    row.method = fields[0];
    row.r = parse_csv_long(fields[1], line_no, "r");
    row.replicate = static_cast<int>(parse_csv_long(fields[2], line_no, "replicate"));
    row.estimate.resize(p);
    row.se.resize(p);
    for (Index j = 0; j < p; ++j) {
      row.estimate[j] = parse_csv_double(fields[static_cast<std::size_t>(3 + j)], line_no, "est");
      row.se[j] =
          parse_csv_double(fields[static_cast<std::size_t>(3 + p + j)], line_no, "se");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::vector<CovariateCase> parse_cases(const std::string& value) {
  if (value == "heterogeneous") return heterogeneous_cases();
  std::vector<CovariateCase> cases;
  for (const std::string& tok : split(value, ','))
    cases.push_back(covariate_case_from_string(trim(tok)));
  return cases;
}

}  // namespace

SimConfig parse_config(std::istream& in) {
  SimConfig config;
  config.beta0.resize(0);
  config.site_cases.clear();

  std::vector<CovariateCase> cases;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw data_error("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty())
      throw data_error("config line " + std::to_string(line_no) + ": empty value for '" + key +
                       "'");
    try {
      if (key == "k_sites") {
        config.k_sites = static_cast<int>(parse_csv_long(value, line_no, key));
      } else if (key == "n_per_site") {
        config.n_per_site = parse_csv_long(value, line_no, key);
      } else if (key == "p") {
        config.p = static_cast<int>(parse_csv_long(value, line_no, key));
      } else if (key == "beta0") {
        const auto toks = split(value, ',');
        config.beta0.resize(static_cast<Index>(toks.size()));
        for (std::size_t j = 0; j < toks.size(); ++j)
          config.beta0[static_cast<Index>(j)] = parse_csv_double(trim(toks[j]), line_no, key);
      } else if (key == "cases") {
        cases = parse_cases(value);
      } else if (key == "target_cr") {
        config.target_cr = parse_csv_double(value, line_no, key);
      } else if (key == "r0") {
        config.r0 = parse_csv_long(value, line_no, key);
      } else if (key == "r") {
        const auto toks = split(value, ',');
        config.r_values.clear();
        for (const std::string& tok : toks)
          config.r_values.push_back(parse_csv_long(trim(tok), line_no, key));
      } else if (key == "delta") {
        config.delta = parse_csv_double(value, line_no, key);
      } else if (key == "replications") {
        config.replications = static_cast<int>(parse_csv_long(value, line_no, key));
      } else if (key == "master_seed") {
        std::uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc{} || ptr != value.data() + value.size())
          throw data_error("config line " + std::to_string(line_no) + ": malformed master_seed");
        config.master_seed = seed;
      } else if (key == "threads") {
        config.threads = static_cast<int>(parse_csv_long(value, line_no, key));
      } else if (key == "timing_repeats") {
        config.timing_repeats = static_cast<int>(parse_csv_long(value, line_no, key));
      } else {
        throw data_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                         "'");
      }
    } catch (const data_error&) {
      throw;
    }
  }

  if (config.beta0.size() == 0) {
    if (config.p == 5) {
      config.beta0.resize(5);
      config.beta0 << -1.0, -0.5, 0.0, 0.5, 1.0;
    } else {
      throw data_error("config: beta0 must be given explicitly when p != 5");
    }
  }
  if (config.beta0.size() != config.p)
    throw data_error("config: beta0 length does not match p");
  if (cases.empty()) cases.assign(1, CovariateCase::NormalEquiCorr);
  if (cases.size() == 1 && config.k_sites > 1)
    cases.assign(static_cast<std::size_t>(config.k_sites), cases.front());
  if (static_cast<int>(cases.size()) != config.k_sites)
    throw data_error("config: number of cases must be 1 or k_sites");
  config.site_cases = cases;

  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw data_error(std::string("config: ") + e.what());
  }
  return config;
}

SimConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace dsubcox

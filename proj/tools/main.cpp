#include <CLI11.hpp>

#include "dsubcox/errors.hpp"
#include "dsubcox/harness.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace dsubcox;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// DSUBCOX_SEED trumps whatever the config file says
void apply_seed_override(SimConfig& config) {
  const char* env = std::getenv("DSUBCOX_SEED");
  if (env == nullptr) return;
  std::uint64_t seed = 0;
  const std::string text(env);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw data_error("DSUBCOX_SEED is not an unsigned integer: '" + text + "'");
  config.master_seed = seed;
}

int run_gen(const std::string& config_path, const std::string& out_dir, int replicate) {
  SimConfig config = read_config_file(config_path);
  apply_seed_override(config);
  calibrate_config(config);
  std::filesystem::create_directories(out_dir);
  for (int site = 0; site < config.k_sites; ++site) {
    const SurvivalDataset data = gen_site_dataset(config, site, replicate);
    const std::string path = out_dir + "/site_" + std::to_string(site + 1) + ".csv";
    write_csv(data, path);
    std::cout << path << ": n=" << data.n() << " p=" << data.p() << "\n";
  }
  return 0;
}

int run_fit_site(const std::string& in, const std::string& out, long r0, long r, double delta,
                 std::uint64_t seed, const std::string& method, const std::string& site_id) {
  const SurvivalDataset data = ingest_csv(in);
  TwoStepOptions options;
  options.r0 = r0;
  options.r = r;
  options.delta = delta;
  options.method = method == "unif" ? SamplingMethod::Uniform : SamplingMethod::Optimal;
  options.site_id = site_id.empty() ? std::filesystem::path(in).stem().string() : site_id;
  Rng rng(seed);
  const SiteSummary summary = two_step_fit(data, options, rng);
  write_summary_file(summary, out);
  std::cout << out << ": site=" << summary.site_id << " n=" << summary.n << " r=" << summary.r
            << " beta=[";
  for (Index j = 0; j < summary.p(); ++j)
    std::cout << (j ? " " : "") << summary.beta[j];
  std::cout << "]\n";
  return 0;
}

void print_estimate_table(const DistributedEstimate& est, double level,
                          const std::string& out_path) {
  const auto intervals = wald_intervals(est, level);
  std::cout << "sites=" << est.k << " total_r=" << est.total_r << " p=" << est.p() << "\n";
  std::cout << "coef  estimate      se            " << level * 100 << "% CI\n";
  for (Index j = 0; j < est.p(); ++j) {
    const double se = std::sqrt(est.omega_dse(j, j));
    std::printf("%-5ld % -12.6g % -12.6g [% .6g, % .6g]\n", static_cast<long>(j + 1),
                est.beta_dse[j], se, intervals[static_cast<std::size_t>(j)].lower,
                intervals[static_cast<std::size_t>(j)].upper);
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw data_error("cannot open '" + out_path + "' for writing");
    out << "coef,estimate,se,lower,upper\n";
    for (Index j = 0; j < est.p(); ++j) {
      const double se = std::sqrt(est.omega_dse(j, j));
      out << j + 1 << ',' << fmt17(est.beta_dse[j]) << ',' << fmt17(se) << ','
          << fmt17(intervals[static_cast<std::size_t>(j)].lower) << ','
          << fmt17(intervals[static_cast<std::size_t>(j)].upper) << "\n";
    }
  }
}

int run_aggregate(const std::vector<std::string>& files, double level,
                  const std::string& out_path) {
  std::vector<SiteSummary> summaries;
  summaries.reserve(files.size());
  for (const std::string& f : files) summaries.push_back(read_summary_file(f));
  const DistributedEstimate est = aggregate(summaries);
  print_estimate_table(est, level, out_path);
  return 0;
}

int run_fit_full(const std::string& in, double level, const std::string& out_path) {
  const SurvivalDataset data = ingest_csv(in);
  const FullDataFit fit = full_data_fit(data);
  if (!fit.converged) throw numerical_error("full-data fit did not converge");
  // package as a single-site estimate so the same reporting path applies
  DistributedEstimate est;
  est.beta_dse = fit.beta;
  est.omega_dse = fit.information.inverse();
  est.k = 1;
  est.total_r = data.n();
  std::cout << "full-data fit, n=" << data.n() << " loglik=" << fit.loglik << "\n";
  print_estimate_table(est, level, out_path);
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& prefix) {
  SimConfig config = read_config_file(config_path);
  apply_seed_override(config);
  const ExperimentResult result = run_experiment(config);
  emit_reports(result, prefix);
  std::cout << "replications=" << result.replications << " failures=" << result.failures
            << "\n";
  std::cout << "method  r     bias1       ese1       se1        cp1    mse\n";
  for (const MetricsRow& row : result.rows) {
    std::printf("%-6s  %-5ld % -10.4g % -10.4g % -10.4g %.3f  %.5g\n", row.method.c_str(),
                row.r, row.bias[0], row.ese[0], row.se_mean[0], row.cp[0], row.mse);
  }
  std::cout << "wrote " << prefix << "_metrics.csv and " << prefix << "_raw.csv\n";
  return 0;
}

int run_timing_cmd(const std::string& config_path, const std::string& out_path) {
  SimConfig config = read_config_file(config_path);
  apply_seed_override(config);
  const auto rows = run_timing(config);
  std::cout << "method    n_total   p   seconds\n";
  for (const TimingRow& row : rows) {
    std::printf("%-9s %-9ld %-3d %.3f\n", row.method.c_str(), row.n_total, row.p, row.seconds);
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw data_error("cannot open '" + out_path + "' for writing");
    out << "method,n_total,p,seconds,repeats\n";
    for (const TimingRow& row : rows)
      out << row.method << ',' << row.n_total << ',' << row.p << ',' << fmt17(row.seconds)
          << ',' << row.repeats << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed optimal-subsampling Cox regression"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate synthetic per-site CSV datasets");
  std::string gen_config, gen_out = ".";
  int gen_replicate = 0;
  gen->add_option("--config", gen_config, "experiment config file")->required();
  gen->add_option("--out-dir", gen_out, "output directory");
  gen->add_option("--replicate", gen_replicate, "replicate index to generate");

  auto* fit_site = app.add_subcommand("fit-site", "two-step subsample fit of one site CSV");
  std::string fs_in, fs_out, fs_method = "osp", fs_site_id;
  long fs_r0 = 200, fs_r = 800;
  double fs_delta = 0.1;
  std::uint64_t fs_seed = 1;
  fit_site->add_option("--in", fs_in, "site CSV (time,status,x1,...)")->required();
  fit_site->add_option("--out", fs_out, "summary file to write")->required();
  fit_site->add_option("--r0", fs_r0, "pilot subsample size");
  fit_site->add_option("--r", fs_r, "main subsample size");
  fit_site->add_option("--delta", fs_delta, "uniform mixing weight");
  fit_site->add_option("--seed", fs_seed, "sampling seed");
  fit_site->add_option("--method", fs_method, "osp or unif")
      ->check(CLI::IsMember({"osp", "unif"}));
  fit_site->add_option("--site-id", fs_site_id, "identifier (default: input stem)");

  auto* agg = app.add_subcommand("aggregate", "combine site summaries into one estimate");
  std::vector<std::string> agg_files;
  double agg_level = 0.95;
  std::string agg_out;
  agg->add_option("summaries", agg_files, "summary files")->required()->expected(-1);
  agg->add_option("--level", agg_level, "confidence level");
  agg->add_option("--out", agg_out, "also write estimate CSV here");

  auto* fit_full = app.add_subcommand("fit-full", "full-data oracle fit of a CSV");
  std::string ff_in, ff_out;
  double ff_level = 0.95;
  fit_full->add_option("--in", ff_in, "CSV (time,status,x1,...)")->required();
  fit_full->add_option("--level", ff_level, "confidence level");
  fit_full->add_option("--out", ff_out, "also write estimate CSV here");

  auto* exp = app.add_subcommand("experiment", "Monte Carlo comparison of OSP vs UNIF");
  std::string exp_config, exp_prefix = "experiment";
  exp->add_option("--config", exp_config, "experiment config file")->required();
  exp->add_option("--out-prefix", exp_prefix, "prefix for metrics/raw CSV outputs");

  auto* timing = app.add_subcommand("timing", "single-core wall-clock comparison");
  std::string tm_config, tm_out;
  timing->add_option("--config", tm_config, "experiment config file")->required();
  timing->add_option("--out", tm_out, "also write timing CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen_config, gen_out, gen_replicate);
    if (fit_site->parsed())
      return run_fit_site(fs_in, fs_out, fs_r0, fs_r, fs_delta, fs_seed, fs_method, fs_site_id);
    if (agg->parsed()) return run_aggregate(agg_files, agg_level, agg_out);
    if (fit_full->parsed()) return run_fit_full(ff_in, ff_level, ff_out);
    if (exp->parsed()) return run_experiment_cmd(exp_config, exp_prefix);
    if (timing->parsed()) return run_timing_cmd(tm_config, tm_out);
  } catch (const dsubcox::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const dsubcox::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

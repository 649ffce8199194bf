#include "dsubcox/federation.hpp"

#include "dsubcox/errors.hpp"
#include "dsubcox/linalg.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dsubcox {

namespace {

constexpr const char* kHeader = "dsubcox-summary";
constexpr int kVersion = 1;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

bool exactly_symmetric(const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i + 1; j < m.cols(); ++j)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

void require_encodable(const SiteSummary& s) {
  if (s.site_id.empty() || s.site_id.find_first_of(" \t\n\r") != std::string::npos)
    throw std::invalid_argument("encode_summary: site_id must be nonempty without whitespace");
  if (s.n < 1 || s.r < 1) throw std::invalid_argument("encode_summary: n and r must be >= 1");
  const Index p = s.p();
  if (p < 1 || s.psi.rows() != p || s.psi.cols() != p || s.gamma.rows() != p ||
      s.gamma.cols() != p)
    throw std::invalid_argument("encode_summary: inconsistent dimensions");
  if (!(s.delta >= 0.0 && s.delta <= 1.0))
    throw std::invalid_argument("encode_summary: delta must lie in [0,1]");
  if (!s.beta.allFinite() || !s.psi.allFinite() || !s.gamma.allFinite())
    throw std::invalid_argument("encode_summary: non-finite entries");
  if (!exactly_symmetric(s.psi) || !exactly_symmetric(s.gamma))
    throw std::invalid_argument("encode_summary: matrices must be symmetric");
  if (s.schema_version != kVersion)
    throw std::invalid_argument("encode_summary: unsupported schema version");
}

// sequential field reader with precise complaints
class FieldReader {
 public:
  explicit FieldReader(const std::string& payload) : stream_(payload) {}

  std::vector<std::string> record(const std::string& key) {
    std::string line;
    while (std::getline(stream_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::istringstream tokens(line);
      std::vector<std::string> fields;
      std::string tok;
      while (tokens >> tok) fields.push_back(tok);
      if (fields.front() != key)
        throw data_error("decode_summary: expected field '" + key + "', found '" +
                         fields.front() + "'");
      fields.erase(fields.begin());
      return fields;
    }
    throw data_error("decode_summary: truncated payload, missing field '" + key + "'");
  }

  void expect_end() {
    std::string line;
    while (std::getline(stream_, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw data_error("decode_summary: unexpected trailing content");
    }
  }

 private:
  std::istringstream stream_;
};

double parse_double(const std::string& tok, const std::string& field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(value))
    throw data_error("decode_summary: malformed field '" + field + "': '" + tok + "'");
  return value;
}

long parse_long(const std::string& tok, const std::string& field) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw data_error("decode_summary: malformed field '" + field + "': '" + tok + "'");
  return value;
}

std::vector<std::string> single(FieldReader& reader, const std::string& key) {
  auto fields = reader.record(key);
  if (fields.size() != 1)
    throw data_error("decode_summary: field '" + key + "' expects exactly one value");
  return fields;
}

Vector parse_vector(FieldReader& reader, const std::string& key, Index expected) {
  const auto fields = reader.record(key);
  if (static_cast<Index>(fields.size()) != expected)
    throw data_error("decode_summary: field '" + key + "' expects " + std::to_string(expected) +
                     " values, found " + std::to_string(fields.size()));
  Vector out(expected);
  for (Index i = 0; i < expected; ++i)
    out[i] = parse_double(fields[static_cast<std::size_t>(i)], key);
  return out;
}

Matrix parse_matrix(FieldReader& reader, const std::string& key, Index p) {
  const Vector flat = parse_vector(reader, key, p * p);
  Matrix out(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) out(i, j) = flat[i * p + j];
  if (!exactly_symmetric(out))
    throw data_error("decode_summary: matrix '" + key + "' is not symmetric");
  return out;
}

void append_values(std::string& out, const char* key, const double* data, Index count) {
  out += key;
  for (Index i = 0; i < count; ++i) {
    out += ' ';
    out += fmt17(data[i]);
  }
  out += '\n';
}

}  // namespace

std::string encode_summary(const SiteSummary& s) {
  require_encodable(s);
  const Index p = s.p();
  std::string out;
  out += kHeader;
  out += " v" + std::to_string(s.schema_version) + "\n";
  out += "site_id " + s.site_id + "\n";
  out += "n " + std::to_string(s.n) + "\n";
  out += "r " + std::to_string(s.r) + "\n";
  out += "p " + std::to_string(p) + "\n";
  out += "delta " + fmt17(s.delta) + "\n";
  append_values(out, "beta", s.beta.data(), p);
  // row-major on the wire
  const Matrix psi_t = s.psi.transpose();
  const Matrix gamma_t = s.gamma.transpose();
  append_values(out, "psi", psi_t.data(), p * p);
  append_values(out, "gamma", gamma_t.data(), p * p);
  return out;
}

SiteSummary decode_summary(const std::string& payload) {
  FieldReader reader(payload);
  const auto header = single(reader, kHeader);
  if (header.front() != "v" + std::to_string(kVersion))
    throw data_error("decode_summary: unsupported version '" + header.front() +
                     "', this build reads v" + std::to_string(kVersion));

  SiteSummary s;
  s.schema_version = kVersion;
  s.site_id = single(reader, "site_id").front();
  s.n = parse_long(single(reader, "n").front(), "n");
  s.r = parse_long(single(reader, "r").front(), "r");
  const long p = parse_long(single(reader, "p").front(), "p");
  if (s.n < 1 || s.r < 1 || p < 1)
    throw data_error("decode_summary: n, r and p must be positive");
  s.delta = parse_double(single(reader, "delta").front(), "delta");
  if (!(s.delta >= 0.0 && s.delta <= 1.0))
    throw data_error("decode_summary: delta outside [0,1]");
  s.beta = parse_vector(reader, "beta", p);
  s.psi = parse_matrix(reader, "psi", p);
  s.gamma = parse_matrix(reader, "gamma", p);
  reader.expect_end();
  return s;
}

void write_summary_file(const SiteSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << encode_summary(summary);
  if (!out) throw data_error("failed writing '" + path + "'");
}

SiteSummary read_summary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_summary(buffer.str());
}

DistributedEstimate aggregate(const std::vector<SiteSummary>& summaries) {
  if (summaries.empty()) throw std::invalid_argument("aggregate: no summaries");
  const Index p = summaries.front().p();
  const int version = summaries.front().schema_version;

  Matrix sum_psi = Matrix::Zero(p, p);
  Matrix sum_gamma = Matrix::Zero(p, p);
  Vector rhs = Vector::Zero(p);
  long total_r = 0;
  for (const SiteSummary& s : summaries) {
    if (s.p() != p || s.psi.rows() != p || s.psi.cols() != p || s.gamma.rows() != p ||
        s.gamma.cols() != p)
      throw data_error("aggregate: sites disagree on covariate dimension");
    if (s.schema_version != version)
      throw data_error("aggregate: sites disagree on schema version");
    if (!s.beta.allFinite() || !s.psi.allFinite() || !s.gamma.allFinite())
      throw data_error("aggregate: non-finite summary for site '" + s.site_id + "'");
    sum_psi += s.psi;
    sum_gamma += s.gamma;
    rhs.noalias() += s.psi * s.beta;
    total_r += s.r;
  }

  DistributedEstimate est;
  est.beta_dse = spd_factor(sum_psi, "aggregate information").solve(rhs);
  est.omega_dse = sandwich_variance(sum_psi, sum_gamma, "aggregate information");
  est.k = static_cast<int>(summaries.size());
  est.per_site = summaries;
  est.total_r = total_r;
  return est;
}

std::vector<ConfidenceInterval> wald_intervals(const DistributedEstimate& estimate,
                                               double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("wald_intervals: level must lie in (0,1)");
  const Index p = estimate.p();
  if (estimate.omega_dse.rows() != p || estimate.omega_dse.cols() != p)
    throw std::invalid_argument("wald_intervals: covariance dimension mismatch");
  const double z = inverse_normal_cdf((1.0 + level) / 2.0);
  std::vector<ConfidenceInterval> intervals;
  intervals.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const double variance = estimate.omega_dse(j, j);
    if (!(variance > 0.0))
      throw numerical_error("wald_intervals: nonpositive variance for coefficient " +
                            std::to_string(j));
    const double half_width = z * std::sqrt(variance);
    intervals.push_back({j, estimate.beta_dse[j] - half_width,
                         estimate.beta_dse[j] + half_width, level});
  }
  return intervals;
}

bool satisfies_aggregation_bound(const DistributedEstimate& estimate, const Vector& reference,
                                 double relative_slack) {
  const double lhs = (estimate.beta_dse - reference).norm();
  double worst = 0.0;
  for (const SiteSummary& s : estimate.per_site)
    worst = std::max(worst, (s.beta - reference).norm());
  const double rhs = static_cast<double>(estimate.k) * worst;
  return lhs <= rhs + relative_slack * (1.0 + rhs);
}

}  // namespace dsubcox

#include "civi/sivi/blr.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "civi/composition/rng.hpp"

namespace civi::sivi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

void BlrDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw ConfigError("BlrDataset: " + std::to_string(features.rows()) + " feature rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  if (features.rows() < 1 || features.cols() < 1) {
    throw ConfigError("BlrDataset: empty dataset");
  }
  if (!(prior_variance > 0.0)) {
    throw ConfigError("BlrDataset: prior variance must be positive");
  }
  if (!features.allFinite()) {
    throw ConfigError("BlrDataset: non-finite feature value");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 0.0 && labels(i) != 1.0) {
      throw ConfigError("BlrDataset: label on row " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

BlrDataset load_blr_csv(const std::filesystem::path& path, bool standardize) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("load_blr_csv: cannot open " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("load_blr_csv: " + path.string() + " line " + std::to_string(line_no) +
                          ": cannot parse '" + cell + "'");
      }
    }
    if (row.size() < 2) {
      throw ConfigError("load_blr_csv: " + path.string() + " line " + std::to_string(line_no) +
                        ": need at least one feature and a label");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("load_blr_csv: " + path.string() + " line " + std::to_string(line_no) +
                        ": expected " + std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ConfigError("load_blr_csv: " + path.string() + " has no rows");
  }
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(rows.front().size()) - 1;
  BlrDataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.features(i, j) = rows[i][j];
    data.labels(i) = rows[i][d];
  }
  data.validate();
  if (standardize) standardize_features(data);
  return data;
}

void write_blr_csv(const BlrDataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("write_blr_csv: cannot open " + path.string());
  }
  char buf[32];
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features(i, j));
      out << buf << ',';
    }
    out << static_cast<int>(data.labels(i)) << '\n';
  }
}

void standardize_features(BlrDataset& data) {
  const auto n = static_cast<double>(data.size());
  for (Index j = 0; j < data.dim(); ++j) {
    auto col = data.features.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0.0) col /= sd;
  }
}

BlrDataset synthesize_blr(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) {
    throw ConfigError("synthesize_blr: n and d must be positive");
  }
  auto rng = composition::make_stream(seed, 0, composition::Stream::kEvaluation);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unif;
  Vector truth(d);
  for (Index j = 0; j < d; ++j) truth(j) = nd(rng);
  BlrDataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.features(i, j) = nd(rng);
    const double a = data.features.row(i).dot(truth);
    data.labels(i) = unif(rng) < std::exp(log_sigmoid(a)) ? 1.0 : 0.0;
  }
  return data;
}

double log_sigmoid(double a) { return std::min(a, 0.0) - std::log1p(std::exp(-std::abs(a))); }

diffcore::ValueGrad blr_log_joint(const BlrDataset& data, const Vector& z) {
  if (z.size() != data.dim()) {
    throw DimensionError("blr_log_joint: z has length " + std::to_string(z.size()) +
                         ", dataset has " + std::to_string(data.dim()) + " features");
  }
  const double var = data.prior_variance;
  const auto d = static_cast<double>(z.size());
  double value = -0.5 * d * (kLog2Pi + std::log(var)) - 0.5 * z.squaredNorm() / var;
  Vector grad = -z / var;
  const Vector a = data.features * z;
  Vector resid(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    // y log s(a) + (1 - y) log s(-a)
    value += data.labels(i) == 1.0 ? log_sigmoid(a(i)) : log_sigmoid(-a(i));
    resid(i) = data.labels(i) - std::exp(log_sigmoid(a(i)));
  }
  grad.noalias() += data.features.transpose() * resid;
  return {value, grad};
}

TargetDensity make_blr_target(std::shared_ptr<const BlrDataset> data) {
  if (!data) {
    throw ConfigError("make_blr_target: null dataset");
  }
  data->validate();
  const Index dim = data->dim();
  return TargetDensity{TargetKind::kBlr, dim,
                       [data = std::move(data)](const Vector& z) { return blr_log_joint(*data, z); }};
}

}  // namespace civi::sivi

#include "civi/sivi/target.hpp"

#include <cmath>
#include <vector>

namespace civi::sivi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct GaussianTerm {
  Vector mean;
  Matrix precision;
  double log_norm = 0.0;
};

GaussianTerm make_term(const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("Gaussian target: covariance is not positive definite");
  }
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return GaussianTerm{mean, llt.solve(Matrix::Identity(cov.rows(), cov.cols())),
                      -0.5 * static_cast<double>(mean.size()) * kLog2Pi - 0.5 * log_det};
}

diffcore::ValueGrad eval_mixture(const std::vector<GaussianTerm>& terms, const Vector& z) {
  std::vector<double> logs(terms.size());
  std::vector<Vector> grads(terms.size());
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Vector d = z - terms[i].mean;
    const Vector pd = terms[i].precision * d;
    logs[i] = terms[i].log_norm - 0.5 * d.dot(pd);
    grads[i] = -pd;
    hi = std::max(hi, logs[i]);
  }
  double total = 0.0;
  Vector grad = Vector::Zero(z.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double w = std::exp(logs[i] - hi);
    total += w;
    grad += w * grads[i];
  }
  const double log_w = -std::log(static_cast<double>(terms.size()));
  return {hi + std::log(total) + log_w, grad / total};
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

const std::vector<GaussianTerm>& two_modal_terms() {
  static const std::vector<GaussianTerm> terms{make_term(Vector{{-2.0, 0.0}}, Matrix::Identity(2, 2)),
                                               make_term(Vector{{2.0, 0.0}}, Matrix::Identity(2, 2))};
  return terms;
}

const std::vector<GaussianTerm>& star_terms() {
  static const std::vector<GaussianTerm> terms{
      make_term(Vector::Zero(2), mat2(2.0, 1.8, 1.8, 2.0)),
      make_term(Vector::Zero(2), mat2(2.0, -1.8, -1.8, 2.0))};
  return terms;
}

const GaussianTerm& banana_base() {
  static const GaussianTerm term = make_term(Vector::Zero(2), mat2(1.0, 0.9, 0.9, 1.0));
  return term;
}

}  // namespace

TargetKind parse_target_kind(const std::string& name) {
  if (name == "two-modal") return TargetKind::kTwoModal;
  if (name == "star") return TargetKind::kStar;
  if (name == "banana") return TargetKind::kBanana;
  if (name == "blr") return TargetKind::kBlr;
  if (name == "custom") return TargetKind::kCustom;
  throw ConfigError("unknown target '" + name + "' (expected two-modal, star, banana, blr, custom)");
}

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::kTwoModal: return "two-modal";
    case TargetKind::kStar: return "star";
    case TargetKind::kBanana: return "banana";
    case TargetKind::kBlr: return "blr";
    case TargetKind::kCustom: return "custom";
  }
  return "custom";
}

diffcore::ValueGrad toy_log_density(TargetKind kind, const Vector& z) {
  if (z.size() != 2) {
    throw DimensionError("toy_log_density: toy targets are two-dimensional");
  }
  switch (kind) {
    case TargetKind::kTwoModal:
      return eval_mixture(two_modal_terms(), z);
    case TargetKind::kStar:
      return eval_mixture(star_terms(), z);
    case TargetKind::kBanana: {
      const Vector x{{z(0), z(1) + z(0) * z(0) + 1.0}};
      const diffcore::ValueGrad base = eval_mixture({banana_base()}, x);
      // Chain rule through the inverse transform; the Jacobian determinant is 1.
      return {base.value, Vector{{base.grad(0) + 2.0 * z(0) * base.grad(1), base.grad(1)}}};
    }
    default:
      throw ConfigError("toy_log_density: '" + to_string(kind) + "' is not a toy target");
  }
}

TargetDensity make_toy_target(TargetKind kind) {
  (void)toy_log_density(kind, Vector::Zero(2));
  return TargetDensity{kind, 2, [kind](const Vector& z) { return toy_log_density(kind, z); }};
}

TargetDensity make_gaussian_target(const Vector& mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw DimensionError("make_gaussian_target: covariance shape mismatch");
  }
  const std::vector<GaussianTerm> terms{make_term(mean, cov)};
  return TargetDensity{TargetKind::kCustom, mean.size(),
                       [terms](const Vector& z) { return eval_mixture(terms, z); }};
}

diffcore::ValueGrad gaussian_mixture_log_density(const std::vector<Vector>& means,
                                                 const std::vector<Matrix>& covs, const Vector& z) {
  if (means.size() != covs.size() || means.empty()) {
    throw DimensionError("gaussian_mixture_log_density: need matching non-empty components");
  }
  std::vector<GaussianTerm> terms;
  for (std::size_t i = 0; i < means.size(); ++i) {
    terms.push_back(make_term(means[i], covs[i]));
  }
  return eval_mixture(terms, z);
}

}  // namespace civi::sivi

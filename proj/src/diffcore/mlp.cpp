#include "civi/diffcore/mlp.hpp"

#include <cmath>
#include <string>

namespace civi::diffcore {

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ConfigError("MlpSpec: input and output widths must be positive");
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i] < 1) {
      throw ConfigError("MlpSpec: hidden layer " + std::to_string(i) + " has non-positive width");
    }
  }
}

std::vector<Index> MlpSpec::widths() const {
  std::vector<Index> w;
  w.push_back(input_dim);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output_dim);
  return w;
}

Index MlpSpec::param_count() const {
  const auto w = widths();
  Index total = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    total += w[l + 1] * w[l] + w[l + 1];
  }
  return total;
}

ParamVector xavier_normal_init(const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const auto w = spec.widths();
  ParamVector p = ParamVector::Zero(spec.param_count());
  Index pos = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double sd = std::sqrt(2.0 / static_cast<double>(w[l] + w[l + 1]));
    std::normal_distribution<double> dist(0.0, sd);
    const Index nw = w[l + 1] * w[l];
    for (Index i = 0; i < nw; ++i) {
      p(pos + i) = dist(rng);
    }
    pos += nw + w[l + 1];
  }
  return p;
}

namespace {

void check_layout(const MlpSpec& spec, Index available, Index rows_in) {
  spec.validate();
  if (available < spec.param_count()) {
    throw DimensionError("mlp_forward: parameter slice has " + std::to_string(available) +
                         " entries, network needs " + std::to_string(spec.param_count()));
  }
  if (rows_in != spec.input_dim) {
    throw DimensionError("mlp_forward: layer 0 expects input width " +
                         std::to_string(spec.input_dim) + ", got " + std::to_string(rows_in));
  }
}

}  // namespace

Matrix mlp_forward(const MlpSpec& spec, const Eigen::Ref<const Vector>& params,
                   const Matrix& input) {
  check_layout(spec, params.size(), input.rows());
  const auto w = spec.widths();
  Matrix h = input;
  Index pos = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    Eigen::Map<const Matrix> weight(params.data() + pos, w[l + 1], w[l]);
    pos += w[l + 1] * w[l];
    Eigen::Map<const Vector> bias(params.data() + pos, w[l + 1]);
    pos += w[l + 1];
    Matrix next = weight * h;
    next.colwise() += bias;
    if (l + 2 < w.size()) {
      if (spec.activation == Activation::kRelu) {
        next = next.cwiseMax(0.0);
      } else {
        next = next.array().tanh();
      }
    }
    h = std::move(next);
  }
  return h;
}

Vector mlp_forward(const MlpSpec& spec, const Eigen::Ref<const Vector>& params,
                   const Vector& input) {
  return mlp_forward(spec, params, Matrix(input)).col(0);
}

Var mlp_forward(const MlpSpec& spec, Var params, Index offset, Var input) {
  check_layout(spec, params.rows() - offset, input.rows());
  const auto w = spec.widths();
  Var h = input;
  Index pos = offset;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    Var weight = slice(params, pos, w[l + 1], w[l]);
    pos += w[l + 1] * w[l];
    Var bias = slice(params, pos, w[l + 1], 1);
    pos += w[l + 1];
    h = add_col(matmul(weight, h), bias);
    if (l + 2 < w.size()) {
      h = spec.activation == Activation::kRelu ? relu(h) : tanh(h);
    }
  }
  return h;
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") {
    return Activation::kRelu;
  }
  if (name == "tanh") {
    return Activation::kTanh;
  }
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

}  // namespace civi::diffcore

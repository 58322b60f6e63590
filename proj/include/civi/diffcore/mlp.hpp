#pragma once

#include <random>
#include <vector>

#include "civi/diffcore/ops.hpp"

namespace civi::diffcore {

enum class Activation { kRelu, kTanh };

/// Fully connected network: input -> hidden... -> output, activation after
/// every hidden layer, linear output layer.
struct MlpSpec {
  Index input_dim = 1;
  std::vector<Index> hidden;
  Index output_dim = 1;
  Activation activation = Activation::kRelu;

  void validate() const;
  /// Total number of weights and biases.
  [[nodiscard]] Index param_count() const;
  /// Layer widths including input and output.
  [[nodiscard]] std::vector<Index> widths() const;
};

/// Xavier-normal weights (std = sqrt(2 / (fan_in + fan_out))), zero biases.
/// Per layer the weight matrix is stored column-major (out x in), followed
/// by the bias vector.
ParamVector xavier_normal_init(const MlpSpec& spec, std::mt19937_64& rng);

/// Plain forward pass over the columns of `input` (input_dim x s).
Matrix mlp_forward(const MlpSpec& spec, const Eigen::Ref<const Vector>& params,
                   const Matrix& input);
Vector mlp_forward(const MlpSpec& spec, const Eigen::Ref<const Vector>& params,
                   const Vector& input);

/// Recorded forward pass reading the network from params[offset, ...).
Var mlp_forward(const MlpSpec& spec, Var params, Index offset, Var input);

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

}  // namespace civi::diffcore

#include "civi/diffcore/tape.hpp"

#include <string>

namespace civi::diffcore {

const Matrix& Var::value() const {
  if (tape_ == nullptr) {
    throw UsageError("Var: handle is not attached to a tape");
  }
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("Var::scalar: node is " + std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()) + ", expected 1x1");
  }
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs_grad = false;
  for (const Var& p : parents) {
    check_owned(p);
    needs_grad = needs_grad || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs_grad ? std::move(backward) : nullptr,
                        needs_grad});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw UsageError("Tape: variable belongs to a different tape");
  }
}

void Tape::ensure_adjoint(Node& node) {
  if (node.adjoint.size() == 0) {
    node.adjoint = Matrix::Zero(node.value.rows(), node.value.cols());
  }
}

void Tape::accumulate(Var v, const Matrix& delta) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) {
    return;
  }
  if (delta.rows() != node.value.rows() || delta.cols() != node.value.cols()) {
    throw DimensionError("Tape::accumulate: adjoint shape mismatch at node " +
                         std::to_string(v.id()));
  }
  ensure_adjoint(node);
  node.adjoint += delta;
}

void Tape::accumulate_block(Var v, Index row, Index col, const Matrix& delta) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) {
    return;
  }
  ensure_adjoint(node);
  node.adjoint.block(row, col, delta.rows(), delta.cols()) += delta;
}

void Tape::backward(Var output) {
  if (nodes_.empty()) {
    throw UsageError("Tape::backward: nothing has been recorded (run a forward pass first)");
  }
  check_owned(output);
  if (backward_done_) {
    throw UsageError("Tape::backward: tape was already consumed by a backward pass");
  }
  Node& out = nodes_[output.id()];
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw DimensionError("Tape::backward: output must be a scalar");
  }
  for (Node& node : nodes_) {
    node.adjoint.resize(0, 0);
  }
  if (out.requires_grad) {
    out.adjoint = Matrix::Ones(1, 1);
  }
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.adjoint.size() == 0) {
      continue;
    }
    // Copied: the callback writes into other nodes of the same vector.
    const Matrix adjoint = node.adjoint;
    node.backward(*this, adjoint);
  }
  backward_done_ = true;
}

Matrix Tape::gradient(Var v) const {
  check_owned(v);
  if (!backward_done_) {
    throw UsageError("Tape::gradient: call backward() first");
  }
  const Node& node = nodes_[v.id()];
  if (node.adjoint.size() == 0) {
    return Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.adjoint;
}

}  // namespace civi::diffcore

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "civi/types.hpp"

namespace civi::diffcore {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] Tape* tape() const { return tape_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Index rows() const { return value().rows(); }
  [[nodiscard]] Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation record. Every node holds a dense matrix
/// value; vectors are n x 1 matrices and scalars are 1 x 1.
///
/// Nodes are appended in evaluation order, so the record is topologically
/// sorted by construction. backward() walks it once in reverse.
/// A tape is meant to be built for a single evaluation and thrown away.
class Tape {
 public:
  /// Propagates the adjoint of one node into its parents via accumulate().
  using BackwardFn = std::function<void(Tape&, const Matrix& adjoint)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable leaf.
  Var variable(Matrix value);
  /// Non-differentiable leaf.
  Var constant(Matrix value);
  Var constant(double value);

  /// Records an interior node. `backward` is dropped when no parent needs a
  /// gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);

  [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Seeds d(output)/d(output) = 1 and propagates. `output` must be 1 x 1.
  void backward(Var output);

  /// Adjoint of `v` after backward(); zeros if nothing flowed into it.
  [[nodiscard]] Matrix gradient(Var v) const;

  /// Adds `delta` into the adjoint of `v`. Called from backward functions.
  void accumulate(Var v, const Matrix& delta);
  /// Adds `delta` into a block of the adjoint of `v`.
  void accumulate_block(Var v, Index row, Index col, const Matrix& delta);

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;  // empty until something flows in
    BackwardFn backward;
    bool requires_grad = false;
  };

  void ensure_adjoint(Node& node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace civi::diffcore

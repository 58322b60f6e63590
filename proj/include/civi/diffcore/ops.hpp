#pragma once

#include <functional>
#include <string>

#include "civi/diffcore/tape.hpp"

namespace civi::diffcore {

// Elementwise arithmetic. Shapes must match exactly.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

// Elementwise nonlinearities.
Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var tanh(Var a);
Var square(Var a);

Var matmul(Var a, Var b);
/// Adds the column vector `b` to every column of `a`.
Var add_col(Var a, Var b);

/// Sum of all entries, 1 x 1.
Var sum(Var a);
Var mean(Var a);
/// log(sum_j exp(a_ij)) per row, rows x 1.
Var rowwise_logsumexp(Var a);
/// sum_ij w_ij * a_ij with constant weights, 1 x 1.
Var weighted_sum(Var a, const Matrix& w);

/// Column-major reshape of params[offset, offset + rows*cols) into rows x cols.
Var slice(Var params, Index offset, Index rows, Index cols);

enum class FactorKind { kDiagonal, kCholesky };

/// Number of stored entries for a d-dimensional factor of the given kind.
Index factor_size(FactorKind kind, Index d);

/// Lower-triangular factor L built from params starting at `offset`.
/// Diagonal kind stores d log-diagonals. Cholesky kind stores the lower
/// triangle column by column with diagonal entries in log scale.
Var lower_factor(Var params, Index offset, Index d, FactorKind kind);

/// out(j, k) = log N(z_j; m_k, L L^T) for columns z_j of Z (d x s) and
/// m_k of M (d x K). Result is s x K.
Var pairwise_gauss_logpdf(Var z, Var m, Var l);

/// out(j) = log N(z_j; m_j, L L^T), Z and M both d x s. Result is s x 1.
Var paired_gauss_logpdf(Var z, Var m, Var l);

/// Value and gradient of a scalar function of one column.
struct ValueGrad {
  double value = 0.0;
  Vector grad;
};
using ColumnFn = std::function<ValueGrad(const Vector&)>;

/// Names column j in error messages.
using ColumnLabel = std::function<std::string(Index)>;

/// Applies `fn` to every column of Z (d x s). Result is s x 1.
/// Throws NumericError on a non-finite value, naming the column via `label`.
Var columnwise(Var z, const ColumnFn& fn, const ColumnLabel& label = {});

}  // namespace civi::diffcore

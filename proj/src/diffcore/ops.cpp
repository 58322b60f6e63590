#include "civi/diffcore/ops.hpp"

#include <cmath>
#include <string>

namespace civi::diffcore {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

void require_tape(const char* op, Var a, Var b) {
  if (a.tape() != b.tape()) {
    throw UsageError(std::string(op) + ": operands live on different tapes");
  }
}

Tape& tape_of(Var a) {
  if (!a.valid()) {
    throw UsageError("diffcore: operation on a detached variable");
  }
  return *a.tape();
}

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

Var add(Var a, Var b) {
  require_tape("add", a, b);
  require_same_shape("add", a, b);
  return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_tape("sub", a, b);
  require_same_shape("sub", a, b);
  return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_tape("mul", a, b);
  require_same_shape("mul", a, b);
  return tape_of(a).record(a.value().cwiseProduct(b.value()), {a, b},
                           [a, b](Tape& t, const Matrix& g) {
                             t.accumulate(a, g.cwiseProduct(b.value()));
                             t.accumulate(b, g.cwiseProduct(a.value()));
                           });
}

Var scale(Var a, double c) {
  return tape_of(a).record(c * a.value(), {a},
                           [a, c](Tape& t, const Matrix& g) { t.accumulate(a, c * g); });
}

Var add_scalar(Var a, double c) {
  return tape_of(a).record(a.value().array() + c, {a},
                           [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp();
  return tape_of(a).record(out, {a}, [a, out](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(out));
  });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) {
    throw NumericError("log: non-positive argument");
  }
  return tape_of(a).record(a.value().array().log(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var relu(Var a) {
  return tape_of(a).record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh();
  return tape_of(a).record(out, {a}, [a, out](Tape& t, const Matrix& g) {
    t.accumulate(a, g.array() * (1.0 - out.array().square()));
  });
}

Var square(Var a) {
  return tape_of(a).record(a.value().array().square(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var matmul(Var a, Var b) {
  require_tape("matmul", a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " disagree");
  }
  return tape_of(a).record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) {
      t.accumulate(a, g * b.value().transpose());
    }
    if (t.requires_grad(b)) {
      t.accumulate(b, a.value().transpose() * g);
    }
  });
}

Var add_col(Var a, Var b) {
  require_tape("add_col", a, b);
  if (b.cols() != 1 || b.rows() != a.rows()) {
    throw DimensionError("add_col: bias must be " + std::to_string(a.rows()) + "x1");
  }
  Matrix out = a.value().colwise() + b.value().col(0);
  return tape_of(a).record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g.rowwise().sum());
  });
}

Var sum(Var a) {
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().sum()), {a},
                           [a](Tape& t, const Matrix& g) {
                             t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                           });
}

Var mean(Var a) {
  if (a.value().size() == 0) {
    throw DimensionError("mean: empty input");
  }
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var rowwise_logsumexp(Var a) {
  const Matrix& x = a.value();
  if (x.cols() == 0) {
    throw DimensionError("rowwise_logsumexp: no columns");
  }
  Vector hi = x.rowwise().maxCoeff();
  Matrix w = (x.colwise() - hi).array().exp();
  Vector s = w.rowwise().sum();
  Matrix out = (hi.array() + s.array().log()).matrix();
  // Softmax weights per row, reused by the backward pass.
  w = w.array().colwise() / s.array();
  return tape_of(a).record(std::move(out), {a}, [a, w](Tape& t, const Matrix& g) {
    t.accumulate(a, w.array().colwise() * g.col(0).array());
  });
}

Var weighted_sum(Var a, const Matrix& w) {
  if (w.rows() != a.rows() || w.cols() != a.cols()) {
    throw DimensionError("weighted_sum: weight shape mismatch");
  }
  return tape_of(a).record(Matrix::Constant(1, 1, a.value().cwiseProduct(w).sum()), {a},
                           [a, w](Tape& t, const Matrix& g) { t.accumulate(a, g(0, 0) * w); });
}

Var slice(Var params, Index offset, Index rows, Index cols) {
  const Matrix& p = params.value();
  if (p.cols() != 1) {
    throw DimensionError("slice: parameters must be a column vector");
  }
  if (offset < 0 || rows < 0 || cols < 0 || offset + rows * cols > p.rows()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + rows * cols) + ") exceeds parameter length " +
                         std::to_string(p.rows()));
  }
  Matrix out = Eigen::Map<const Matrix>(p.data() + offset, rows, cols);
  return tape_of(params).record(std::move(out), {params},
                                [params, offset](Tape& t, const Matrix& g) {
                                  t.accumulate_block(
                                      params, offset, 0,
                                      Eigen::Map<const Matrix>(g.data(), g.size(), 1));
                                });
}

Index factor_size(FactorKind kind, Index d) {
  return kind == FactorKind::kDiagonal ? d : d * (d + 1) / 2;
}

Var lower_factor(Var params, Index offset, Index d, FactorKind kind) {
  const Matrix& p = params.value();
  const Index need = factor_size(kind, d);
  if (p.cols() != 1 || offset < 0 || offset + need > p.rows()) {
    throw DimensionError("lower_factor: parameter range too short for a " + std::to_string(d) +
                         "-dimensional factor");
  }
  Matrix l = Matrix::Zero(d, d);
  if (kind == FactorKind::kDiagonal) {
    for (Index i = 0; i < d; ++i) {
      l(i, i) = std::exp(p(offset + i, 0));
    }
  } else {
    Index pos = offset;
    for (Index j = 0; j < d; ++j) {
      for (Index i = j; i < d; ++i, ++pos) {
        l(i, j) = (i == j) ? std::exp(p(pos, 0)) : p(pos, 0);
      }
    }
  }
  return tape_of(params).record(
      l, {params}, [params, offset, d, kind, l](Tape& t, const Matrix& g) {
        Matrix delta(factor_size(kind, d), 1);
        if (kind == FactorKind::kDiagonal) {
          for (Index i = 0; i < d; ++i) {
            delta(i, 0) = g(i, i) * l(i, i);
          }
        } else {
          Index pos = 0;
          for (Index j = 0; j < d; ++j) {
            for (Index i = j; i < d; ++i, ++pos) {
              delta(pos, 0) = (i == j) ? g(i, i) * l(i, i) : g(i, j);
            }
          }
        }
        t.accumulate_block(params, offset, 0, delta);
      });
}

namespace {

void check_factor(const char* op, Var z, Var m, Var l) {
  require_tape(op, z, m);
  require_tape(op, z, l);
  const Index d = z.rows();
  if (m.rows() != d || l.rows() != d || l.cols() != d) {
    throw DimensionError(std::string(op) + ": dimension mismatch between points, means and factor");
  }
  const Matrix& lv = l.value();
  for (Index i = 0; i < d; ++i) {
    if (!(lv(i, i) > 0.0) || !std::isfinite(lv(i, i))) {
      throw NumericError(std::string(op) + ": factor diagonal must be finite and positive");
    }
  }
}

// Adjoint of the factor from whitened points W = L^{-1} X, given adj_X = L^{-T} adj_W.
Matrix factor_adjoint(const Matrix& adj_x, const Matrix& w) {
  Matrix a = -adj_x * w.transpose();
  return a.triangularView<Eigen::Lower>();
}

}  // namespace

Var pairwise_gauss_logpdf(Var z, Var m, Var l) {
  check_factor("pairwise_gauss_logpdf", z, m, l);
  const Index d = z.rows();
  const Index s = z.cols();
  const Index k = m.cols();
  const auto lower = l.value().triangularView<Eigen::Lower>();
  Matrix a = lower.solve(z.value());
  Matrix b = lower.solve(m.value());
  const double log_det = l.value().diagonal().array().log().sum();
  const double c = -0.5 * static_cast<double>(d) * kLog2Pi - log_det;
  Matrix out(s, k);
  for (Index kk = 0; kk < k; ++kk) {
    for (Index j = 0; j < s; ++j) {
      double q = 0.0;
      for (Index i = 0; i < d; ++i) {
        const double r = a(i, j) - b(i, kk);
        q += r * r;
      }
      out(j, kk) = c - 0.5 * q;
    }
  }
  return tape_of(z).record(std::move(out), {z, m, l}, [z, m, l, a, b](Tape& t, const Matrix& g) {
    const auto lower = l.value().triangularView<Eigen::Lower>();
    const Vector row = g.rowwise().sum();
    const Vector col = g.colwise().sum().transpose();
    Matrix adj_a = b * g.transpose() - a * row.asDiagonal();
    Matrix adj_b = a * g - b * col.asDiagonal();
    Matrix adj_z = lower.transpose().solve(adj_a);
    Matrix adj_m = lower.transpose().solve(adj_b);
    if (t.requires_grad(l)) {
      Matrix adj_l = factor_adjoint(adj_z, a) + factor_adjoint(adj_m, b);
      adj_l.diagonal() -= g.sum() * l.value().diagonal().cwiseInverse();
      t.accumulate(l, adj_l);
    }
    t.accumulate(z, adj_z);
    t.accumulate(m, adj_m);
  });
}

Var paired_gauss_logpdf(Var z, Var m, Var l) {
  check_factor("paired_gauss_logpdf", z, m, l);
  if (m.cols() != z.cols()) {
    throw DimensionError("paired_gauss_logpdf: points and means must have equal counts");
  }
  const Index d = z.rows();
  const auto lower = l.value().triangularView<Eigen::Lower>();
  Matrix a = lower.solve(z.value());
  Matrix b = lower.solve(m.value());
  const Matrix r = a - b;
  const double log_det = l.value().diagonal().array().log().sum();
  const double c = -0.5 * static_cast<double>(d) * kLog2Pi - log_det;
  Matrix out = (c - 0.5 * r.colwise().squaredNorm().array()).transpose().matrix();
  return tape_of(z).record(std::move(out), {z, m, l}, [z, m, l, a, b, r](Tape& t, const Matrix& g) {
    const auto lower = l.value().triangularView<Eigen::Lower>();
    Matrix adj_a = -(r * g.col(0).asDiagonal());
    Matrix adj_z = lower.transpose().solve(adj_a);
    Matrix adj_m = -adj_z;
    if (t.requires_grad(l)) {
      Matrix adj_l = factor_adjoint(adj_z, a) + factor_adjoint(adj_m, b);
      adj_l.diagonal() -= g.sum() * l.value().diagonal().cwiseInverse();
      t.accumulate(l, adj_l);
    }
    t.accumulate(z, adj_z);
    t.accumulate(m, adj_m);
  });
}

Var columnwise(Var z, const ColumnFn& fn, const ColumnLabel& label) {
  const Matrix& zv = z.value();
  const Index s = zv.cols();
  Matrix out(s, 1);
  Matrix grads(zv.rows(), s);
  for (Index j = 0; j < s; ++j) {
    ValueGrad vg = fn(zv.col(j));
    if (vg.grad.size() != zv.rows()) {
      throw DimensionError("columnwise: gradient has length " + std::to_string(vg.grad.size()) +
                           ", expected " + std::to_string(zv.rows()));
    }
    if (!std::isfinite(vg.value)) {
      throw NumericError("columnwise: non-finite value at " +
                         (label ? label(j) : "column " + std::to_string(j)));
    }
    out(j, 0) = vg.value;
    grads.col(j) = vg.grad;
  }
  return tape_of(z).record(std::move(out), {z}, [z, grads](Tape& t, const Matrix& g) {
    t.accumulate(z, grads * g.col(0).asDiagonal());
  });
}

}  // namespace civi::diffcore

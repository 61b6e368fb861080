#pragma once

#include <cmath>
#include <string>

#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/types.hpp"

// Differentiable primitives over tape variables.  Free functions so call
// sites read like Eigen expressions: sum(mul(a, sigmoid(b))).  Every op
// validates shapes up front and registers a pull closure that accumulates
// into its inputs; closures capture node indices, never matrix copies, except
// where a forward residual is cheaper to keep than to recompute.

namespace botuq::engine {

namespace detail {

template <typename Scalar>
inline void check_same_tape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (&a.tape() != &b.tape())
    throw ValidationError(std::string(op) + ": operands live on different tapes");
}

template <typename Scalar>
inline void check_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch (" +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                          " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
}

template <typename Scalar>
inline Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    Scalar e = std::exp(-x);
    return Scalar(1) / (Scalar(1) + e);
  }
  Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// log(1 + e^x) without overflow for large |x|.
template <typename Scalar>
inline Scalar stable_softplus(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_tape(a, b, "add");
  detail::check_same_shape(a, b, "add");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(b.index());
  std::int32_t ia = a.index(), ib = b.index();
  return t.make(a.value() + b.value(), ng,
                [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g);
                  t.accumulate(ib, g);
                });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_tape(a, b, "sub");
  detail::check_same_shape(a, b, "sub");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(b.index());
  std::int32_t ia = a.index(), ib = b.index();
  return t.make(a.value() - b.value(), ng,
                [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g);
                  t.accumulate(ib, -g);
                });
}

// Hadamard product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_tape(a, b, "mul");
  detail::check_same_shape(a, b, "mul");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(b.index());
  std::int32_t ia = a.index(), ib = b.index();
  return t.make(a.value().cwiseProduct(b.value()), ng,
                [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                  t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                });
}

template <typename Scalar>
Var<Scalar> div(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_tape(a, b, "div");
  detail::check_same_shape(a, b, "div");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(b.index());
  std::int32_t ia = a.index(), ib = b.index();
  return t.make((a.value().array() / b.value().array()).matrix(), ng,
                [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  const auto& bv = t.value(ib).array();
                  t.accumulate(ia, (g.array() / bv).matrix());
                  t.accumulate(
                      ib, (-g.array() * t.value(ia).array() / (bv * bv)).matrix());
                });
}

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw ValidationError("matmul: inner dimensions disagree (" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                          ")");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(b.index());
  std::int32_t ia = a.index(), ib = b.index();
  return t.make(a.value() * b.value(), ng,
                [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g * t.value(ib).transpose());
                  t.accumulate(ib, t.value(ia).transpose() * g);
                });
}

// ---------------------------------------------------------------------------
// Scalar broadcast

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar c) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().array() + c, t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, g); });
}

template <typename Scalar>
Var<Scalar> mul_scalar(Var<Scalar> a, Scalar c) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value() * c, t.needs_grad(ia),
                [ia, c](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g * c);
                });
}

template <typename Scalar>
Var<Scalar> neg(Var<Scalar> a) {
  return mul_scalar(a, Scalar(-1));
}

// ---------------------------------------------------------------------------
// Unary elementwise

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> v = a.value().array().exp().matrix();
  return t.make(v, t.needs_grad(ia),
                [ia, v](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g.cwiseProduct(v));
                });
}

template <typename Scalar>
Var<Scalar> log(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().array().log().matrix(), t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() / t.value(ia).array()).matrix());
                });
}

template <typename Scalar>
Var<Scalar> sqrt(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> s = a.value().array().sqrt().matrix();
  return t.make(s, t.needs_grad(ia),
                [ia, s](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() / (Scalar(2) * s.array())).matrix());
                });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> s = a.value().unaryExpr([](Scalar x) { return detail::stable_sigmoid(x); });
  return t.make(s, t.needs_grad(ia),
                [ia, s](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(
                      ia, (g.array() * s.array() * (Scalar(1) - s.array())).matrix());
                });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> v = a.value().array().tanh().matrix();
  return t.make(v, t.needs_grad(ia),
                [ia, v](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() * (Scalar(1) - v.array().square())).matrix());
                });
}

// log(1 + e^x); derivative is sigmoid(x).
template <typename Scalar>
Var<Scalar> softplus(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> v = a.value().unaryExpr([](Scalar x) { return detail::stable_softplus(x); });
  return t.make(v, t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() * t.value(ia).unaryExpr([](Scalar x) {
                                      return detail::stable_sigmoid(x);
                                    }).array()).matrix());
                });
}

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

// Self-normalizing activation: lambda * (x > 0 ? x : alpha * (e^x - 1)).
template <typename Scalar>
Var<Scalar> selu(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  const Scalar lam = Scalar(kSeluLambda), alp = Scalar(kSeluAlpha);
  Matrix<Scalar> v = a.value().unaryExpr([lam, alp](Scalar x) {
    return x > Scalar(0) ? lam * x : lam * alp * (std::exp(x) - Scalar(1));
  });
  return t.make(v, t.needs_grad(ia),
                [ia, lam, alp](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() * t.value(ia).unaryExpr([lam, alp](Scalar x) {
                                      return x > Scalar(0) ? lam : lam * alp * std::exp(x);
                                    }).array()).matrix());
                });
}

// max(x, floor) elementwise.  Gradient passes where x > floor and is zero on
// the clamped region, so a floored quantity stops pulling on its inputs.
template <typename Scalar>
Var<Scalar> clamp_min(Var<Scalar> a, Scalar floor) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().cwiseMax(floor), t.needs_grad(ia),
                [ia, floor](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, (g.array() *
                                    (t.value(ia).array() > floor).template cast<Scalar>())
                                       .matrix());
                });
}

// ---------------------------------------------------------------------------
// Structure

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().transpose(), t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g.transpose());
                });
}

// Columns [start, start + count) as a new node.
template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ValidationError("slice_cols: range [" + std::to_string(start) + ", " +
                          std::to_string(start + count) + ") outside " +
                          std::to_string(a.cols()) + " columns");
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().middleCols(start, count), t.needs_grad(ia),
                [ia, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  Matrix<Scalar> full =
                      Matrix<Scalar>::Zero(t.value(ia).rows(), t.value(ia).cols());
                  full.middleCols(start, count) = g;
                  t.accumulate(ia, full);
                });
}

// Replicates a column vector across n columns.
template <typename Scalar>
Var<Scalar> broadcast_col(Var<Scalar> col, Index n) {
  if (col.cols() != 1)
    throw ValidationError("broadcast_col: input must be a column vector");
  if (n < 1) throw ValidationError("broadcast_col: need at least one column");
  Tape<Scalar>& t = col.tape();
  std::int32_t ic = col.index();
  return t.make(col.value().replicate(1, n), t.needs_grad(ic),
                [ic](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ic, g.rowwise().sum());
                });
}

// Adds a 1 x c row vector to every row of an r x c matrix.
template <typename Scalar>
Var<Scalar> add_rowvec(Var<Scalar> a, Var<Scalar> row) {
  detail::check_same_tape(a, row, "add_rowvec");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ValidationError("add_rowvec: row vector must be 1x" + std::to_string(a.cols()));
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(row.index());
  std::int32_t ia = a.index(), ir = row.index();
  return t.make(a.value().rowwise() + RowVector<Scalar>(row.value().row(0)), ng,
                [ia, ir](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g);
                  t.accumulate(ir, g.colwise().sum());
                });
}

// Scales row i of `a` by entry i of an r x 1 column vector.
template <typename Scalar>
Var<Scalar> scale_rows(Var<Scalar> a, Var<Scalar> col) {
  detail::check_same_tape(a, col, "scale_rows");
  if (col.cols() != 1 || col.rows() != a.rows())
    throw ValidationError("scale_rows: column vector must be " + std::to_string(a.rows()) +
                          "x1");
  Tape<Scalar>& t = a.tape();
  bool ng = t.needs_grad(a.index()) || t.needs_grad(col.index());
  std::int32_t ia = a.index(), ic = col.index();
  return t.make((a.value().array().colwise() * col.value().col(0).array()).matrix(), ng,
                [ia, ic](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(
                      ia, (g.array().colwise() * t.value(ic).col(0).array()).matrix());
                  t.accumulate(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
                });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return t.make(std::move(v), t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, Matrix<Scalar>::Constant(t.value(ia).rows(),
                                                            t.value(ia).cols(), g(0, 0)));
                });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  if (a.value().size() == 0) throw ValidationError("mean: empty input");
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  Scalar n = Scalar(a.value().size());
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum() / n;
  return t.make(std::move(v), t.needs_grad(ia),
                [ia, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia,
                               Matrix<Scalar>::Constant(t.value(ia).rows(),
                                                        t.value(ia).cols(), g(0, 0) / n));
                });
}

// r x c -> r x 1.
template <typename Scalar>
Var<Scalar> rowwise_sum(Var<Scalar> a) {
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  return t.make(a.value().rowwise().sum(), t.needs_grad(ia),
                [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ia, g.col(0).replicate(1, t.value(ia).cols()));
                });
}

// log of the row-wise mean of e^x, computed against the row max so large
// magnitudes cannot overflow: r x c -> r x 1.
template <typename Scalar>
Var<Scalar> logmeanexp_rows(Var<Scalar> a) {
  if (a.cols() < 1) throw ValidationError("logmeanexp_rows: empty rows");
  Tape<Scalar>& t = a.tape();
  std::int32_t ia = a.index();
  const Matrix<Scalar>& x = a.value();
  Vector<Scalar> mx = x.rowwise().maxCoeff();
  Vector<Scalar> lme =
      ((x.colwise() - mx).array().exp().rowwise().mean().log() + mx.array()).matrix();
  Scalar n = Scalar(x.cols());
  return t.make(lme, t.needs_grad(ia),
                [ia, lme, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  // d lme_i / d x_ij = exp(x_ij - lme_i) / n
                  Matrix<Scalar> w =
                      ((t.value(ia).colwise() - lme).array().exp() / n).matrix();
                  t.accumulate(ia, (w.array().colwise() * g.col(0).array()).matrix());
                });
}

// ---------------------------------------------------------------------------
// Composites

// mu + sigma .* eps with eps held constant: the reparameterized Gaussian
// draw.  Gradients flow to mu and sigma only.
template <typename Scalar>
Var<Scalar> gaussian_sample(Var<Scalar> mu, Var<Scalar> sigma, Var<Scalar> eps) {
  return add(mu, mul(sigma, eps));
}

template <typename Scalar>
Var<Scalar> gaussian_sample(Var<Scalar> mu, Var<Scalar> sigma, const Matrix<Scalar>& eps) {
  return gaussian_sample(mu, sigma, mu.tape().constant(eps));
}

// ---------------------------------------------------------------------------
// Operators, for expression-shaped call sites.

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  return sub(a, b);
}
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) {
  return mul(a, b);
}
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Scalar c) {
  return mul_scalar(a, c);
}
template <typename Scalar>
Var<Scalar> operator*(Scalar c, Var<Scalar> a) {
  return mul_scalar(a, c);
}
template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a) {
  return neg(a);
}

}  // namespace botuq::engine

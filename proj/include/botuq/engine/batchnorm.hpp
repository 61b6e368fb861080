#pragma once

#include <cmath>

#include "botuq/engine/ops.hpp"
#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/types.hpp"

namespace botuq::engine {

enum class BatchNormMode { Train, Eval };

// Per-feature running statistics.  Value semantics on purpose: copying a model
// snapshots these along with the weights.
template <typename Scalar>
struct BatchNormState {
  RowVector<Scalar> running_mean;
  RowVector<Scalar> running_var;
  Scalar momentum = Scalar(0.1);
  Scalar eps = Scalar(1e-5);

  explicit BatchNormState(Index width = 0) { reset(width); }

  void reset(Index width) {
    running_mean = RowVector<Scalar>::Zero(width);
    running_var = RowVector<Scalar>::Ones(width);
  }

  Index width() const { return running_mean.cols(); }
};

// Batch normalization over rows (one row per example), fused into a single
// tape node.  Train mode normalizes by the biased batch variance and folds the
// batch statistics into `state` with the usual exponential update (the running
// variance keeps the unbiased estimate).  Eval mode normalizes by the running
// statistics and leaves them untouched.
template <typename Scalar>
Var<Scalar> batch_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta,
                       BatchNormState<Scalar>& state, BatchNormMode mode) {
  detail::check_same_tape(x, gamma, "batch_norm");
  detail::check_same_tape(x, beta, "batch_norm");
  const Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw ValidationError("batch_norm: gamma and beta must be 1x" + std::to_string(c));
  if (state.width() != c)
    throw ValidationError("batch_norm: state width " + std::to_string(state.width()) +
                          " does not match input width " + std::to_string(c));

  Tape<Scalar>& t = x.tape();
  std::int32_t ix = x.index(), ig = gamma.index(), ib = beta.index();
  bool ng = t.needs_grad(ix) || t.needs_grad(ig) || t.needs_grad(ib);

  if (mode == BatchNormMode::Train) {
    const Index n = x.rows();
    if (n < 2)
      throw ValidationError("batch_norm: train mode needs a batch of at least 2 rows");
    const Matrix<Scalar>& xv = x.value();
    RowVector<Scalar> mu = xv.colwise().mean();
    RowVector<Scalar> var =
        (xv.rowwise() - mu).array().square().colwise().mean();  // biased
    RowVector<Scalar> inv_std = (var.array() + state.eps).rsqrt();
    Matrix<Scalar> xhat =
        ((xv.rowwise() - mu).array().rowwise() * inv_std.array()).matrix();
    Matrix<Scalar> y =
        ((xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
         beta.value().row(0).array())
            .matrix();

    const Scalar m = state.momentum;
    state.running_mean = (Scalar(1) - m) * state.running_mean + m * mu;
    state.running_var =
        (Scalar(1) - m) * state.running_var + m * var * (Scalar(n) / Scalar(n - 1));

    Scalar nf = Scalar(n);
    return t.make(std::move(y), ng,
                  [ix, ig, ib, xhat, inv_std, nf](Tape<Scalar>& t,
                                                  const Matrix<Scalar>& g) {
                    t.accumulate(ib, g.colwise().sum());
                    t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                    // Through the batch statistics:
                    // dx = inv_std/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat.*xhat))
                    Matrix<Scalar> dxhat =
                        (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
                    RowVector<Scalar> s1 = dxhat.colwise().sum();
                    RowVector<Scalar> s2 = dxhat.cwiseProduct(xhat).colwise().sum();
                    Matrix<Scalar> dx = dxhat * nf;
                    dx.rowwise() -= s1;
                    dx -= (xhat.array().rowwise() * s2.array()).matrix();
                    dx.array().rowwise() *= inv_std.array() / nf;
                    t.accumulate(ix, dx);
                  });
  }

  // Eval: an affine map with frozen coefficients.
  RowVector<Scalar> inv_std = (state.running_var.array() + state.eps).rsqrt();
  Matrix<Scalar> xhat =
      ((x.value().rowwise() - state.running_mean).array().rowwise() * inv_std.array())
          .matrix();
  Matrix<Scalar> y = ((xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                      beta.value().row(0).array())
                         .matrix();
  return t.make(std::move(y), ng,
                [ix, ig, ib, xhat, inv_std](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                  t.accumulate(ib, g.colwise().sum());
                  t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                  t.accumulate(ix, (g.array().rowwise() *
                                    (t.value(ig).row(0).array() * inv_std.array()))
                                       .matrix());
                });
}

}  // namespace botuq::engine

#pragma once

#include <cmath>

#include "botuq/bnn/model.hpp"
#include "botuq/engine/ops.hpp"
#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"

namespace botuq::bnn {

inline constexpr double kProbFloor = 1e-12;

// Mean binary cross-entropy of probabilities against 0/1 targets, with the
// probabilities clamped away from 0 and 1 so the logs stay finite.
template <typename Scalar>
Scalar bce(const Vector<Scalar>& p, const Vector<Scalar>& y) {
  if (p.size() == 0) throw ValidationError("bce: empty input");
  if (p.size() != y.size()) throw ValidationError("bce: size mismatch");
  Scalar total = 0;
  for (Index i = 0; i < p.size(); ++i) {
    if (y(i) != Scalar(0) && y(i) != Scalar(1))
      throw ValidationError("bce: targets must be 0 or 1");
    Scalar pi = std::min(std::max(p(i), Scalar(kProbFloor)), Scalar(1) - Scalar(kProbFloor));
    total += y(i) == Scalar(1) ? -std::log(pi) : -std::log(Scalar(1) - pi);
  }
  return total / Scalar(p.size());
}

// Mean binary cross-entropy straight from logits, in the softplus form
// softplus(f) - y*f, which never materializes a probability.
template <typename Scalar>
Var<Scalar> bce_logits(Var<Scalar> f, const Vector<Scalar>& y) {
  using namespace botuq::engine;
  if (f.cols() != 1) throw ValidationError("bce_logits: logits must be a column");
  if (f.rows() != y.size()) throw ValidationError("bce_logits: size mismatch");
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) != Scalar(0) && y(i) != Scalar(1))
      throw ValidationError("bce_logits: targets must be 0 or 1");
  Tape<Scalar>& tape = f.tape();
  Var<Scalar> yv = tape.constant(y);
  return mean(sub(softplus(f), mul(yv, f)));
}

// f_hat = f + exp(s) * eps, broadcast over n noise columns: one latent logit
// per draw of the output noise.  Gradients flow to f and s.
template <typename Scalar>
Var<Scalar> sample_latent(Var<Scalar> f, Var<Scalar> s, const Matrix<Scalar>& eps) {
  using namespace botuq::engine;
  if (f.cols() != 1 || s.cols() != 1 || f.rows() != s.rows())
    throw ValidationError("sample_latent: f and s must be equal-length columns");
  if (eps.rows() != f.rows() || eps.cols() < 1)
    throw ValidationError("sample_latent: eps must have one row per example");
  Index n = eps.cols();
  Var<Scalar> fb = broadcast_col(f, n);
  Var<Scalar> sigma = broadcast_col(engine::exp(s), n);
  return add(fb, mul(sigma, f.tape().constant(eps)));
}

template <typename Scalar>
Var<Scalar> sample_latent(Var<Scalar> f, Var<Scalar> s, Rng& rng, Index n) {
  if (n < 1) throw ValidationError("sample_latent: need at least one draw");
  return sample_latent(f, s, rng.normal_matrix<Scalar>(f.rows(), n));
}

// Attenuated classification loss.  Per example the predicted probability is
// the average of sigmoid over latent-logit draws; its log is computed as a
// log-mean-exp of log-sigmoids for stability, then floored before averaging:
//   -mean_i max(log mean_j sigmoid(sign_i * f_hat_ij), log 1e-12)
// with sign = +1 for bots and -1 for humans folding both label cases into
// one expression.
template <typename Scalar>
Var<Scalar> aleatoric_nll(Var<Scalar> f, Var<Scalar> s, const Vector<Scalar>& y,
                          const Matrix<Scalar>& eps) {
  using namespace botuq::engine;
  if (f.rows() != y.size()) throw ValidationError("aleatoric_nll: size mismatch");
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) != Scalar(0) && y(i) != Scalar(1))
      throw ValidationError("aleatoric_nll: targets must be 0 or 1");
  Tape<Scalar>& tape = f.tape();
  Var<Scalar> f_hat = sample_latent(f, s, eps);
  Vector<Scalar> sign = (Scalar(2) * y.array() - Scalar(1)).matrix();
  Var<Scalar> signed_logits = scale_rows(f_hat, tape.constant(sign));
  // log sigmoid(x) = -softplus(-x)
  Var<Scalar> log_probs = neg(softplus(neg(signed_logits)));
  Var<Scalar> log_p = logmeanexp_rows(log_probs);
  log_p = clamp_min(log_p, Scalar(std::log(kProbFloor)));
  return neg(mean(log_p));
}

template <typename Scalar>
Var<Scalar> aleatoric_nll(Var<Scalar> f, Var<Scalar> s, const Vector<Scalar>& y, Rng& rng,
                          Index n) {
  if (n < 1) throw ValidationError("aleatoric_nll: need at least one draw");
  return aleatoric_nll(f, s, y, rng.normal_matrix<Scalar>(f.rows(), n));
}

template <typename Scalar>
struct LossParts {
  Var<Scalar> total;
  Var<Scalar> data;
  Var<Scalar> kl;  // invalid when the mode carries no divergence term
};

template <typename Scalar>
struct LossConfig {
  Scalar kl_scale = Scalar(1e-4);
  Index aleatoric_samples = 1000;
};

// Assembles the training objective for one batch on one weight draw:
//   bayesian + aleatoric:  aleatoric_nll + kl_scale * kl
//   bayesian, no aleatoric: bce_logits   + kl_scale * kl
//   deterministic:          bce_logits
// The caller provides the forward result so one forward serves loss,
// diagnostics, and gradient checks alike.
template <typename Scalar>
LossParts<Scalar> assemble_loss(const typename BayesianModel<Scalar>::ForwardResult& fwd,
                                const Vector<Scalar>& y, const LossConfig<Scalar>& cfg,
                                Rng* noise_rng) {
  using namespace botuq::engine;
  LossParts<Scalar> parts;
  if (fwd.s.valid()) {
    if (noise_rng == nullptr)
      throw ValidationError("assemble_loss: aleatoric loss needs a noise stream");
    parts.data = aleatoric_nll(fwd.f, fwd.s, y, *noise_rng, cfg.aleatoric_samples);
  } else {
    parts.data = bce_logits(fwd.f, y);
  }
  if (fwd.kl.valid()) {
    parts.kl = fwd.kl;
    parts.total = add(parts.data, mul_scalar(fwd.kl, cfg.kl_scale));
  } else {
    parts.total = parts.data;
  }
  return parts;
}

}  // namespace botuq::bnn

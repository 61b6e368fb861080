#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "botuq/bnn/flow.hpp"
#include "botuq/engine/ops.hpp"
#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"

namespace botuq::bnn {

// Fully connected layer with a variational weight posterior enriched by a
// multiplicative flow.  Given a latent z pushed through a planar flow, the
// weights are
//   W_ij ~ N(z_i * mu_ij, exp(lv_ij)),   bias_j ~ N(mub_j, exp(lvb_j)),
// so one latent vector modulates whole input rows of the mean.  With
// flow_len = 0 there is no latent at all and the posterior is a plain
// factorized Gaussian.
//
// The layer's divergence contribution follows the auxiliary-posterior bound:
//   kl = KL(q(W|z_T) || p(W)) + log q(z_T) - log r(z_T | W),
// with p standard normal, q(z_T) the flowed standard normal (base density
// minus log-determinants), and r a learned diagonal Gaussian over z whose
// mean and log-variance are affine in t = tanh(rowmean(W)), optionally after
// its own planar steps.  The bias divergence is always the closed form.
template <typename Scalar>
struct MnfLinearConfig {
  Index in = 0;
  Index out = 0;
  Index flow_len = 2;
  Index r_flow_len = 1;
};

template <typename Scalar>
class MnfLinear {
 public:
  MnfLinear() = default;
  MnfLinear(std::string name, MnfLinearConfig<Scalar> cfg) : name_(std::move(name)), cfg_(cfg) {
    if (cfg.in < 1 || cfg.out < 1)
      throw ValidationError("MnfLinear: widths must be positive");
    if (cfg.flow_len < 0 || cfg.r_flow_len < 0)
      throw ValidationError("MnfLinear: negative flow length");
    if (cfg.flow_len == 0 && cfg.r_flow_len > 0)
      throw ValidationError("MnfLinear: auxiliary flow without a latent flow");
    mu_w_ = Parameter<Scalar>{name_ + ".mu_w", Matrix<Scalar>::Zero(cfg.in, cfg.out)};
    lv_w_ = Parameter<Scalar>{name_ + ".lv_w",
                              Matrix<Scalar>::Constant(cfg.in, cfg.out, Scalar(-9))};
    mu_b_ = Parameter<Scalar>{name_ + ".mu_b", Matrix<Scalar>::Zero(1, cfg.out)};
    lv_b_ = Parameter<Scalar>{name_ + ".lv_b",
                              Matrix<Scalar>::Constant(1, cfg.out, Scalar(-9))};
    if (cfg.flow_len > 0) {
      flow_ = PlanarFlow<Scalar>(name_ + ".flow", cfg.in, cfg.flow_len);
      r_a_mean_ = Parameter<Scalar>{name_ + ".r.a_mean", Matrix<Scalar>::Zero(1, 1)};
      r_b_mean_ = Parameter<Scalar>{name_ + ".r.b_mean", Matrix<Scalar>::Zero(1, 1)};
      r_a_lvar_ = Parameter<Scalar>{name_ + ".r.a_lvar", Matrix<Scalar>::Zero(1, 1)};
      r_b_lvar_ = Parameter<Scalar>{name_ + ".r.b_lvar", Matrix<Scalar>::Zero(1, 1)};
      if (cfg.r_flow_len > 0)
        r_flow_ = PlanarFlow<Scalar>(name_ + ".rflow", cfg.in, cfg.r_flow_len);
    }
  }

  const std::string& name() const { return name_; }
  const MnfLinearConfig<Scalar>& config() const { return cfg_; }

  // Mean scale 1/sqrt(fan-in); log-variances start small so early samples
  // stay close to the means.
  void init(Rng& rng) {
    Scalar std = Scalar(1) / std::sqrt(Scalar(cfg_.in));
    mu_w_.value = rng.normal_matrix<Scalar>(cfg_.in, cfg_.out) * std;
    mu_b_.value.setZero();
    if (cfg_.flow_len > 0) {
      Rng frng = rng.derive("flow");
      flow_.init(frng);
      // The first step starts as a translation pushing the N(0, I) base onto
      // the multiplicative identity, so effective means begin near mu rather
      // than zero; an identity start leaves z symmetric around 0 and the mean
      // gradients cancel.  w'u_raw = -log(e-1) is the fixed point of the
      // invertibility bend, keeping u_hat = u_raw exactly.
      auto& first = flow_.steps().front();
      Scalar b0 = Scalar(1);
      Scalar shift = Scalar(1) / std::tanh(b0);
      first.u_raw.value.setConstant(shift);
      first.w.value.setConstant(-Scalar(std::log(std::exp(1.0) - 1.0)) /
                                (shift * Scalar(cfg_.in)));
      first.b.value.setConstant(b0);
      if (cfg_.r_flow_len > 0) {
        Rng rrng = rng.derive("rflow");
        r_flow_.init(rrng);
      }
    }
  }

  struct LayerNoise {
    Matrix<Scalar> z0;     // in x 1 (empty when flow_len = 0)
    Matrix<Scalar> eps_w;  // in x out
    Matrix<Scalar> eps_b;  // 1 x out
  };

  LayerNoise draw_noise(Rng& rng) const {
    LayerNoise noise;
    if (cfg_.flow_len > 0) noise.z0 = rng.normal_matrix<Scalar>(cfg_.in, 1);
    noise.eps_w = rng.normal_matrix<Scalar>(cfg_.in, cfg_.out);
    noise.eps_b = rng.normal_matrix<Scalar>(1, cfg_.out);
    return noise;
  }

  struct SampleResult {
    Var<Scalar> weights;  // in x out
    Var<Scalar> bias;     // 1 x out
    Var<Scalar> kl;       // 1 x 1
  };

  // One posterior draw of (W, b) with this layer's divergence contribution.
  SampleResult sample_weights(Tape<Scalar>& tape, const LayerNoise& noise) {
    using namespace botuq::engine;
    check_noise_(noise);

    Var<Scalar> mu_w = tape.leaf(mu_w_);
    Var<Scalar> lv_w = tape.leaf(lv_w_);
    Var<Scalar> mu_b = tape.leaf(mu_b_);
    Var<Scalar> lv_b = tape.leaf(lv_b_);

    Var<Scalar> mu_eff = mu_w;
    Var<Scalar> latent_terms;  // log q(z_T) - log r(z_T|W), when flowing
    Var<Scalar> sigma_w = engine::exp(mul_scalar(lv_w, Scalar(0.5)));
    Var<Scalar> weights;

    if (cfg_.flow_len > 0) {
      auto flowed = flow_.forward(tape, tape.constant(noise.z0));
      Var<Scalar> z_t = flowed.output;
      mu_eff = scale_rows(mu_w, z_t);
      weights = gaussian_sample(mu_eff, sigma_w, noise.eps_w);

      // log q(z_T) = log N(z0; 0, I) - sum log-det
      double base_logp = -0.5 * noise.z0.squaredNorm() -
                         0.5 * static_cast<double>(cfg_.in) * std::log(2.0 * kPi);
      Var<Scalar> log_q =
          sub(tape.constant_scalar(Scalar(base_logp)), flowed.log_det);
      latent_terms = sub(log_q, log_r_(tape, z_t, weights));
    } else {
      weights = gaussian_sample(mu_eff, sigma_w, noise.eps_w);
    }

    // KL(q(W|z)||p) = 1/2 sum(exp(lv) + mu_eff^2 - 1 - lv), elementwise.
    Var<Scalar> kl_w = mul_scalar(
        engine::sum(sub(add(engine::exp(lv_w), mul(mu_eff, mu_eff)),
                        add_scalar(lv_w, Scalar(1)))),
        Scalar(0.5));
    Var<Scalar> kl_b = mul_scalar(
        engine::sum(sub(add(engine::exp(lv_b), mul(mu_b, mu_b)),
                        add_scalar(lv_b, Scalar(1)))),
        Scalar(0.5));
    Var<Scalar> kl = add(kl_w, kl_b);
    if (latent_terms.valid()) kl = add(kl, latent_terms);

    Var<Scalar> sigma_b = engine::exp(mul_scalar(lv_b, Scalar(0.5)));
    Var<Scalar> bias = gaussian_sample(mu_b, sigma_b, noise.eps_b);
    return {weights, bias, kl};
  }

  // Posterior means only: the deterministic path.  No latent, no divergence.
  std::pair<Var<Scalar>, Var<Scalar>> mean_weights(Tape<Scalar>& tape) {
    return {tape.leaf(mu_w_), tape.leaf(mu_b_)};
  }

  // Parameters trained in bayesian mode (everything) or deterministic mode
  // (means only).
  void collect_parameters(std::vector<Parameter<Scalar>*>& out, bool variational) {
    out.push_back(&mu_w_);
    out.push_back(&mu_b_);
    if (!variational) return;
    out.push_back(&lv_w_);
    out.push_back(&lv_b_);
    if (cfg_.flow_len > 0) {
      flow_.collect_parameters(out);
      out.push_back(&r_a_mean_);
      out.push_back(&r_b_mean_);
      out.push_back(&r_a_lvar_);
      out.push_back(&r_b_lvar_);
      if (cfg_.r_flow_len > 0) r_flow_.collect_parameters(out);
    }
  }

  static constexpr double kPi = 3.14159265358979323846;

 private:
  void check_noise_(const LayerNoise& noise) const {
    bool ok = noise.eps_w.rows() == cfg_.in && noise.eps_w.cols() == cfg_.out &&
              noise.eps_b.rows() == 1 && noise.eps_b.cols() == cfg_.out &&
              (cfg_.flow_len == 0 ? noise.z0.size() == 0
                                  : (noise.z0.rows() == cfg_.in && noise.z0.cols() == 1));
    if (!ok)
      throw ValidationError("MnfLinear::sample_weights: noise shapes do not match '" +
                            name_ + "'");
  }

  // log r(z_T | W) for the learned auxiliary Gaussian, including the
  // auxiliary flow's change of variables.
  Var<Scalar> log_r_(Tape<Scalar>& tape, Var<Scalar> z_t, Var<Scalar> weights) {
    using namespace botuq::engine;
    Var<Scalar> z_r = z_t;
    Var<Scalar> log_det_r;
    if (cfg_.r_flow_len > 0) {
      auto flowed = r_flow_.forward(tape, z_t);
      z_r = flowed.output;
      log_det_r = flowed.log_det;
    }
    // Per-row summary of the sampled weights steers the density.
    Var<Scalar> t =
        engine::tanh(mul_scalar(rowwise_sum(weights), Scalar(1) / Scalar(cfg_.out)));
    Var<Scalar> ones = tape.constant(Matrix<Scalar>::Ones(cfg_.in, 1));
    Var<Scalar> mean_r =
        add(matmul(t, tape.leaf(r_a_mean_)), matmul(ones, tape.leaf(r_b_mean_)));
    Var<Scalar> lvar_r =
        add(matmul(t, tape.leaf(r_a_lvar_)), matmul(ones, tape.leaf(r_b_lvar_)));
    Var<Scalar> resid = sub(z_r, mean_r);
    Var<Scalar> quad = div(mul(resid, resid), engine::exp(lvar_r));
    Var<Scalar> per_dim = mul_scalar(add(add_scalar(lvar_r, Scalar(std::log(2.0 * kPi))), quad),
                                     Scalar(-0.5));
    Var<Scalar> log_density = engine::sum(per_dim);
    if (log_det_r.valid()) log_density = add(log_density, log_det_r);
    return log_density;
  }

  std::string name_;
  MnfLinearConfig<Scalar> cfg_;
  Parameter<Scalar> mu_w_, lv_w_, mu_b_, lv_b_;
  PlanarFlow<Scalar> flow_;
  PlanarFlow<Scalar> r_flow_;
  Parameter<Scalar> r_a_mean_, r_b_mean_, r_a_lvar_, r_b_lvar_;
};

}  // namespace botuq::bnn

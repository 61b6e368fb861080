#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "botuq/bnn/model.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"
#include "botuq/uq/prediction.hpp"

namespace botuq::uq {

struct PosteriorConfig {
  std::int64_t n_weight_samples = 10000;
  Index n_noise_samples = 256;  // label-noise draws per weight sample
  std::uint64_t seed = 0;
  Index batch_size = 1024;
};

namespace detail {

template <typename Scalar>
Scalar sigmoid_scalar(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// Monte-Carlo posterior predictive.  For each of N weight draws the whole
// batch is scored once; the per-account spread of those scores is the
// epistemic sigma, and the average per-draw spread of sigmoid(f + e^s eps)
// over label noise eps is the aleatoric sigma.  The two combine in
// quadrature.  When `posterior_scores` is given it receives the accounts x N
// score matrix for downstream band plots.
template <typename Scalar>
std::vector<AccountPrediction> posterior_predict(bnn::BayesianModel<Scalar>& model,
                                                 const Matrix<Scalar>& x,
                                                 const std::vector<std::string>& ids,
                                                 const PosteriorConfig& cfg,
                                                 Matrix<double>* posterior_scores = nullptr) {
  if (model.config().mode != bnn::ModelMode::Bayesian)
    throw ValidationError("posterior_predict: model carries no weight distribution");
  if (x.rows() != static_cast<Index>(ids.size()))
    throw ValidationError("posterior_predict: ids do not match the feature rows");
  if (x.rows() < 1) throw ValidationError("posterior_predict: empty input");
  if (cfg.n_weight_samples < 2)
    throw ValidationError("posterior_predict: need at least two weight samples");
  if (cfg.n_noise_samples < 2)
    throw ValidationError("posterior_predict: need at least two noise draws");
  if (cfg.batch_size < 1) throw ValidationError("posterior_predict: bad batch size");

  const Index n = x.rows();
  const auto samples = cfg.n_weight_samples;
  const bool aleatoric = model.config().aleatoric;
  Rng root(cfg.seed);
  Rng weight_rng = root.derive("weights");
  Rng noise_rng = root.derive("noise");

  Vector<double> sum_p = Vector<double>::Zero(n);
  Vector<double> sum_p2 = Vector<double>::Zero(n);
  Vector<double> sum_sa = Vector<double>::Zero(n);
  if (posterior_scores != nullptr) posterior_scores->resize(n, samples);

  for (std::int64_t k = 0; k < samples; ++k) {
    auto noise = model.draw_noise(weight_rng);
    for (Index start = 0; start < n; start += cfg.batch_size) {
      Index len = std::min(cfg.batch_size, n - start);
      engine::Tape<Scalar> tape(false);
      Matrix<Scalar> xb = x.middleRows(start, len);
      auto fwd = model.forward(tape, xb, &noise, engine::BatchNormMode::Eval);
      const Matrix<Scalar>& f = fwd.f.value();
      for (Index r = 0; r < len; ++r) {
        double p = static_cast<double>(detail::sigmoid_scalar(f(r, 0)));
        sum_p(start + r) += p;
        sum_p2(start + r) += p * p;
        if (posterior_scores != nullptr) (*posterior_scores)(start + r, k) = p;
      }
      if (aleatoric) {
        const Matrix<Scalar>& s = fwd.s.value();
        Matrix<Scalar> eps = noise_rng.normal_matrix<Scalar>(len, cfg.n_noise_samples);
        for (Index r = 0; r < len; ++r) {
          Scalar scale = std::exp(s(r, 0));
          double m1 = 0, m2 = 0;
          for (Index j = 0; j < cfg.n_noise_samples; ++j) {
            double g = static_cast<double>(
                detail::sigmoid_scalar(f(r, 0) + scale * eps(r, j)));
            m1 += g;
            m2 += g * g;
          }
          m1 /= static_cast<double>(cfg.n_noise_samples);
          m2 /= static_cast<double>(cfg.n_noise_samples);
          sum_sa(start + r) += std::sqrt(std::max(0.0, m2 - m1 * m1));
        }
      }
    }
  }

  std::vector<AccountPrediction> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    AccountPrediction& pred = out[static_cast<std::size_t>(i)];
    pred.account_id = ids[static_cast<std::size_t>(i)];
    double inv = 1.0 / static_cast<double>(samples);
    pred.p_mean = sum_p(i) * inv;
    pred.sigma_epistemic =
        std::sqrt(std::max(0.0, sum_p2(i) * inv - pred.p_mean * pred.p_mean));
    pred.sigma_aleatoric = aleatoric ? sum_sa(i) * inv : 0.0;
    pred.sigma_total = std::sqrt(pred.sigma_epistemic * pred.sigma_epistemic +
                                 pred.sigma_aleatoric * pred.sigma_aleatoric);
    pred.n_weight_samples = samples;
  }
  return out;
}

// Point scores from the posterior means (or the plain weights of a
// deterministic model).  All spreads are zero; useful as the no-uncertainty
// baseline.
template <typename Scalar>
std::vector<AccountPrediction> deterministic_predict(bnn::BayesianModel<Scalar>& model,
                                                     const Matrix<Scalar>& x,
                                                     const std::vector<std::string>& ids) {
  if (x.rows() != static_cast<Index>(ids.size()))
    throw ValidationError("deterministic_predict: ids do not match the feature rows");
  if (x.rows() < 1) throw ValidationError("deterministic_predict: empty input");
  auto saved = model.config().mode;
  model.set_mode(bnn::ModelMode::Deterministic);
  engine::Tape<Scalar> tape(false);
  Matrix<Scalar> xc = x;
  auto fwd = model.forward(tape, xc, nullptr, engine::BatchNormMode::Eval);
  model.set_mode(saved);
  const Matrix<Scalar>& f = fwd.f.value();
  std::vector<AccountPrediction> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    out[static_cast<std::size_t>(i)].account_id = ids[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)].p_mean =
        static_cast<double>(detail::sigmoid_scalar(f(i, 0)));
    out[static_cast<std::size_t>(i)].n_weight_samples = 1;
  }
  return out;
}

}  // namespace botuq::uq

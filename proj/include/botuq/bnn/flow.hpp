#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "botuq/engine/ops.hpp"
#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"

namespace botuq::bnn {

using engine::Parameter;
using engine::Tape;
using engine::Var;

// Chain of planar transforms z -> z + u * tanh(w'z + b) with the classic
// reparameterization that keeps every step invertible: the raw u is bent onto
//   u_hat = u + (m(w'u) - w'u) * w / ||w||^2,   m(x) = -1 + softplus(x),
// which pins w'u_hat = m(w'u) > -1, so the Jacobian determinant
// 1 + tanh'(w'z + b) * w'u_hat stays strictly positive and its log needs no
// absolute value.
template <typename Scalar>
class PlanarFlow {
 public:
  struct Step {
    Parameter<Scalar> w;      // dim x 1
    Parameter<Scalar> u_raw;  // dim x 1
    Parameter<Scalar> b;      // 1 x 1
  };

  PlanarFlow() = default;
  PlanarFlow(std::string name_prefix, Index dim, Index length) : dim_(dim) {
    if (dim < 1) throw ValidationError("PlanarFlow: dimension must be positive");
    if (length < 0) throw ValidationError("PlanarFlow: negative length");
    steps_.resize(length);
    for (Index k = 0; k < length; ++k) {
      std::string base = name_prefix + std::to_string(k) + ".";
      steps_[k].w = Parameter<Scalar>{base + "w", Matrix<Scalar>::Zero(dim, 1)};
      steps_[k].u_raw = Parameter<Scalar>{base + "u", Matrix<Scalar>::Zero(dim, 1)};
      steps_[k].b = Parameter<Scalar>{base + "b", Matrix<Scalar>::Zero(1, 1)};
    }
  }

  Index length() const { return static_cast<Index>(steps_.size()); }
  Index dim() const { return dim_; }

  // Random directions, but an exactly identity transform: u_raw is solved so
  // that u_hat = 0, which also zeroes w'u_hat and hence every log-det.
  void init(Rng& rng) {
    for (auto& step : steps_) {
      step.w.value = rng.normal_matrix<Scalar>(dim_, 1) * Scalar(0.1);
      Scalar wn2 = std::max(step.w.value.squaredNorm(), Scalar(kMinSquaredNorm));
      // w'u = log(e - 1) makes m(w'u) = 0.
      Scalar c = Scalar(std::log(std::exp(1.0) - 1.0)) / wn2;
      step.u_raw.value = step.w.value * c;
      step.b.value.setZero();
    }
  }

  struct Result {
    Var<Scalar> output;   // dim x 1
    Var<Scalar> log_det;  // 1 x 1, sum over steps
  };

  // Pushes z through every step on the tape, accumulating log-determinants.
  Result forward(Tape<Scalar>& tape, Var<Scalar> z) {
    if (z.rows() != dim_ || z.cols() != 1)
      throw ValidationError("PlanarFlow::forward: z must be " + std::to_string(dim_) +
                            "x1");
    using namespace botuq::engine;
    Var<Scalar> log_det = tape.constant_scalar(Scalar(0));
    for (auto& step : steps_) {
      Var<Scalar> w = tape.leaf(step.w);
      Var<Scalar> u_raw = tape.leaf(step.u_raw);
      Var<Scalar> b = tape.leaf(step.b);

      Var<Scalar> wt = transpose(w);
      Var<Scalar> wu = matmul(wt, u_raw);                       // 1x1
      Var<Scalar> m_wu = add_scalar(softplus(wu), Scalar(-1));  // in (-1, inf)
      Var<Scalar> wn2 = clamp_min(matmul(wt, w), Scalar(kMinSquaredNorm));
      Var<Scalar> u_hat = add(u_raw, matmul(w, div(sub(m_wu, wu), wn2)));

      Var<Scalar> lin = add(matmul(wt, z), b);  // 1x1
      Var<Scalar> h = engine::tanh(lin);
      z = add(z, matmul(u_hat, h));

      // tanh' = 1 - h^2; w'u_hat = m_wu, so the determinant is 1 + (1-h^2)*m_wu.
      Var<Scalar> hprime = add_scalar(neg(mul(h, h)), Scalar(1));
      Var<Scalar> det = add_scalar(mul(hprime, m_wu), Scalar(1));
      log_det = add(log_det, engine::log(det));
    }
    return {z, log_det};
  }

  void collect_parameters(std::vector<Parameter<Scalar>*>& out) {
    for (auto& step : steps_) {
      out.push_back(&step.w);
      out.push_back(&step.u_raw);
      out.push_back(&step.b);
    }
  }

  std::vector<Step>& steps() { return steps_; }
  const std::vector<Step>& steps() const { return steps_; }

  static constexpr double kMinSquaredNorm = 1e-8;

 private:
  Index dim_ = 0;
  std::vector<Step> steps_;
};

}  // namespace botuq::bnn

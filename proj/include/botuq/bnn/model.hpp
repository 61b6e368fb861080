#pragma once

#include <string>
#include <vector>

#include "botuq/bnn/layer.hpp"
#include "botuq/engine/batchnorm.hpp"
#include "botuq/engine/ops.hpp"
#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"

namespace botuq::bnn {

enum class ModelMode { Bayesian, Deterministic };

template <typename Scalar>
struct ModelConfig {
  Index input_width = 0;
  std::vector<Index> hidden_widths{64, 32, 16};
  Index flow_len = 2;
  Index r_flow_len = 1;
  ModelMode mode = ModelMode::Bayesian;
  bool aleatoric = true;  // adds the log-variance output next to the logit
};

// Classifier body: per hidden width a variational linear layer, batch
// normalization, and a self-normalizing activation; on top a head producing
// the bot logit f and, when aleatoric output is on, its log standard
// deviation s.  Value semantics: copying the model snapshots weights and
// normalization statistics together.
template <typename Scalar>
class BayesianModel {
 public:
  BayesianModel() = default;

  explicit BayesianModel(ModelConfig<Scalar> cfg) : cfg_(std::move(cfg)) {
    if (cfg_.input_width < 1)
      throw ValidationError("BayesianModel: input width must be positive");
    for (Index h : cfg_.hidden_widths)
      if (h < 1) throw ValidationError("BayesianModel: hidden widths must be positive");
    MnfLinearConfig<Scalar> base;
    base.flow_len = cfg_.flow_len;
    base.r_flow_len = cfg_.r_flow_len;
    Index in = cfg_.input_width;
    for (std::size_t i = 0; i < cfg_.hidden_widths.size(); ++i) {
      Index out = cfg_.hidden_widths[i];
      MnfLinearConfig<Scalar> lc = base;
      lc.in = in;
      lc.out = out;
      std::string name = "hidden" + std::to_string(i);
      hidden_.push_back(HiddenBlock{
          MnfLinear<Scalar>(name, lc),
          Parameter<Scalar>{name + ".bn.gamma", Matrix<Scalar>::Ones(1, out)},
          Parameter<Scalar>{name + ".bn.beta", Matrix<Scalar>::Zero(1, out)},
          engine::BatchNormState<Scalar>(out)});
      in = out;
    }
    MnfLinearConfig<Scalar> hc = base;
    hc.in = in;
    hc.out = output_width();
    head_ = MnfLinear<Scalar>("head", hc);
  }

  const ModelConfig<Scalar>& config() const { return cfg_; }
  Index output_width() const { return cfg_.aleatoric ? 2 : 1; }

  void init(Rng& rng) {
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      Rng lrng = rng.derive("layer", static_cast<std::uint64_t>(i));
      hidden_[i].linear.init(lrng);
    }
    Rng hrng = rng.derive("head");
    head_.init(hrng);
  }

  struct ModelNoise {
    std::vector<typename MnfLinear<Scalar>::LayerNoise> layers;  // hidden..., head
  };

  ModelNoise draw_noise(Rng& rng) const {
    ModelNoise noise;
    for (const auto& block : hidden_) noise.layers.push_back(block.linear.draw_noise(rng));
    noise.layers.push_back(head_.draw_noise(rng));
    return noise;
  }

  struct ForwardResult {
    Var<Scalar> f;  // batch x 1 logits
    Var<Scalar> s;  // batch x 1 log-sigmas; invalid when aleatoric is off
    Var<Scalar> kl; // 1 x 1; invalid in deterministic mode
  };

  // One pass over a batch (rows are examples).  Bayesian mode consumes one
  // noise bundle — the same weight draw across the whole batch — and yields
  // the divergence term alongside the outputs.  Deterministic mode uses the
  // posterior means and no noise.
  ForwardResult forward(Tape<Scalar>& tape, const Matrix<Scalar>& x,
                        const ModelNoise* noise, engine::BatchNormMode bn_mode) {
    using namespace botuq::engine;
    if (x.cols() != cfg_.input_width)
      throw ValidationError("BayesianModel::forward: input has " +
                            std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(cfg_.input_width));
    if (x.rows() < 1) throw ValidationError("BayesianModel::forward: empty batch");
    bool bayesian = cfg_.mode == ModelMode::Bayesian;
    if (bayesian && noise == nullptr)
      throw ValidationError("BayesianModel::forward: bayesian mode needs a noise bundle");
    if (bayesian && noise->layers.size() != hidden_.size() + 1)
      throw ValidationError("BayesianModel::forward: noise bundle has wrong depth");

    Var<Scalar> h = tape.constant(x);
    Var<Scalar> kl;
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      HiddenBlock& block = hidden_[i];
      Var<Scalar> w, b;
      if (bayesian) {
        auto sampled = block.linear.sample_weights(tape, noise->layers[i]);
        w = sampled.weights;
        b = sampled.bias;
        kl = kl.valid() ? add(kl, sampled.kl) : sampled.kl;
      } else {
        std::tie(w, b) = block.linear.mean_weights(tape);
      }
      h = add_rowvec(matmul(h, w), b);
      h = batch_norm(h, tape.leaf(block.gamma), tape.leaf(block.beta), block.bn, bn_mode);
      h = selu(h);
    }
    Var<Scalar> w, b;
    if (bayesian) {
      auto sampled = head_.sample_weights(tape, noise->layers.back());
      w = sampled.weights;
      b = sampled.bias;
      kl = kl.valid() ? add(kl, sampled.kl) : sampled.kl;
    } else {
      std::tie(w, b) = head_.mean_weights(tape);
    }
    Var<Scalar> out = add_rowvec(matmul(h, w), b);

    ForwardResult result;
    result.f = slice_cols(out, 0, 1);
    if (cfg_.aleatoric) result.s = slice_cols(out, 1, 1);
    result.kl = kl;
    last_kl_ = kl;
    return result;
  }

  // Divergence term of the most recent bayesian forward, for loss assembly.
  // Valid until that forward's tape is cleared.
  Var<Scalar> last_kl() const {
    if (!last_kl_.valid())
      throw ValidationError("BayesianModel::last_kl: no bayesian forward recorded");
    return last_kl_;
  }

  // Deterministic mode trains means and normalization affines only; bayesian
  // mode trains the full variational family.
  std::vector<Parameter<Scalar>*> trainable_parameters() {
    bool variational = cfg_.mode == ModelMode::Bayesian;
    std::vector<Parameter<Scalar>*> out;
    for (auto& block : hidden_) {
      block.linear.collect_parameters(out, variational);
      out.push_back(&block.gamma);
      out.push_back(&block.beta);
    }
    head_.collect_parameters(out, variational);
    return out;
  }

  // Every parameter, for checkpoints: independent of mode.
  std::vector<Parameter<Scalar>*> all_parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& block : hidden_) {
      block.linear.collect_parameters(out, true);
      out.push_back(&block.gamma);
      out.push_back(&block.beta);
    }
    head_.collect_parameters(out, true);
    return out;
  }

  std::vector<engine::BatchNormState<Scalar>*> norm_states() {
    std::vector<engine::BatchNormState<Scalar>*> out;
    for (auto& block : hidden_) out.push_back(&block.bn);
    return out;
  }

  void set_mode(ModelMode mode) { cfg_.mode = mode; }

 private:
  struct HiddenBlock {
    MnfLinear<Scalar> linear;
    Parameter<Scalar> gamma;
    Parameter<Scalar> beta;
    engine::BatchNormState<Scalar> bn;
  };

  ModelConfig<Scalar> cfg_;
  std::vector<HiddenBlock> hidden_;
  MnfLinear<Scalar> head_;
  Var<Scalar> last_kl_;
};

// Divergence accessor named for loss assembly call sites.
template <typename Scalar>
Var<Scalar> kl_term(const BayesianModel<Scalar>& model) {
  return model.last_kl();
}

}  // namespace botuq::bnn

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "botuq/bnn/loss.hpp"
#include "botuq/bnn/model.hpp"
#include "botuq/engine/optim.hpp"
#include "botuq/errors.hpp"
#include "botuq/rng.hpp"
#include "botuq/types.hpp"

namespace botuq::train {

// Stops after `patience` consecutive epochs without a new strict minimum of
// the validation loss.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ValidationError("EarlyStopper: patience must be positive");
  }

  // Feeds one epoch's validation loss; true means training should stop.
  bool observe(double val_loss) {
    ++epoch_;
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return false;
    }
    ++stale_;
    return stale_ >= patience_;
  }

  bool improved_last() const { return stale_ == 0; }
  int best_epoch() const { return best_epoch_; }  // 1-based
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

template <typename Scalar>
struct TrainConfig {
  bnn::ModelConfig<Scalar> model;  // input_width may be 0: filled from the data
  Index batch_size = 1024;
  Index max_epochs = 100;
  Scalar initial_lr = Scalar(5e-4);
  Scalar kl_scale = Scalar(1e-4);
  Index aleatoric_samples = 1000;
  int patience = 5;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_losses;  // one per epoch actually run
  std::vector<double> val_losses;
  int stopped_epoch = 0;  // 1-based count of epochs run
  int best_epoch = 0;
  double wall_seconds = 0;
};

template <typename Scalar>
struct TrainOutcome {
  bnn::BayesianModel<Scalar> model;
  TrainReport report;
};

namespace detail {

// Contiguous batch spans over n rows.  A trailing batch of a single row is
// folded into its neighbor so train-mode normalization always sees at least
// two rows.
inline std::vector<std::pair<Index, Index>> batch_spans(Index n, Index batch_size) {
  std::vector<std::pair<Index, Index>> spans;
  Index start = 0;
  while (start < n) {
    Index len = std::min(batch_size, n - start);
    spans.emplace_back(start, len);
    start += len;
  }
  if (spans.size() > 1 && spans.back().second == 1) {
    spans.pop_back();
    spans.back().second += 1;
  }
  return spans;
}

}  // namespace detail

// Mean objective over a dataset under one frozen posterior draw, with
// normalization in eval mode.  The same seed always reproduces the same
// value, so successive epochs are compared on identical footing.
template <typename Scalar>
double evaluate_loss(bnn::BayesianModel<Scalar>& model, const Matrix<Scalar>& x,
                     const Vector<Scalar>& y, const bnn::LossConfig<Scalar>& loss_cfg,
                     std::uint64_t seed) {
  if (x.rows() == 0) throw ValidationError("evaluate_loss: empty dataset");
  if (x.rows() != y.size()) throw ValidationError("evaluate_loss: feature/label mismatch");
  Rng rng(seed);
  Rng weight_rng = rng.derive("weights");
  Rng noise_rng = rng.derive("noise");
  bool bayesian = model.config().mode == bnn::ModelMode::Bayesian;
  typename bnn::BayesianModel<Scalar>::ModelNoise noise;
  if (bayesian) noise = model.draw_noise(weight_rng);

  auto spans = detail::batch_spans(x.rows(), Index(1024));
  double total = 0;
  for (auto [start, len] : spans) {
    engine::Tape<Scalar> tape(false);
    Matrix<Scalar> xb = x.middleRows(start, len);
    Vector<Scalar> yb = y.segment(start, len);
    auto fwd = model.forward(tape, xb, bayesian ? &noise : nullptr,
                             engine::BatchNormMode::Eval);
    auto parts = bnn::assemble_loss<Scalar>(fwd, yb, loss_cfg, &noise_rng);
    total += static_cast<double>(parts.total.value()(0, 0)) * len;
  }
  return total / static_cast<double>(x.rows());
}

// Full optimization loop: shuffled mini-batches, one posterior draw per step,
// cosine-annealed Adam, early stopping on a deterministic validation loss,
// and restoration of the best-validation weights.  Bitwise reproducible for a
// given config and seed.
template <typename Scalar>
TrainOutcome<Scalar> fit(TrainConfig<Scalar> cfg, const Matrix<Scalar>& x_train,
                         const Vector<Scalar>& y_train, const Matrix<Scalar>& x_val,
                         const Vector<Scalar>& y_val) {
  auto t0 = std::chrono::steady_clock::now();
  if (cfg.batch_size < 2) throw ValidationError("fit: batch_size must be at least 2");
  if (cfg.max_epochs < 1) throw ValidationError("fit: max_epochs must be positive");
  if (!(cfg.initial_lr > 0)) throw ValidationError("fit: learning rate must be positive");
  if (cfg.kl_scale < 0) throw ValidationError("fit: kl_scale must be non-negative");
  if (x_train.rows() < 2) throw ValidationError("fit: need at least two training rows");
  if (x_val.rows() < 1) throw ValidationError("fit: need validation rows");
  if (x_train.rows() != y_train.size() || x_val.rows() != y_val.size())
    throw ValidationError("fit: feature/label size mismatch");
  if (x_val.cols() != x_train.cols())
    throw ValidationError("fit: train and validation widths differ");
  for (Index i = 0; i < y_train.size(); ++i)
    if (y_train(i) != Scalar(0) && y_train(i) != Scalar(1))
      throw ValidationError("fit: training labels must be 0 or 1");

  cfg.model.input_width = x_train.cols();
  bnn::BayesianModel<Scalar> model(cfg.model);
  Rng root(cfg.seed);
  Rng init_rng = root.derive("init");
  model.init(init_rng);
  Rng step_noise = root.derive("train.noise");
  const std::uint64_t val_seed = root.derive("val").seed();

  bnn::LossConfig<Scalar> loss_cfg;
  loss_cfg.kl_scale = cfg.kl_scale;
  loss_cfg.aleatoric_samples = cfg.aleatoric_samples;

  auto spans = detail::batch_spans(x_train.rows(), cfg.batch_size);
  engine::CosineSchedule<Scalar> schedule;
  schedule.base_lr = cfg.initial_lr;
  schedule.eta_min = Scalar(0);
  schedule.t_max = static_cast<std::int64_t>(spans.size()) * cfg.max_epochs;
  engine::AdamOptimizer<Scalar> optimizer(schedule);

  bool bayesian = cfg.model.mode == bnn::ModelMode::Bayesian;
  EarlyStopper stopper(cfg.patience);
  TrainReport report;
  bnn::BayesianModel<Scalar> best = model;

  std::vector<Index> order(x_train.rows());
  std::iota(order.begin(), order.end(), Index(0));

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = root.derive("shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0;
    for (std::size_t b = 0; b < spans.size(); ++b) {
      auto [start, len] = spans[b];
      Matrix<Scalar> xb(len, x_train.cols());
      Vector<Scalar> yb(len);
      for (Index r = 0; r < len; ++r) {
        xb.row(r) = x_train.row(order[start + r]);
        yb(r) = y_train(order[start + r]);
      }
      engine::Tape<Scalar> tape;
      typename bnn::BayesianModel<Scalar>::ModelNoise noise;
      if (bayesian) noise = model.draw_noise(step_noise);
      auto fwd = model.forward(tape, xb, bayesian ? &noise : nullptr,
                               engine::BatchNormMode::Train);
      auto parts = bnn::assemble_loss<Scalar>(fwd, yb, loss_cfg, &step_noise);
      double step_loss = static_cast<double>(parts.total.value()(0, 0));
      if (!std::isfinite(step_loss))
        throw NumericalError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                             " step " + std::to_string(b + 1));
      tape.backward(parts.total);
      optimizer.step(model.trainable_parameters());
      epoch_loss += step_loss;
    }
    report.train_losses.push_back(epoch_loss / static_cast<double>(spans.size()));

    double val_loss = evaluate_loss(model, x_val, y_val, loss_cfg, val_seed);
    if (!std::isfinite(val_loss))
      throw NumericalError("fit: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    report.val_losses.push_back(val_loss);
    report.stopped_epoch = static_cast<int>(epoch);
    bool stop = stopper.observe(val_loss);
    if (stopper.improved_last()) best = model;
    if (stop) break;
  }
  report.best_epoch = stopper.best_epoch();
  model = best;

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

}  // namespace botuq::train

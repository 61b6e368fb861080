#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "botuq/engine/tape.hpp"
#include "botuq/errors.hpp"
#include "botuq/types.hpp"

namespace botuq::engine {

// Cosine annealing from `base_lr` down to `eta_min` over `t_max` steps; flat
// at `eta_min` beyond.
template <typename Scalar>
struct CosineSchedule {
  Scalar base_lr = Scalar(5e-4);
  Scalar eta_min = Scalar(0);
  std::int64_t t_max = 1;
};

template <typename Scalar>
Scalar cosine_lr(std::int64_t step, const CosineSchedule<Scalar>& sched) {
  if (sched.t_max <= 0) throw ValidationError("cosine_lr: t_max must be positive");
  if (step < 0) throw ValidationError("cosine_lr: negative step");
  std::int64_t s = step < sched.t_max ? step : sched.t_max;
  double phase = 3.14159265358979323846 * static_cast<double>(s) /
                 static_cast<double>(sched.t_max);
  return sched.eta_min + (sched.base_lr - sched.eta_min) *
                             Scalar((1.0 + std::cos(phase)) / 2.0);
}

// Adam with bias correction.  Moment buffers are keyed by parameter name so
// the state survives model copies and checkpoint round trips.
template <typename Scalar>
class AdamOptimizer {
 public:
  struct Config {
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);
  };

  explicit AdamOptimizer(CosineSchedule<Scalar> schedule, Config config = Config{})
      : schedule_(schedule), config_(config) {}

  // One update over `params`, consuming each parameter's current `grad`.
  // The learning rate comes from the schedule at the number of completed
  // steps, so the first update uses the schedule's starting value.
  void step(const std::vector<Parameter<Scalar>*>& params) {
    Scalar lr = cosine_lr(steps_done_, schedule_);
    ++steps_done_;
    Scalar t = Scalar(steps_done_);
    Scalar bc1 = Scalar(1) - std::pow(config_.beta1, t);
    Scalar bc2 = Scalar(1) - std::pow(config_.beta2, t);
    for (Parameter<Scalar>* p : params) {
      if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
        throw ValidationError("AdamOptimizer::step: gradient for '" + p->name +
                              "' has wrong shape (run backward first)");
      if (!p->grad.allFinite())
        throw NumericalError("AdamOptimizer::step: non-finite gradient for '" + p->name +
                             "'");
      auto& [m, v] = moments_[p->name];
      if (m.size() == 0) {
        m = Matrix<Scalar>::Zero(p->value.rows(), p->value.cols());
        v = Matrix<Scalar>::Zero(p->value.rows(), p->value.cols());
      }
      m = config_.beta1 * m + (Scalar(1) - config_.beta1) * p->grad;
      v = (config_.beta2 * v.array() +
           (Scalar(1) - config_.beta2) * p->grad.array().square())
              .matrix();
      p->value.array() -=
          lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config_.eps);
    }
  }

  std::int64_t steps_done() const { return steps_done_; }
  const CosineSchedule<Scalar>& schedule() const { return schedule_; }

  // Exposed for checkpointing.
  const std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>>& moments()
      const {
    return moments_;
  }
  void restore(std::int64_t steps_done,
               std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>> moments) {
    steps_done_ = steps_done;
    moments_ = std::move(moments);
  }

 private:
  CosineSchedule<Scalar> schedule_;
  Config config_;
  std::int64_t steps_done_ = 0;
  std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>> moments_;
};

}  // namespace botuq::engine

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "botuq/errors.hpp"
#include "botuq/types.hpp"

namespace botuq::engine {

template <typename Scalar>
class Tape;

// Named trainable array.  Tapes read `value` when the parameter is bound as a
// leaf and write `grad` back when backward() finishes.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() { grad = Matrix<Scalar>::Zero(value.rows(), value.cols()); }
};

// Handle to a node on a tape.  Cheap to copy; invalidated by Tape::clear().
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::int32_t index) : tape_(tape), index_(index) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<Scalar>& tape() const { return *tape_; }
  std::int32_t index() const { return index_; }

  const Matrix<Scalar>& value() const;
  const Matrix<Scalar>& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::int32_t index_ = -1;
};

// Records a single forward pass over dense matrices and replays it in reverse
// to accumulate gradients.  One tape serves one forward/backward cycle; build
// a fresh tape (or clear()) per training step.
//
// With record=false the tape keeps values only: operations run their forward
// math, no pull closures are stored, and backward() is an error.  This is the
// cheap path for inference.
template <typename Scalar>
class Tape {
 public:
  using PullFn = std::function<void(Tape&, const Matrix<Scalar>&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::int32_t size() const { return static_cast<std::int32_t>(nodes_.size()); }

  // Value without gradient.
  Var<Scalar> constant(Matrix<Scalar> value) {
    return push_(std::move(value), false, nullptr, nullptr);
  }

  Var<Scalar> constant_scalar(Scalar value) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  // Gradient entry point bound to a parameter.  Binding the same parameter
  // twice on one tape returns the original node so its gradient accumulates
  // in one place.
  Var<Scalar> leaf(Parameter<Scalar>& p) {
    if (!record_) return constant(p.value);
    auto it = bindings_.find(&p);
    if (it != bindings_.end()) return Var<Scalar>(this, it->second);
    Var<Scalar> v = push_(p.value, true, nullptr, &p);
    bindings_.emplace(&p, v.index());
    return v;
  }

  // Internal node.  `needs_grad` should be the OR of the inputs' flags so
  // constant subgraphs are pruned from the backward sweep.
  Var<Scalar> make(Matrix<Scalar> value, bool needs_grad, PullFn pull) {
    if (!record_) needs_grad = false;
    return push_(std::move(value), needs_grad, needs_grad ? std::move(pull) : nullptr,
                 nullptr);
  }

  const Matrix<Scalar>& value(std::int32_t index) const { return nodes_[index].value; }
  const Matrix<Scalar>& grad(std::int32_t index) const { return nodes_[index].grad; }
  bool needs_grad(std::int32_t index) const { return nodes_[index].needs_grad; }

  // Adds `g` into the gradient slot of node `index`, allocating on first use.
  // No-op for nodes outside the differentiable subgraph.
  template <typename Expr>
  void accumulate(std::int32_t index, const Expr& g) {
    Node& n = nodes_[index];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

  // Reverse sweep from a scalar loss.  Afterwards every bound parameter's
  // `grad` holds d(loss)/d(parameter); parameters that do not influence the
  // loss get zeros.
  void backward(Var<Scalar> loss) {
    if (!record_) throw ValidationError("Tape::backward: tape was built with record=false");
    if (swept_) throw ValidationError("Tape::backward: tape already swept; clear() first");
    if (!loss.valid() || &loss.tape() != this)
      throw ValidationError("Tape::backward: loss does not live on this tape");
    if (loss.value().rows() != 1 || loss.value().cols() != 1)
      throw ValidationError("Tape::backward: loss must be a 1x1 scalar");
    if (!nodes_[loss.index()].needs_grad)
      throw ValidationError("Tape::backward: loss does not depend on any parameter");
    swept_ = true;
    nodes_[loss.index()].grad = Matrix<Scalar>::Ones(1, 1);
    for (std::int32_t i = loss.index(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.pull) n.pull(*this, n.grad);
    }
    for (auto& [param, index] : bindings_) {
      Node& n = nodes_[index];
      if (n.grad.size() == 0)
        param->grad = Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
      else
        param->grad = n.grad;
    }
  }

  // Drops all nodes and bindings; outstanding Var handles become invalid.
  void clear() {
    nodes_.clear();
    bindings_.clear();
    swept_ = false;
  }

 private:
  struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    PullFn pull;
    Parameter<Scalar>* binding = nullptr;
    bool needs_grad = false;
  };

  Var<Scalar> push_(Matrix<Scalar> value, bool needs_grad, PullFn pull,
                    Parameter<Scalar>* binding) {
    Node n;
    n.value = std::move(value);
    n.pull = std::move(pull);
    n.binding = binding;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<std::int32_t>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter<Scalar>*, std::int32_t> bindings_;
  bool record_ = true;
  bool swept_ = false;
};

template <typename Scalar>
const Matrix<Scalar>& Var<Scalar>::value() const {
  return tape_->value(index_);
}

template <typename Scalar>
const Matrix<Scalar>& Var<Scalar>::grad() const {
  return tape_->grad(index_);
}

}  // namespace botuq::engine

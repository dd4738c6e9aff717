#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fqgan/tensor.hpp"

namespace fqgan::ad {

class Tape;

/// Thrown on misuse of a tape (second backward, foreign handles, ...).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Backward rule of a recorded op. `parent_grads[i]` points at the gradient
/// buffer of the i-th parent, or is null when that parent needs no gradient.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

/// Linear record of a forward computation; supports exactly one backward pass.
///
/// Nodes are appended in execution order, so the record is already a
/// topological order and backward simply walks it in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input or parameter. Gradients are kept only when `requires_grad` is set.
  Var leaf(Tensor value, bool requires_grad = false);

  /// Appends the result of an op. The node requires a gradient iff any parent does.
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  /// Backpropagates from a single-element output seeded with 1.
  void backward(Var output);
  /// Backpropagates from `output` seeded with `seed` (same shape).
  void backward(Var output, const Tensor& seed);

  /// Accumulated gradient of a node; zeros when nothing reached it.
  Tensor grad(Var v) const;

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Node ids whose backward rule ran, in visit order.
  const std::vector<std::size_t>& backward_trace() const noexcept { return trace_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> trace_;
  bool consumed_ = false;
};

}  // namespace fqgan::ad

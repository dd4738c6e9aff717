#include "fqgan/tape.hpp"

#include <string>

namespace fqgan::ad {

const Tensor& Var::value() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return tape_->requires_grad(*this);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (consumed_) throw TapeError("tape already consumed by backward");
  nodes_.push_back(Node{std::move(value), {}, requires_grad, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (consumed_) throw TapeError("tape already consumed by backward");
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw TapeError("operand belongs to a different tape");
    n.parents.push_back(p.id_);
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  // Nodes that cannot reach a parameter keep no backward rule.
  if (n.requires_grad) n.backward = std::move(backward);
  else n.parents.clear();
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var output) {
  const Node& out = node(output);
  if (out.value.size() != 1)
    throw DimensionError("backward without seed needs a single-element output, got " +
                         to_string(out.value.shape()));
  backward(output, Tensor(out.value.shape(), 1.0));
}

void Tape::backward(Var output, const Tensor& seed) {
  if (consumed_) throw TapeError("backward called twice on the same tape");
  const Node& out = node(output);
  if (seed.shape() != out.value.shape())
    throw DimensionError("seed shape " + to_string(seed.shape()) + " does not match output " +
                         to_string(out.value.shape()));
  consumed_ = true;
  if (!out.requires_grad) return;
  nodes_[output.id_].grad = seed;

  std::vector<Tensor*> parent_grads;
  for (std::size_t id = output.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    parent_grads.clear();
    for (std::size_t pid : n.parents) {
      Node& p = nodes_[pid];
      if (!p.requires_grad) {
        parent_grads.push_back(nullptr);
        continue;
      }
      if (p.grad.empty()) p.grad = Tensor(p.value.shape(), 0.0);
      parent_grads.push_back(&p.grad);
    }
    trace_.push_back(id);
    n.backward(n.grad, parent_grads);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw TapeError("Var does not belong to this tape");
  return nodes_[v.id_];
}

}  // namespace fqgan::ad

#include "fqgan/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace fqgan {

Mlp::Mlp(std::vector<std::size_t> widths, Activation hidden, double slope, Activation output)
    : widths_(std::move(widths)), hidden_(hidden), output_(output), slope_(slope) {
  if (widths_.size() < 2) throw std::invalid_argument("an MLP needs at least two widths");
  for (auto w : widths_)
    if (w == 0) throw std::invalid_argument("MLP widths must be positive");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    params_.emplace_back(Shape{widths_[i], widths_[i + 1]}, 0.0);
    params_.emplace_back(Shape{widths_[i + 1]}, 0.0);
  }
}

void Mlp::initialize(Rng& rng) {
  for (std::size_t i = 0; i < layers(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[i]));
    for (double& w : params_[2 * i].values()) w = rng.uniform(-bound, bound);
    for (double& b : params_[2 * i + 1].values()) b = rng.uniform(-bound, bound);
  }
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

Mlp::Bound Mlp::bind(ad::Tape& tape, bool requires_grad) const {
  Bound b;
  b.params.reserve(params_.size());
  for (const auto& p : params_) b.params.push_back(tape.leaf(p, requires_grad));
  return b;
}

ad::Var Mlp::activate(ad::Var x, Activation a) const {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return ad::relu(x);
    case Activation::LeakyRelu: return ad::leaky_relu(x, slope_);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  return x;
}

ad::Var Mlp::layer(const Bound& bound, std::size_t i, ad::Var x) const {
  if (i >= layers()) throw std::out_of_range("MLP layer index out of range");
  ad::Var y = ad::add_bias(ad::matmul(x, bound.params[2 * i]), bound.params[2 * i + 1]);
  return activate(y, i + 1 == layers() ? output_ : hidden_);
}

ad::Var Mlp::forward(const Bound& bound, ad::Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != input_width())
    throw DimensionError("MLP input must be [batch x " + std::to_string(input_width()) + "], got " +
                         to_string(x.shape()));
  for (std::size_t i = 0; i < layers(); ++i) x = layer(bound, i, x);
  return x;
}

Tensor Mlp::forward(const Tensor& x) const {
  ad::Tape tape;
  const Bound bound = bind(tape, false);
  return forward(bound, tape.leaf(x)).value();
}

Adam::Adam(AdamConfig config, const std::vector<Tensor>& params) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam: parameter list does not match optimizer state");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    if (g.shape() != p.shape()) throw DimensionError("Adam: gradient shape mismatch");
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      p[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

}  // namespace fqgan

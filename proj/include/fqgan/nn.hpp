#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fqgan/ops.hpp"
#include "fqgan/rng.hpp"

namespace fqgan {

enum class Activation { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

/// Fully connected network; hidden layers share one activation.
class Mlp {
 public:
  /// Parameters bound onto a tape for one forward pass.
  struct Bound {
    std::vector<ad::Var> params;  ///< W0, b0, W1, b1, ...
  };

  Mlp() = default;
  Mlp(std::vector<std::size_t> widths, Activation hidden, double slope = 0.2,
      Activation output = Activation::Identity);

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), layer by layer.
  void initialize(Rng& rng);

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  std::size_t layers() const noexcept { return widths_.size() - 1; }
  std::size_t hidden_layers() const noexcept { return layers() - 1; }
  std::size_t input_width() const noexcept { return widths_.front(); }
  std::size_t output_width() const noexcept { return widths_.back(); }
  std::size_t parameter_count() const noexcept;

  std::vector<Tensor>& parameters() noexcept { return params_; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }

  Bound bind(ad::Tape& tape, bool requires_grad) const;

  /// Linear layer `i` (0-based) followed by its activation.
  ad::Var layer(const Bound& bound, std::size_t i, ad::Var x) const;
  ad::Var forward(const Bound& bound, ad::Var x) const;
  Tensor forward(const Tensor& x) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  ad::Var activate(ad::Var x, Activation a) const;

  std::vector<std::size_t> widths_;
  Activation hidden_ = Activation::LeakyRelu;
  Activation output_ = Activation::Identity;
  double slope_ = 0.2;
  std::vector<Tensor> params_;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, const std::vector<Tensor>& params);

  /// params -= lr * mhat / (sqrt(vhat) + eps)
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);

  const AdamConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return t_; }
  std::vector<Tensor>& first_moment() noexcept { return m_; }
  std::vector<Tensor>& second_moment() noexcept { return v_; }
  const std::vector<Tensor>& first_moment() const noexcept { return m_; }
  const std::vector<Tensor>& second_moment() const noexcept { return v_; }
  void set_steps(std::size_t t) noexcept { t_ = t; }

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace fqgan

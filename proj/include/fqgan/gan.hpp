#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fqgan/codebook.hpp"
#include "fqgan/nn.hpp"
#include "fqgan/quantize.hpp"

namespace fqgan {

/// Raised when a loss or logit stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// A quantization layer inserted after hidden layer `after_hidden` (1-based).
struct FqLayer {
  std::size_t after_hidden = 2;
  std::size_t positions = 1;  ///< hidden width = positions * codebook.dim()
  vq::Codebook codebook;

  friend bool operator==(const FqLayer&, const FqLayer&) = default;
};

/// Discriminator network with optional quantization after hidden layers.
///
/// Splitting the layer stack at an FQ position gives the bottom network (up
/// to and including that hidden layer) and the top network (the rest). With
/// no FQ layers the forward pass is exactly the plain MLP.
class FqDiscriminator {
 public:
  struct Options {
    /// Feed h instead of h' forward (quantization still computed).
    bool bypass = false;
    /// Loss normalizer passed to every quantizer; 0 means the batch rows.
    double normalizer = 0.0;
    /// Per-FQ-layer tape leaves holding codebook items (pure-loss variant).
    std::span<const ad::Var> items;
  };

  struct Forward {
    ad::Var logits;
    std::vector<vq::QuantizeResult> quantized;  ///< one per FQ layer, in layer order
    std::vector<ad::Var> hidden;                ///< pre-quantization output of every hidden layer
  };

  FqDiscriminator() = default;
  FqDiscriminator(Mlp net, std::vector<FqLayer> fq_layers);

  Mlp& net() noexcept { return net_; }
  const Mlp& net() const noexcept { return net_; }
  std::vector<FqLayer>& fq_layers() noexcept { return fq_; }
  const std::vector<FqLayer>& fq_layers() const noexcept { return fq_; }
  /// FQ layer placed after hidden layer `after_hidden`, or null.
  const FqLayer* fq_at(std::size_t after_hidden) const noexcept;

  Forward forward(const Mlp::Bound& bound, ad::Var x, const Options& options) const;
  Forward forward(const Mlp::Bound& bound, ad::Var x) const { return forward(bound, x, Options{}); }

  /// Runs the top network on `h`, taken as the (post-quantization) output of
  /// hidden layer `after_hidden`. Later FQ layers are applied as usual.
  ad::Var forward_top(const Mlp::Bound& bound, std::size_t after_hidden, ad::Var h,
                      const Options& options) const;

  /// Tape-free logits.
  Tensor logits(const Tensor& x) const;

  friend bool operator==(const FqDiscriminator&, const FqDiscriminator&) = default;

 private:
  Forward run(const Mlp::Bound& bound, std::size_t first_layer, ad::Var x,
              const Options& options) const;

  Mlp net_;
  std::vector<FqLayer> fq_;
};

enum class GeneratorLoss { NonSaturating, Minimax };

GeneratorLoss parse_generator_loss(const std::string& name);
std::string to_string(GeneratorLoss loss);

/// -[mean log sigma(real) + mean log(1 - sigma(fake))], via softplus.
ad::Var discriminator_loss(ad::Var real_logits, ad::Var fake_logits);
/// Non-saturating: -mean log sigma(fake). Minimax: mean log(1 - sigma(fake)).
ad::Var generator_loss(ad::Var fake_logits, GeneratorLoss kind);

struct GanLossValues {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// Value form of both losses. Throws DivergenceError(iteration) on non-finite logits.
GanLossValues gan_losses(const Tensor& real_logits, const Tensor& fake_logits,
                         GeneratorLoss kind = GeneratorLoss::NonSaturating,
                         std::size_t iteration = 0);

/// gan + alpha * sum(quantization losses). With alpha == 0 the GAN term is
/// returned unchanged.
ad::Var fqgan_objective(ad::Var gan, std::span<const ad::Var> quantization_losses, double alpha);
double fqgan_objective(double gan, double quantization_loss, double alpha);

/// Linear ramp from 0 to `target` over `warmup` iterations, then constant.
double anneal_alpha(std::size_t iteration, std::size_t warmup, double target);

}  // namespace fqgan

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fqgan/datasets.hpp"
#include "fqgan/gan.hpp"

namespace fqgan {

/// Every hyper-parameter of a run. Field names double as config-file keys.
struct TrainConfig {
  // data
  std::string dataset = "ring";  ///< ring | grid | csv
  std::size_t modes = 8;         ///< ring modes, or grid side
  double radius = 2.0;           ///< ring radius, or grid spacing
  double data_std = 0.02;
  std::string data_csv;

  // networks
  std::size_t latent_dim = 2;
  std::size_t data_dim = 2;
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 3;
  double leaky_slope = 0.2;

  // optimization
  std::size_t batch_size = 64;
  double g_lr = 2e-4;
  double d_lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t d_steps = 1;
  std::size_t g_steps = 1;
  GeneratorLoss g_loss = GeneratorLoss::NonSaturating;

  // feature quantization
  std::vector<std::size_t> fq_layers = {2};  ///< hidden-layer positions; empty = plain GAN
  std::size_t fq_positions = 1;               ///< vectors per hidden layer
  std::size_t codebook_bits = 1;              ///< K = 2^codebook_bits
  double lambda = 0.9;
  double beta = 0.25;
  double alpha = 1.0;
  long long warmup_iters = -1;  ///< -1: 10% of iterations
  bool bypass_during_warmup = true;
  bool use_ema = true;               ///< false: train items with the dictionary loss
  bool commit_to_generator = true;   ///< fake-sample commitment loss reaches theta
  vq::InitScheme codebook_init = vq::InitScheme::UnitGaussian;

  // schedule and evaluation
  std::size_t iterations = 20000;
  std::size_t eval_interval = 500;
  std::size_t checkpoint_interval = 1000;
  std::size_t eval_samples = 2000;
  std::size_t mmd_samples = 256;
  std::size_t mmd_layer = 2;  ///< hidden layer probed by the feature MMD
  std::size_t last_k = 10;
  std::uint64_t seed = 0;

  std::size_t codebook_size() const { return std::size_t{1} << codebook_bits; }
  std::size_t warmup() const;
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Source of real samples: a mixture or rows of a loaded table.
struct DataSource {
  std::optional<MixtureSpec> mixture;
  Tensor table;

  static DataSource from_config(const TrainConfig& config);
  Tensor draw(std::size_t n, Rng& rng) const;
  std::size_t dim() const;
};

/// Everything a run mutates; copying it snapshots the run.
struct TrainState {
  TrainConfig config;
  DataSource data;
  Mlp generator;
  FqDiscriminator discriminator;
  Adam g_opt;
  Adam d_opt;
  std::vector<Adam> codebook_opt;  ///< pure-loss variant only
  Rng data_rng;
  Rng latent_rng;
  std::size_t iteration = 0;

  /// Fresh state. Each component draws from its own stream of `config.seed`,
  /// so runs that differ only in FQ settings share weights and data.
  static TrainState create(const TrainConfig& config);
  static TrainState create(const TrainConfig& config, DataSource data);

  Tensor generate(const Tensor& z) const { return generator.forward(z); }
};

/// Samples z ~ N(0, I) of shape [n x latent_dim].
Tensor sample_latent(std::size_t n, std::size_t latent_dim, Rng& rng);

enum class Phase { Sample, Generate, Forward, Quantize, Ema, DiscriminatorUpdate, GeneratorUpdate };
std::string to_string(Phase phase);

struct StepHooks {
  std::function<void(Phase)> on_phase;
  /// Called with the discriminator and generator gradients of the joint step.
  std::function<void(const std::vector<Tensor>& d_grads, const std::vector<Tensor>& g_grads)>
      on_gradients;
  bool skip_ema = false;
};

struct StepMetrics {
  std::size_t iteration = 0;
  double alpha = 0.0;
  bool quantization_active = false;  ///< h' (not h) fed forward
  double d_loss = 0.0;               ///< GAN part only
  double g_loss = 0.0;
  std::vector<double> commit_loss;   ///< per FQ layer, joint real+fake batch
  std::vector<double> dict_loss;
  std::vector<std::vector<std::size_t>> counts;
};

/// One iteration: d_steps discriminator updates, the last of which also
/// yields the generator gradient, then g_steps - 1 extra generator updates.
StepMetrics train_step(TrainState& state, const StepHooks& hooks = {});

}  // namespace fqgan

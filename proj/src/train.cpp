#include "fqgan/train.hpp"

#include <cmath>
#include <stdexcept>

namespace fqgan {

std::size_t TrainConfig::warmup() const {
  return warmup_iters < 0 ? iterations / 10 : static_cast<std::size_t>(warmup_iters);
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (dataset != "ring" && dataset != "grid" && dataset != "csv")
    fail("dataset must be ring, grid or csv");
  if (dataset != "csv") {
    if (modes < 1) fail("modes must be >= 1");
    if (!(radius > 0.0)) fail("radius must be > 0");
    if (!(data_std > 0.0)) fail("data_std must be > 0");
    if (data_dim != 2) fail("synthetic datasets are 2-D; data_dim must be 2");
  } else if (data_csv.empty()) {
    fail("dataset=csv needs data_csv");
  }
  if (latent_dim < 1 || data_dim < 1 || hidden_width < 1 || hidden_layers < 1)
    fail("network widths and depth must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(g_lr > 0.0) || !(d_lr > 0.0)) fail("learning rates must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("adam betas must lie in [0, 1)");
  if (d_steps < 1 || g_steps < 1) fail("d_steps and g_steps must be >= 1");
  for (auto p : fq_layers)
    if (p < 1 || p > hidden_layers) fail("fq layer position out of range 1..hidden_layers");
  if (fq_positions < 1 || hidden_width % fq_positions != 0)
    fail("fq_positions must divide hidden_width");
  if (codebook_bits < 1 || codebook_bits > 20) fail("codebook_bits must lie in 1..20");
  if (!(lambda >= 0.0 && lambda < 1.0)) fail("lambda must lie in [0, 1)");
  if (!(beta >= 0.0)) fail("beta must be >= 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (warmup_iters < -1) fail("warmup_iters must be -1 (auto) or >= 0");
  if (iterations < 1) fail("iterations must be >= 1");
  if (eval_interval < 1 || checkpoint_interval < 1) fail("intervals must be >= 1");
  if (eval_samples < 3 || mmd_samples < 2) fail("eval_samples >= 3 and mmd_samples >= 2 required");
  if (mmd_layer < 1 || mmd_layer > hidden_layers) fail("mmd_layer out of range 1..hidden_layers");
  if (last_k < 1) fail("last_k must be >= 1");
}

DataSource DataSource::from_config(const TrainConfig& config) {
  DataSource d;
  if (config.dataset == "ring") {
    d.mixture = ring_mixture(config.modes, config.radius, config.data_std);
  } else if (config.dataset == "grid") {
    d.mixture = grid_mixture(config.modes, config.radius, config.data_std);
  } else {
    d.table = load_csv(config.data_csv, config.data_dim);
  }
  return d;
}

Tensor DataSource::draw(std::size_t n, Rng& rng) const {
  if (mixture) return sample(*mixture, n, rng);
  Tensor out({n, table.cols()});
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = table.row(rng.index(table.rows()));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::size_t DataSource::dim() const { return mixture ? 2 : table.cols(); }

Tensor sample_latent(std::size_t n, std::size_t latent_dim, Rng& rng) {
  Tensor z({n, latent_dim});
  for (double& v : z.values()) v = rng.normal();
  return z;
}

TrainState TrainState::create(const TrainConfig& config) {
  config.validate();
  return create(config, DataSource::from_config(config));
}

TrainState TrainState::create(const TrainConfig& config, DataSource data) {
  config.validate();
  if (data.dim() != config.data_dim)
    throw std::invalid_argument("data source dimension does not match data_dim");
  std::vector<std::size_t> g_widths{config.latent_dim};
  std::vector<std::size_t> d_widths{config.data_dim};
  for (std::size_t i = 0; i < config.hidden_layers; ++i) {
    g_widths.push_back(config.hidden_width);
    d_widths.push_back(config.hidden_width);
  }
  g_widths.push_back(config.data_dim);
  d_widths.push_back(1);

  TrainState st{.config = config,
                .data = std::move(data),
                .generator = Mlp(g_widths, Activation::LeakyRelu, config.leaky_slope),
                .discriminator = {},
                .g_opt = {},
                .d_opt = {},
                .codebook_opt = {},
                .data_rng = Rng::stream(config.seed, streams::kData),
                .latent_rng = Rng::stream(config.seed, streams::kLatent),
                .iteration = 0};
  Rng g_init = Rng::stream(config.seed, streams::kGeneratorInit);
  st.generator.initialize(g_init);

  Mlp d_net(d_widths, Activation::LeakyRelu, config.leaky_slope);
  Rng d_init = Rng::stream(config.seed, streams::kDiscriminatorInit);
  d_net.initialize(d_init);

  Rng cb_init = Rng::stream(config.seed, streams::kCodebookInit);
  std::vector<FqLayer> layers;
  for (auto pos : config.fq_layers) {
    layers.push_back(FqLayer{pos, config.fq_positions,
                             vq::Codebook::random(config.codebook_size(),
                                                  config.hidden_width / config.fq_positions,
                                                  config.lambda, config.beta, cb_init,
                                                  config.codebook_init)});
  }
  st.discriminator = FqDiscriminator(std::move(d_net), std::move(layers));

  const AdamConfig g_adam{config.g_lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
  const AdamConfig d_adam{config.d_lr, config.adam_beta1, config.adam_beta2, config.adam_eps};
  st.g_opt = Adam(g_adam, st.generator.parameters());
  st.d_opt = Adam(d_adam, st.discriminator.net().parameters());
  if (!config.use_ema)
    for (const auto& l : st.discriminator.fq_layers())
      st.codebook_opt.emplace_back(d_adam, std::vector<Tensor>{l.codebook.items()});
  return st;
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Sample: return "sample";
    case Phase::Generate: return "generate";
    case Phase::Forward: return "forward";
    case Phase::Quantize: return "quantize";
    case Phase::Ema: return "ema";
    case Phase::DiscriminatorUpdate: return "d-update";
    case Phase::GeneratorUpdate: return "g-update";
  }
  return "?";
}

namespace {

void require_finite(const Tensor& t, std::size_t iteration, const char* what) {
  for (double v : t.values())
    if (!std::isfinite(v)) throw DivergenceError(iteration, std::string("non-finite ") + what);
}

std::vector<Tensor> gradients(const ad::Tape& tape, const Mlp::Bound& bound) {
  std::vector<Tensor> grads;
  grads.reserve(bound.params.size());
  for (const auto& p : bound.params) grads.push_back(tape.grad(p));
  return grads;
}

std::vector<ad::Var> commit_terms(const FqDiscriminator::Forward& fwd) {
  std::vector<ad::Var> terms;
  for (const auto& q : fwd.quantized) terms.push_back(q.commit);
  return terms;
}

}  // namespace

StepMetrics train_step(TrainState& st, const StepHooks& hooks) {
  const TrainConfig& cfg = st.config;
  const std::size_t it = st.iteration;
  const std::size_t n = cfg.batch_size;
  const double alpha = anneal_alpha(it, cfg.warmup(), cfg.alpha);
  const bool bypass = cfg.bypass_during_warmup && it < cfg.warmup();
  FqDiscriminator& disc = st.discriminator;
  const bool has_fq = !disc.fq_layers().empty();
  auto emit = [&](Phase p) {
    if (hooks.on_phase) hooks.on_phase(p);
  };

  StepMetrics metrics;
  metrics.iteration = it;
  metrics.alpha = alpha;
  metrics.quantization_active = has_fq && !bypass;

  for (std::size_t s = 0; s < cfg.d_steps; ++s) {
    // The last discriminator step shares its forward pass with the generator.
    const bool joint = s + 1 == cfg.d_steps;

    emit(Phase::Sample);
    const Tensor real = st.data.draw(n, st.data_rng);
    const Tensor z = sample_latent(n, cfg.latent_dim, st.latent_rng);

    emit(Phase::Generate);
    ad::Tape g_tape;
    const auto g_bound = st.generator.bind(g_tape, joint);
    const ad::Var fake = st.generator.forward(g_bound, g_tape.leaf(z));
    require_finite(fake.value(), it, "generator output");

    emit(Phase::Forward);
    ad::Tape d_tape;
    const auto d_bound = disc.net().bind(d_tape, true);
    std::vector<ad::Var> items;
    if (!cfg.use_ema)
      for (const auto& l : disc.fq_layers()) items.push_back(d_tape.leaf(l.codebook.items(), true));
    const ad::Var parts[] = {d_tape.leaf(real), d_tape.leaf(fake.value())};
    const ad::Var batch = ad::concat_rows(parts);
    const FqDiscriminator::Options d_options{bypass, static_cast<double>(2 * n), items};
    const auto fwd = disc.forward(d_bound, batch, d_options);
    require_finite(fwd.logits.value(), it, "discriminator logit");
    if (has_fq) emit(Phase::Quantize);

    // The generator pass replays this forward on the pre-update dictionary.
    std::optional<FqDiscriminator> snapshot;
    if (joint) snapshot = disc;

    if (has_fq && cfg.use_ema) {
      emit(Phase::Ema);
      if (!hooks.skip_ema) {
        for (std::size_t j = 0; j < disc.fq_layers().size(); ++j) {
          FqLayer& layer = disc.fq_layers()[j];
          const Tensor& h = fwd.hidden[layer.after_hidden - 1].value();
          const Tensor features =
              h.reshaped({h.rows() * layer.positions, layer.codebook.dim()});
          layer.codebook.ema_update(features, fwd.quantized[j].indices);
        }
      }
    }

    const ad::Var real_logits = ad::slice_rows(fwd.logits, 0, n);
    const ad::Var fake_logits = ad::slice_rows(fwd.logits, n, n);
    const ad::Var d_gan = discriminator_loss(real_logits, fake_logits);
    std::vector<ad::Var> d_terms = commit_terms(fwd);
    if (!cfg.use_ema)
      for (const auto& q : fwd.quantized) d_terms.push_back(q.dictionary);
    const ad::Var d_total = fqgan_objective(d_gan, d_terms, alpha);
    require_finite(d_total.value(), it, "discriminator loss");
    d_tape.backward(d_total);
    const std::vector<Tensor> d_grads = gradients(d_tape, d_bound);

    metrics.d_loss = d_gan.value()[0];
    metrics.commit_loss.clear();
    metrics.dict_loss.clear();
    metrics.counts.clear();
    for (const auto& q : fwd.quantized) {
      metrics.commit_loss.push_back(q.commit_loss);
      metrics.dict_loss.push_back(q.dict_loss);
      metrics.counts.push_back(q.counts);
    }

    std::vector<Tensor> g_grads;
    if (joint) {
      const auto frozen = snapshot->net().bind(g_tape, false);
      const FqDiscriminator::Options g_options{bypass, static_cast<double>(2 * n), {}};
      const auto g_fwd = snapshot->forward(frozen, fake, g_options);
      const ad::Var g_gan = generator_loss(g_fwd.logits, cfg.g_loss);
      const std::vector<ad::Var> g_terms =
          cfg.commit_to_generator ? commit_terms(g_fwd) : std::vector<ad::Var>{};
      const ad::Var g_total = fqgan_objective(g_gan, g_terms, alpha);
      require_finite(g_total.value(), it, "generator loss");
      g_tape.backward(g_total);
      g_grads = gradients(g_tape, g_bound);
      metrics.g_loss = g_gan.value()[0];
      if (hooks.on_gradients) hooks.on_gradients(d_grads, g_grads);
    }

    emit(Phase::DiscriminatorUpdate);
    st.d_opt.step(disc.net().parameters(), d_grads);
    if (!cfg.use_ema) {
      for (std::size_t j = 0; j < disc.fq_layers().size(); ++j) {
        std::vector<Tensor> params{disc.fq_layers()[j].codebook.items()};
        st.codebook_opt[j].step(params, {d_tape.grad(items[j])});
        disc.fq_layers()[j].codebook.set_items(params[0]);
      }
    }

    if (joint) {
      emit(Phase::GeneratorUpdate);
      st.g_opt.step(st.generator.parameters(), g_grads);
    }
  }

  for (std::size_t s = 1; s < cfg.g_steps; ++s) {
    emit(Phase::Sample);
    const Tensor z = sample_latent(n, cfg.latent_dim, st.latent_rng);
    emit(Phase::Generate);
    ad::Tape tape;
    const auto g_bound = st.generator.bind(tape, true);
    const ad::Var fake = st.generator.forward(g_bound, tape.leaf(z));
    emit(Phase::Forward);
    const auto d_bound = disc.net().bind(tape, false);
    const FqDiscriminator::Options options{bypass, static_cast<double>(2 * n), {}};
    const auto fwd = disc.forward(d_bound, fake, options);
    if (has_fq) emit(Phase::Quantize);
    const std::vector<ad::Var> terms =
        cfg.commit_to_generator ? commit_terms(fwd) : std::vector<ad::Var>{};
    const ad::Var total = fqgan_objective(generator_loss(fwd.logits, cfg.g_loss), terms, alpha);
    require_finite(total.value(), it, "generator loss");
    tape.backward(total);
    emit(Phase::GeneratorUpdate);
    st.g_opt.step(st.generator.parameters(), gradients(tape, g_bound));
  }

  ++st.iteration;
  return metrics;
}

}  // namespace fqgan

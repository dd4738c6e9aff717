#include "fqgan/gan.hpp"

#include <algorithm>
#include <cmath>

namespace fqgan {

FqDiscriminator::FqDiscriminator(Mlp net, std::vector<FqLayer> fq_layers)
    : net_(std::move(net)), fq_(std::move(fq_layers)) {
  std::sort(fq_.begin(), fq_.end(),
            [](const FqLayer& a, const FqLayer& b) { return a.after_hidden < b.after_hidden; });
  for (std::size_t j = 0; j < fq_.size(); ++j) {
    const FqLayer& l = fq_[j];
    if (l.after_hidden < 1 || l.after_hidden > net_.hidden_layers())
      throw std::invalid_argument("FQ position " + std::to_string(l.after_hidden) +
                                  " is outside hidden layers 1.." +
                                  std::to_string(net_.hidden_layers()));
    if (j > 0 && fq_[j - 1].after_hidden == l.after_hidden)
      throw std::invalid_argument("two FQ layers at hidden layer " + std::to_string(l.after_hidden));
    const std::size_t width = net_.widths()[l.after_hidden];
    if (l.positions == 0 || l.positions * l.codebook.dim() != width)
      throw DimensionError("FQ layer after hidden " + std::to_string(l.after_hidden) + ": " +
                           std::to_string(l.positions) + " positions x dim " +
                           std::to_string(l.codebook.dim()) + " != width " + std::to_string(width));
  }
}

const FqLayer* FqDiscriminator::fq_at(std::size_t after_hidden) const noexcept {
  for (const auto& l : fq_)
    if (l.after_hidden == after_hidden) return &l;
  return nullptr;
}

FqDiscriminator::Forward FqDiscriminator::run(const Mlp::Bound& bound, std::size_t first_layer,
                                              ad::Var x, const Options& options) const {
  if (!options.items.empty() && options.items.size() != fq_.size())
    throw std::invalid_argument("one items variable per FQ layer is required");
  Forward out;
  out.hidden.resize(net_.hidden_layers());
  ad::Var h = x;
  for (std::size_t i = first_layer; i < net_.layers(); ++i) {
    h = net_.layer(bound, i, h);
    const std::size_t hidden_index = i + 1;
    if (hidden_index > net_.hidden_layers()) break;
    out.hidden[i] = h;
    for (std::size_t j = 0; j < fq_.size(); ++j) {
      if (fq_[j].after_hidden != hidden_index) continue;
      vq::QuantizeOptions q;
      q.positions = fq_[j].positions;
      q.normalizer = options.normalizer;
      if (!options.items.empty()) q.items = options.items[j];
      out.quantized.push_back(vq::quantize_map(h, fq_[j].codebook, q));
      if (!options.bypass) h = out.quantized.back().output;
    }
  }
  out.logits = h;
  return out;
}

FqDiscriminator::Forward FqDiscriminator::forward(const Mlp::Bound& bound, ad::Var x,
                                                  const Options& options) const {
  if (x.shape().size() != 2 || x.shape()[1] != net_.input_width())
    throw DimensionError("discriminator input must be [batch x " +
                         std::to_string(net_.input_width()) + "], got " + to_string(x.shape()));
  return run(bound, 0, x, options);
}

ad::Var FqDiscriminator::forward_top(const Mlp::Bound& bound, std::size_t after_hidden, ad::Var h,
                                     const Options& options) const {
  if (after_hidden < 1 || after_hidden > net_.hidden_layers())
    throw std::out_of_range("hidden layer index out of range");
  if (!options.items.empty()) throw std::invalid_argument("forward_top does not take items");
  return run(bound, after_hidden, h, options).logits;
}

Tensor FqDiscriminator::logits(const Tensor& x) const {
  ad::Tape tape;
  const auto bound = net_.bind(tape, false);
  return forward(bound, tape.leaf(x)).logits.value();
}

GeneratorLoss parse_generator_loss(const std::string& name) {
  if (name == "non-saturating") return GeneratorLoss::NonSaturating;
  if (name == "minimax") return GeneratorLoss::Minimax;
  throw std::invalid_argument("unknown generator loss '" + name + "'");
}

std::string to_string(GeneratorLoss loss) {
  return loss == GeneratorLoss::NonSaturating ? "non-saturating" : "minimax";
}

ad::Var discriminator_loss(ad::Var real_logits, ad::Var fake_logits) {
  // -log sigma(r) = softplus(-r);  -log(1 - sigma(f)) = softplus(f)
  return ad::add(ad::mean(ad::softplus(ad::scale(real_logits, -1.0))),
                 ad::mean(ad::softplus(fake_logits)));
}

ad::Var generator_loss(ad::Var fake_logits, GeneratorLoss kind) {
  if (kind == GeneratorLoss::NonSaturating)
    return ad::mean(ad::softplus(ad::scale(fake_logits, -1.0)));
  return ad::scale(ad::mean(ad::softplus(fake_logits)), -1.0);
}

GanLossValues gan_losses(const Tensor& real_logits, const Tensor& fake_logits, GeneratorLoss kind,
                         std::size_t iteration) {
  for (double v : real_logits.values())
    if (!std::isfinite(v)) throw DivergenceError(iteration, "non-finite real logit");
  for (double v : fake_logits.values())
    if (!std::isfinite(v)) throw DivergenceError(iteration, "non-finite fake logit");
  ad::Tape tape;
  const auto real = tape.leaf(real_logits);
  const auto fake = tape.leaf(fake_logits);
  return {discriminator_loss(real, fake).value()[0], generator_loss(fake, kind).value()[0]};
}

ad::Var fqgan_objective(ad::Var gan, std::span<const ad::Var> quantization_losses, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (alpha == 0.0 || quantization_losses.empty()) return gan;
  ad::Var total = quantization_losses[0];
  for (std::size_t i = 1; i < quantization_losses.size(); ++i)
    total = ad::add(total, quantization_losses[i]);
  return ad::add(gan, ad::scale(total, alpha));
}

double fqgan_objective(double gan, double quantization_loss, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (alpha == 0.0) return gan;
  return gan + alpha * quantization_loss;
}

double anneal_alpha(std::size_t iteration, std::size_t warmup, double target) {
  if (warmup == 0 || iteration >= warmup) return target;
  return target * static_cast<double>(iteration) / static_cast<double>(warmup);
}

}  // namespace fqgan

#include "fqgan/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fqgan::vq {

namespace {

typedef double Lane8 __attribute__((vector_size(64)));

Lane8 load8(const double* p) {
  Lane8 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

void store8(double* p, Lane8 v) { __builtin_memcpy(p, &v, sizeof v); }

std::size_t check_layout(const Shape& shape, std::size_t positions, const Codebook& codebook) {
  if (shape.size() != 2) throw DimensionError("feature map must be [batch x width], got " + fqgan::to_string(shape));
  if (positions == 0) throw DimensionError("feature map needs at least one position");
  const std::size_t width = shape[1];
  if (width % positions != 0 || width / positions != codebook.dim())
    throw DimensionError("feature width " + std::to_string(width) + " is not " +
                         std::to_string(positions) + " positions of codebook dim " +
                         std::to_string(codebook.dim()));
  return shape[0] * positions;
}

}  // namespace

Assignment assign(const Tensor& h, std::size_t positions, const Codebook& codebook) {
  const std::size_t vectors = check_layout(h.shape(), positions, codebook);
  const std::size_t dim = codebook.dim(), K = codebook.size();
  Assignment out;
  out.indices.resize(vectors);
  out.quantized = Tensor(h.shape());
  out.counts.assign(K, 0);

  // Eight feature vectors per pass, stored [D x 8]. Each lane still sums its
  // distance over j in increasing order from zero, as Codebook::nearest does.
  const Tensor& items = codebook.items();
  std::vector<double> block(dim * 8);
  std::vector<double> d2(K * 8);
  for (std::size_t v0 = 0; v0 < vectors; v0 += 8) {
    const std::size_t lanes = std::min<std::size_t>(8, vectors - v0);
    std::fill(block.begin(), block.end(), 0.0);
    for (std::size_t l = 0; l < lanes; ++l) {
      const double* f = h.data() + (v0 + l) * dim;
      for (std::size_t j = 0; j < dim; ++j) block[j * 8 + l] = f[j];
    }
    std::size_t k = 0;
    for (; k + 4 <= K; k += 4) {
      const double* e0 = items.data() + k * dim;
      const double* e1 = e0 + dim;
      const double* e2 = e1 + dim;
      const double* e3 = e2 + dim;
      Lane8 a0 = {}, a1 = {}, a2 = {}, a3 = {};
      for (std::size_t j = 0; j < dim; ++j) {
        const Lane8 x = load8(block.data() + j * 8);
        const Lane8 t0 = x - e0[j], t1 = x - e1[j], t2 = x - e2[j], t3 = x - e3[j];
        a0 += t0 * t0;
        a1 += t1 * t1;
        a2 += t2 * t2;
        a3 += t3 * t3;
      }
      store8(d2.data() + k * 8, a0);
      store8(d2.data() + (k + 1) * 8, a1);
      store8(d2.data() + (k + 2) * 8, a2);
      store8(d2.data() + (k + 3) * 8, a3);
    }
    for (; k < K; ++k) {
      const double* e = items.data() + k * dim;
      Lane8 a = {};
      for (std::size_t j = 0; j < dim; ++j) {
        const Lane8 t = load8(block.data() + j * 8) - e[j];
        a += t * t;
      }
      store8(d2.data() + k * 8, a);
    }
    for (std::size_t l = 0; l < lanes; ++l) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < K; ++c)
        if (d2[c * 8 + l] < d2[best * 8 + l]) best = c;
      const std::size_t v = v0 + l;
      out.indices[v] = best;
      ++out.counts[best];
      const auto code = codebook.item(best);
      std::copy(code.begin(), code.end(), out.quantized.data() + v * dim);
    }
  }
  return out;
}

QuantizeResult quantize_map(ad::Var h, const Codebook& codebook, const QuantizeOptions& options) {
  ad::Tape& tape = *h.tape();
  Assignment a = assign(h.value(), options.positions, codebook);
  const double normalizer =
      options.normalizer > 0.0 ? options.normalizer : static_cast<double>(h.shape()[0]);

  ad::Var code;
  if (options.items.valid()) {
    if (options.items.shape() != codebook.items().shape())
      throw DimensionError("quantize_map: items variable does not match the codebook");
    code = ad::reshape(ad::gather_rows(options.items, a.indices), h.shape());
  } else {
    code = tape.leaf(a.quantized, false);
  }

  QuantizeResult r;
  r.output = ad::straight_through(code, h);
  r.commit = commitment_loss(h, code, codebook.commitment(), normalizer);
  r.commit_loss = r.commit.value()[0];
  if (options.items.valid()) {
    r.dictionary = ad::scale(ad::sum_squared_difference(ad::stop_gradient(h), code), 1.0 / normalizer);
    r.dict_loss = r.dictionary.value()[0];
  } else {
    double total = 0.0;
    const Tensor& hv = h.value();
    for (std::size_t i = 0; i < hv.size(); ++i) {
      const double d = hv[i] - a.quantized[i];
      total += d * d;
    }
    r.dict_loss = total / normalizer;
  }
  r.indices = std::move(a.indices);
  r.quantized = std::move(a.quantized);
  r.counts = std::move(a.counts);
  return r;
}

ad::Var commitment_loss(ad::Var h, ad::Var code, double beta, double normalizer) {
  if (beta < 0.0) throw std::invalid_argument("commitment weight must be >= 0");
  return ad::scale(ad::sum_squared_difference(h, ad::stop_gradient(code)), beta / normalizer);
}

double commitment_loss(const Tensor& h, const Tensor& code, double beta) {
  if (h.shape() != code.shape())
    throw DimensionError("commitment_loss: shape mismatch " + fqgan::to_string(h.shape()) + " vs " +
                         fqgan::to_string(code.shape()));
  if (beta < 0.0) throw std::invalid_argument("commitment weight must be >= 0");
  double total = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double d = code[i] - h[i];
    total += d * d;
  }
  return beta * total / static_cast<double>(h.rows());
}

UsageStats usage_stats(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("usage_stats: no assignments recorded");
  double entropy = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return {std::vector<std::size_t>(counts.begin(), counts.end()), std::exp(entropy)};
}

}  // namespace fqgan::vq

#include "fqgan/codebook.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "fqgan/io.hpp"

namespace fqgan::vq {

namespace {
constexpr const char* kHeader = "fqgan-codebook 1";
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "unit-gaussian") return InitScheme::UnitGaussian;
  if (name == "uniform") return InitScheme::Uniform;
  throw std::invalid_argument("unknown codebook init scheme '" + name + "'");
}

std::string to_string(InitScheme scheme) {
  return scheme == InitScheme::UnitGaussian ? "unit-gaussian" : "uniform";
}

Codebook::Codebook(std::size_t size, std::size_t dim, double decay, double commitment)
    : size_(size), dim_(dim), decay_(decay), commitment_(commitment) {
  if (size == 0 || dim == 0) throw std::invalid_argument("codebook size and dim must be >= 1");
  if (!(decay >= 0.0 && decay < 1.0)) throw std::invalid_argument("codebook decay must lie in [0, 1)");
  if (!(commitment >= 0.0)) throw std::invalid_argument("commitment weight must be >= 0");
  items_ = Tensor({size, dim}, 0.0);
  sum_.assign(size * dim, 0.0);
  count_.assign(size, 1.0);
}

Codebook Codebook::random(std::size_t size, std::size_t dim, double decay, double commitment,
                          Rng& rng, InitScheme scheme) {
  Codebook cb(size, dim, decay, commitment);
  for (double& v : cb.items_.values())
    v = 0.1 * (scheme == InitScheme::UnitGaussian ? rng.normal() : rng.uniform(-1.0, 1.0));
  cb.sum_.assign(cb.items_.values().begin(), cb.items_.values().end());
  return cb;
}

std::span<const double> Codebook::ema_sum(std::size_t k) const {
  if (k >= size_) throw std::out_of_range("code index out of range");
  return {sum_.data() + k * dim_, dim_};
}

void Codebook::set_item(std::size_t k, std::span<const double> value) {
  if (k >= size_) throw std::out_of_range("code index out of range");
  if (value.size() != dim_) throw DimensionError("set_item: expected dim " + std::to_string(dim_));
  for (std::size_t j = 0; j < dim_; ++j) {
    items_.at(k, j) = value[j];
    sum_[k * dim_ + j] = value[j] * count_[k];
  }
}

void Codebook::set_items(const Tensor& items) {
  if (items.shape() != items_.shape())
    throw DimensionError("set_items: expected " + fqgan::to_string(items_.shape()) + ", got " +
                         fqgan::to_string(items.shape()));
  for (std::size_t k = 0; k < size_; ++k) set_item(k, items.row(k));
}

Lookup Codebook::nearest(std::span<const double> h) const {
  if (h.size() != dim_)
    throw DimensionError("nearest: feature dim " + std::to_string(h.size()) +
                         " does not match codebook dim " + std::to_string(dim_));
  Lookup best{0, 0.0};
  const double* e = items_.data();
  for (std::size_t k = 0; k < size_; ++k, e += dim_) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double diff = h[j] - e[j];
      d2 += diff * diff;
    }
    if (k == 0 || d2 < best.distance2) best = {k, d2};
  }
  return best;
}

std::vector<std::size_t> Codebook::ema_update(const Tensor& features,
                                              std::span<const std::size_t> indices) {
  if (features.cols() != dim_)
    throw DimensionError("ema_update: feature dim " + std::to_string(features.cols()) +
                         " does not match codebook dim " + std::to_string(dim_));
  if (features.rows() != indices.size())
    throw DimensionError("ema_update: " + std::to_string(indices.size()) + " indices for " +
                         std::to_string(features.rows()) + " feature rows");
  std::vector<std::size_t> counts(size_, 0);
  std::vector<double> batch_sum(size_ * dim_, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= size_) throw std::out_of_range("ema_update: code index out of range");
    ++counts[k];
    const auto row = features.row(i);
    for (std::size_t j = 0; j < dim_; ++j) batch_sum[k * dim_ + j] += row[j];
  }
  const double keep = decay_;
  const double take = 1.0 - decay_;
  for (std::size_t k = 0; k < size_; ++k) {
    for (std::size_t j = 0; j < dim_; ++j)
      sum_[k * dim_ + j] = keep * sum_[k * dim_ + j] + take * batch_sum[k * dim_ + j];
    count_[k] = keep * count_[k] + take * static_cast<double>(counts[k]);
    // m_k / N_k is unchanged in exact arithmetic when n_k = 0; skip the
    // division so the stored item stays bit-identical.
    if (counts[k] == 0 || !(count_[k] > 0.0)) continue;
    for (std::size_t j = 0; j < dim_; ++j) items_.at(k, j) = sum_[k * dim_ + j] / count_[k];
  }
  return counts;
}

void Codebook::write(std::ostream& out) const {
  out << kHeader << '\n'
      << size_ << ' ' << dim_ << '\n'
      << format_hex(decay_) << ' ' << format_hex(commitment_) << '\n';
  auto write_rows = [&](const double* data, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out << (c ? " " : "") << format_hex(data[r * cols + c]);
      out << '\n';
    }
  };
  write_rows(items_.data(), size_, dim_);
  write_rows(sum_.data(), size_, dim_);
  write_rows(count_.data(), 1, size_);
}

Codebook Codebook::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHeader)
    throw std::runtime_error("codebook record: bad header");
  std::size_t size = 0, dim = 0;
  std::string decay_text, beta_text;
  if (!(in >> size >> dim >> decay_text >> beta_text))
    throw std::runtime_error("codebook record: truncated preamble");
  double decay = 0.0, beta = 0.0;
  if (!parse_double(decay_text, decay) || !parse_double(beta_text, beta))
    throw std::runtime_error("codebook record: bad hyper-parameters");
  Codebook cb(size, dim, decay, beta);
  auto read_values = [&](double* data, std::size_t count) {
    std::string token;
    for (std::size_t i = 0; i < count; ++i)
      if (!(in >> token) || !parse_double(token, data[i]))
        throw std::runtime_error("codebook record: bad or missing value");
  };
  read_values(cb.items_.data(), size * dim);
  read_values(cb.sum_.data(), size * dim);
  read_values(cb.count_.data(), size);
  std::getline(in, line);
  return cb;
}

}  // namespace fqgan::vq

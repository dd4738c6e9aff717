#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fqgan/rng.hpp"
#include "fqgan/tensor.hpp"

namespace fqgan::vq {

enum class InitScheme { UnitGaussian, Uniform };

InitScheme parse_init_scheme(const std::string& name);
std::string to_string(InitScheme scheme);

struct Lookup {
  std::size_t index = 0;
  double distance2 = 0.0;
};

/// Dictionary of K prototype vectors of dimension D with moving-average state.
///
/// Each item e_k is backed by a running feature sum m_k and a running count N_k;
/// after every update touching k, e_k = m_k / N_k. K and D are fixed at
/// construction.
class Codebook {
 public:
  /// Zero items with N_k = 1. `decay` must lie in [0, 1), `commitment` >= 0.
  Codebook(std::size_t size, std::size_t dim, double decay = 0.9, double commitment = 0.25);

  /// Items drawn from `scheme` scaled by 0.1; m_k = e_k and N_k = 1.
  static Codebook random(std::size_t size, std::size_t dim, double decay, double commitment,
                         Rng& rng, InitScheme scheme = InitScheme::UnitGaussian);

  std::size_t size() const noexcept { return size_; }
  std::size_t dim() const noexcept { return dim_; }
  double decay() const noexcept { return decay_; }
  double commitment() const noexcept { return commitment_; }

  /// All items as a [K x D] tensor.
  const Tensor& items() const noexcept { return items_; }
  std::span<const double> item(std::size_t k) const { return items_.row(k); }
  std::span<const double> ema_sum(std::size_t k) const;
  double ema_count(std::size_t k) const { return count_.at(k); }

  /// Overwrites e_k and rescales m_k = e_k * N_k so the invariant holds.
  void set_item(std::size_t k, std::span<const double> value);
  /// Replaces every item (pure-loss training path); same rescaling as set_item.
  void set_items(const Tensor& items);

  /// Nearest item by squared Euclidean distance; ties go to the lowest index.
  Lookup nearest(std::span<const double> h) const;

  /// Moving-average update from `features` ([n x D]) assigned to `indices`.
  /// Items with no assignment keep their exact value. Returns n_k per code.
  std::vector<std::size_t> ema_update(const Tensor& features,
                                      std::span<const std::size_t> indices);

  /// Text record: header, K, D, decay, commitment, then items, m and N in
  /// index order as hexadecimal floats.
  void write(std::ostream& out) const;
  static Codebook read(std::istream& in);

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  std::size_t size_;
  std::size_t dim_;
  double decay_;
  double commitment_;
  Tensor items_;
  std::vector<double> sum_;
  std::vector<double> count_;
};

}  // namespace fqgan::vq

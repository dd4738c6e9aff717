#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fqgan/rng.hpp"
#include "fqgan/train.hpp"

namespace fqgan::testing {

/// Bit-for-bit equality (distinguishes -0 from 0, matches equal NaN payloads).
bool same_bits(std::span<const double> a, std::span<const double> b);
bool same_bits(const Tensor& a, const Tensor& b);
bool same_bits(const std::vector<Tensor>& a, const std::vector<Tensor>& b);
bool same_bits(double a, double b);

/// Randomized check outcome; `first_failure` describes the first violation.
struct PropertyReport {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;
  bool ok() const { return cases > 0 && failures == 0; }
};

/// Membership, idempotence, nearest-by-exhaustive-scan and lowest-index ties
/// for `instances` random (feature map, codebook) pairs. A share of the
/// instances use small-integer coordinates and duplicated items so exact
/// ties actually occur.
PropertyReport quantization_invariants(std::size_t instances, Rng& rng);

struct EmaReport {
  double max_deviation = 0.0;     ///< vs the closed-form oracle, over all sequences
  bool lambda_zero_exact = true;  ///< decay 0 gives the batch mean bit for bit
  bool unused_unchanged = true;   ///< never-assigned codes keep their bits
};

/// `sequences` random runs of `batches` EMA updates each.
EmaReport ema_oracle_check(std::size_t sequences, std::size_t batches, Rng& rng);

struct StraightThroughReport {
  std::size_t cases = 0;
  double max_relative_error = 0.0;  ///< dL/dh vs central differences of the top net at h'
  double max_code_gradient = 0.0;   ///< |d commit / d e_k|, should be exactly 0
};

StraightThroughReport straight_through_check(std::size_t cases, Rng& rng);

/// Steps a plain TrainState (no FQ layers) and ReferenceGan side by side and
/// reports the first step where losses, gradients or parameters differ in any bit.
PropertyReport plain_gan_equivalence(const TrainConfig& config, std::size_t steps);

/// Steps an FQ TrainState with alpha = 0 and bypass on, against the same
/// config without FQ layers, comparing gradients and parameters bitwise.
PropertyReport alpha_zero_equivalence(const TrainConfig& config, std::size_t steps);

/// Small, fast config for the equivalence checks.
TrainConfig small_config();

}  // namespace fqgan::testing

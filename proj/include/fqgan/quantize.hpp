#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fqgan/codebook.hpp"
#include "fqgan/ops.hpp"

namespace fqgan::vq {

/// Per-position code assignment of a feature map, computed off the tape.
struct Assignment {
  std::vector<std::size_t> indices;  ///< one per (row, position), row-major
  Tensor quantized;                  ///< same shape as the input map
  std::vector<std::size_t> counts;   ///< n_k, one per code
};

/// Splits each row of `h` ([batch x positions*D]) into `positions` vectors of
/// width D and snaps every vector to its nearest code.
Assignment assign(const Tensor& h, std::size_t positions, const Codebook& codebook);

/// Output of the quantization layer.
struct QuantizeResult {
  std::vector<std::size_t> indices;
  Tensor quantized;
  std::vector<std::size_t> counts;
  double commit_loss = 0.0;  ///< beta * ||sg(e) - h||^2, summed over positions, / normalizer
  double dict_loss = 0.0;    ///< ||sg(h) - e||^2, same reduction
  ad::Var output;            ///< straight-through h', forward value == quantized
  ad::Var commit;            ///< commit_loss on the tape (gradient reaches h only)
  ad::Var dictionary;        ///< dict_loss on the tape; valid only with `items`
};

struct QuantizeOptions {
  std::size_t positions = 1;
  /// Divisor of the summed squared residuals; 0 means the row count of h.
  double normalizer = 0.0;
  /// When set ([K x D] leaf holding the codebook items), quantized rows are
  /// gathered from it so the dictionary loss trains the items directly.
  ad::Var items;
};

QuantizeResult quantize_map(ad::Var h, const Codebook& codebook, const QuantizeOptions& options);

/// beta * sum ||sg(code) - h||^2 / normalizer; no gradient reaches `code`.
ad::Var commitment_loss(ad::Var h, ad::Var code, double beta, double normalizer);
/// Value-only form with the mean taken over rows.
double commitment_loss(const Tensor& h, const Tensor& code, double beta);

struct UsageStats {
  std::vector<std::size_t> counts;
  double perplexity = 0.0;  ///< exp(entropy of normalized counts)
};

/// Throws std::invalid_argument when no assignment has been recorded.
UsageStats usage_stats(std::span<const std::size_t> counts);

}  // namespace fqgan::vq

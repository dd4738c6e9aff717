#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "fqgan/datasets.hpp"
#include "fqgan/gan.hpp"
#include "fqgan/rng.hpp"

namespace fqgan {

struct ModeReport {
  std::size_t total_modes = 0;
  std::size_t modes_covered = 0;
  double high_quality_fraction = 0.0;
  std::vector<std::size_t> counts;  ///< samples whose nearest mean is mode i (sums to n)
  std::vector<std::size_t> within;  ///< of those, samples inside the threshold radius
};

/// Assigns each sample to its nearest mean. A mode is covered when at least
/// `min_count` samples (default max(1, ceil(0.01 * n / modes))) lie within
/// threshold_sigmas * std of it.
ModeReport mode_coverage(const Tensor& samples, const MixtureSpec& spec,
                         double threshold_sigmas = 3.0,
                         std::optional<std::size_t> min_count = std::nullopt);

/// exp(-||a - b||^2 / (2 bandwidth^2))
double rbf_kernel(std::span<const double> a, std::span<const double> b, double bandwidth);

/// Unbiased U-statistic estimate of squared MMD with an RBF kernel.
/// Rows are points; both sets need >= 2 rows of the same width.
double mmd2_unbiased(const Tensor& a, const Tensor& b, double bandwidth);

/// Median pairwise Euclidean distance over the pooled rows of `a` and `b`.
/// Falls back to the median of the non-zero distances when more than half
/// are zero; returns 0 when every point coincides.
double median_bandwidth(const Tensor& a, const Tensor& b);

struct PermutationTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample test on mmd2_unbiased: p = (1 + #{permuted >= observed}) / (1 + permutations).
PermutationTest mmd_permutation_test(const Tensor& a, const Tensor& b, double bandwidth,
                                     std::size_t permutations, Rng& rng);

struct Gaussian2 {
  std::array<double, 2> mean{};
  std::array<double, 4> cov{};  ///< row-major 2x2
  friend bool operator==(const Gaussian2&, const Gaussian2&) = default;
};

/// Sample mean and unbiased covariance of 2-D rows.
Gaussian2 fit_gaussian(const Tensor& samples);

struct FrechetScore {
  double value = 0.0;
  Gaussian2 a;
  Gaussian2 b;
  bool regularized = false;  ///< 1e-10 I was added to a singular covariance
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}) between fitted Gaussians.
/// For 2x2 matrices Tr (S_a S_b)^{1/2} = sqrt(Tr(S_a S_b) + 2 sqrt(det S_a det S_b)).
FrechetScore frechet_2d(const Tensor& a, const Tensor& b);

/// frechet_2d restricted to the samples nearest each mode; empty where either
/// side has fewer than 3 samples.
std::vector<std::optional<double>> per_mode_frechet(const Tensor& generated, const Tensor& real,
                                                    const MixtureSpec& spec);

/// MMD between the quantized feature sets that `real` and `fake` produce at
/// the FQ layer after hidden layer `layer` (median-heuristic bandwidth).
double quantized_feature_mmd(const FqDiscriminator& model, const Tensor& real, const Tensor& fake,
                             std::size_t layer);

/// Same diagnostic on the continuous (pre-quantization) output of hidden
/// layer `layer`. `positions` = 0 uses the layer's FQ layout, or 1 without one.
double hidden_feature_mmd(const FqDiscriminator& model, const Tensor& real, const Tensor& fake,
                          std::size_t layer, std::size_t positions = 0);

/// Output of hidden layer `layer` for `x` as [rows*positions x width/positions]
/// position vectors, taken after quantization when `quantized` is set.
Tensor layer_features(const FqDiscriminator& model, const Tensor& x, std::size_t layer,
                      bool quantized, std::size_t positions = 0);

}  // namespace fqgan

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fqgan/rng.hpp"
#include "fqgan/tensor.hpp"

namespace fqgan {

using Point2 = std::array<double, 2>;

/// Equal-weight mixture of isotropic 2-D Gaussians sharing one std.
struct MixtureSpec {
  std::vector<Point2> means;
  double stddev = 0.0;

  std::size_t modes() const noexcept { return means.size(); }
  /// Throws std::invalid_argument unless there is at least one mean, stddev > 0
  /// and the means are pairwise distinct.
  void validate() const;
};

/// `modes` means equally spaced on a circle, the first at angle 0.
MixtureSpec ring_mixture(std::size_t modes, double radius, double stddev);

/// side*side means on a square lattice centred on the origin.
MixtureSpec grid_mixture(std::size_t side, double spacing, double stddev);

/// n points: a uniformly chosen component plus N(0, stddev^2 I) noise.
/// Draws, per point, rng.index(modes) then two rng.normal() values.
Tensor sample(const MixtureSpec& spec, std::size_t n, Rng& rng);
Tensor sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// Thrown for unreadable or malformed CSV input.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads comma-separated real rows into an [n x expected_dim] tensor.
Tensor load_csv(const std::filesystem::path& path, std::size_t expected_dim,
                bool skip_header = false);

/// Writes rows with 17 significant digits so load_csv reproduces them exactly.
void save_csv(const std::filesystem::path& path, const Tensor& rows);

}  // namespace fqgan

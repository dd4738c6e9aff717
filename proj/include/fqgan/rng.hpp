#pragma once

#include <array>
#include <cstdint>

namespace fqgan {

/// xoshiro256** seeded through splitmix64, with Box-Muller normals.
///
/// The exact stream is part of the file-format contract (docs/rng.md):
///  - seeding: state[i] = splitmix64_next(s) for i = 0..3, where s starts at
///    `seed` and splitmix64_next adds 0x9E3779B97F4A7C15 before mixing;
///  - uniform(): (next_u64() >> 11) * 2^-53, in [0, 1);
///  - index(n): high 64 bits of the 128-bit product next_u64() * n;
///  - normal(): Box-Muller on u1 = 1 - uniform(), u2 = uniform(),
///    returning r*cos(2 pi u2) and caching r*sin(2 pi u2) for the next call.
class Rng {
 public:
  struct State {
    std::array<std::uint64_t, 4> s{};
    bool has_spare = false;
    double spare = 0.0;
    friend bool operator==(const State&, const State&) = default;
  };

  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream derived from (seed, stream id).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  std::uint64_t index(std::uint64_t n) noexcept;
  double normal() noexcept;

  const State& state() const noexcept { return state_; }
  void set_state(const State& state) noexcept { state_ = state; }

 private:
  State state_;
};

std::uint64_t splitmix64_next(std::uint64_t& s) noexcept;

/// Stream ids used by the training code; fixed so runs can share streams.
namespace streams {
inline constexpr std::uint64_t kGeneratorInit = 1;
inline constexpr std::uint64_t kDiscriminatorInit = 2;
inline constexpr std::uint64_t kCodebookInit = 3;
inline constexpr std::uint64_t kData = 4;
inline constexpr std::uint64_t kLatent = 5;
inline constexpr std::uint64_t kEval = 6;
}  // namespace streams

}  // namespace fqgan

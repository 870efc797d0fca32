#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedfim {

/// Identifies one reproducible random stream. Two seeds with different
/// stream ids give statistically independent sequences.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

/// Well-known stream ids. Per-client streams start at kClientBase.
namespace streams {
inline constexpr std::uint64_t kPartition = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kClientSampling = 3;
inline constexpr std::uint64_t kSharing = 4;
inline constexpr std::uint64_t kSynthTruth = 5;
inline constexpr std::uint64_t kSynthTrain = 6;
inline constexpr std::uint64_t kSynthTest = 7;
inline constexpr std::uint64_t kClientBase = 1'000'000;
}  // namespace streams

/// xoshiro256** keyed by (seed, stream_id) through splitmix64. All derived
/// draws (uniform, normal, shuffles) use only integer arithmetic and IEEE
/// basic operations plus std::log, std::sqrt and std::sin/cos, so the sequence does
/// not depend on the standard library's distribution implementations.
class RandomStream {
 public:
  explicit RandomStream(RngSeed seed);

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  double normal() noexcept;

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// [0, n) in random order.
  std::vector<std::size_t> permutation(std::size_t n);
  /// k distinct values from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Convenience factory for RandomStream{RngSeed{seed, stream_id}}.
inline RandomStream seeded_stream(RngSeed seed) { return RandomStream(seed); }

}  // namespace fedfim

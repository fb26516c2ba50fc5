#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace mrphe {

// Identifier written into provenance metadata for every artifact that consumed randomness.
inline constexpr std::string_view kRngAlgorithm = "philox4x32-10/fnv1a64-stream";

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

using PhiloxBlock = std::array<std::uint32_t, 4>;

// Philox4x32 with 10 rounds (Salmon et al., Random123).
PhiloxBlock philox4x32_10(PhiloxBlock counter, std::array<std::uint32_t, 2> key);

// Counter-based stream: output i of stream (seed, stream_id) is a pure function of
// (seed, stream_id, i), so streams never share state and can be evaluated in any order.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  // Stream keyed by the hash of a string identifier, e.g. an image id.
  static RandomStream keyed(std::uint64_t seed, std::string_view id) {
    return RandomStream(seed, fnv1a64(id));
  }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Uniform integer on [0, bound), unbiased. bound must be >= 1.
  std::uint32_t below(std::uint32_t bound);
  // Standard normal via Box-Muller (no cached second value).
  double gaussian();

  // Number of 32-bit words consumed so far.
  std::uint64_t position() const { return position_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  PhiloxBlock buffer_{};
  std::uint64_t buffered_block_ = ~std::uint64_t{0};
};

}  // namespace mrphe

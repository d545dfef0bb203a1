#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

#include "csample/linalg.hpp"

namespace csample {

// Philox4x32-10 counter-based generator. The key is the seed and the upper
// half of the counter is the stream id, so a chain's sequence depends only on
// (seed, stream_id) and never on how many other streams exist.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64();
  // 53-bit uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1), never exactly zero.
  double uniform_open();
  // Ziggurat (128 layers).
  double standard_normal();
  std::size_t uniform_index(std::size_t n);

  // One Philox block for a raw counter/key; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                    std::array<std::uint32_t, 2> key);

private:
  void refill();
  double normal_tail(bool negative);

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int cursor_ = 4;
};

Vector sample_standard_normal(RngStream& rng, std::size_t n);

// mean + L z with z ~ N(0, I). O(n) for diagonal factors.
Vector sample_mvn(RngStream& rng, std::span<const double> mean, const CholeskyFactor& factor);
Vector sample_mvn(RngStream& rng, std::span<const double> mean, const SpdMatrix& cov);

} // namespace csample

namespace csample {

// SplitMix64 finaliser over (seed, tag); used to give each experiment stage
// its own key so stage streams never collide.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

} // namespace csample

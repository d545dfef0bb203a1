#include "csample/rng.hpp"

#include <cmath>

#include "csample/errors.hpp"

namespace csample {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// Ziggurat tables after Marsaglia & Tsang, in the floating-point form
// popularised by Doornik (ZIGNOR).
constexpr int kZigLayers = 128;
constexpr double kZigR = 3.442619855899;
constexpr double kZigV = 9.91256303526217e-3;

struct ZigguratTables {
  double x[kZigLayers + 1];
  double ratio[kZigLayers];

  ZigguratTables() {
    double f = std::exp(-0.5 * kZigR * kZigR);
    x[0] = kZigV / f;
    x[1] = kZigR;
    x[kZigLayers] = 0.0;
    for (int i = 2; i < kZigLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kZigV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kZigLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const ZigguratTables& zig() {
  static const ZigguratTables tables;
  return tables;
}

} // namespace

std::array<std::uint32_t, 4> RngStream::philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                      std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox4x32_10(ctr, key);
  ++block_;
  cursor_ = 0;
}

std::uint64_t RngStream::next_u64() {
  if (cursor_ > 2) refill();
  const std::uint64_t lo = buffer_[cursor_];
  const std::uint64_t hi = buffer_[cursor_ + 1];
  cursor_ += 2;
  return (hi << 32) | lo;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw Error("uniform_index: empty range");
  // Lemire-style rejection to stay unbiased.
  const std::uint64_t range = n;
  const std::uint64_t limit = max() - max() % range;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return static_cast<std::size_t>(v % range);
}

double RngStream::normal_tail(bool negative) {
  double x, y;
  do {
    x = std::log(uniform_open()) / kZigR;
    y = std::log(uniform_open());
  } while (-2.0 * y < x * x);
  return negative ? x - kZigR : kZigR - x;
}

double RngStream::standard_normal() {
  const ZigguratTables& t = zig();
  for (;;) {
    const std::uint64_t bits = next_u64();
    const int i = static_cast<int>(bits & 0x7F);
    const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    if (std::abs(u) < t.ratio[i]) return u * t.x[i];
    if (i == 0) return normal_tail(u < 0.0);
    const double xx = u * t.x[i];
    const double f0 = std::exp(-0.5 * (t.x[i] * t.x[i] - xx * xx));
    const double f1 = std::exp(-0.5 * (t.x[i + 1] * t.x[i + 1] - xx * xx));
    if (f1 + uniform() * (f0 - f1) < 1.0) return xx;
  }
}

Vector sample_standard_normal(RngStream& rng, std::size_t n) {
  Vector z(n);
  for (auto& v : z) v = rng.standard_normal();
  return z;
}

Vector sample_mvn(RngStream& rng, std::span<const double> mean, const CholeskyFactor& factor) {
  if (mean.size() != factor.order()) throw DimensionMismatch("sample_mvn", factor.order(), mean.size());
  const Vector z = sample_standard_normal(rng, mean.size());
  Vector x = factor.lower_multiply(z);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += mean[i];
  return x;
}

Vector sample_mvn(RngStream& rng, std::span<const double> mean, const SpdMatrix& cov) {
  return sample_mvn(rng, mean, cholesky(cov));
}

} // namespace csample

namespace csample {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace csample

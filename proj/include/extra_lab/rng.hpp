#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace extra_lab {

// Philox4x32-10 block function (Salmon et al., Random123).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Random domains keep unrelated draws (dataset, initial points, ...) on
/// disjoint counter ranges even when they share a seed.
enum class RngDomain : std::uint32_t { dataset = 0, init = 1, search = 2 };

/// Counter-based generator. The 64-bit seed is the Philox key; the counter is
/// [block_lo, block_hi, stream, domain]. Substream s of seed k is therefore a
/// pure function of (k, s, domain): no draw order is shared between streams,
/// so streams can be consumed in any order or in parallel.
///
/// Gaussians use the Box-Muller transform on two (0,1) uniforms, returning the
/// cosine branch first and caching the sine branch.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint32_t stream, RngDomain domain = RngDomain::dataset)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        domain_(static_cast<std::uint32_t>(domain)) {}

  std::uint32_t next_u32() {
    if (lane_ == 4) refill();
    return buffer_[lane_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  /// +1 or -1 with equal probability.
  int sign() { return (next_u32() & 1u) ? 1 : -1; }

 private:
  void refill() {
    buffer_ = philox4x32_10({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                             stream_, domain_},
                            key_);
    ++block_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
  std::uint32_t domain_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int lane_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace extra_lab

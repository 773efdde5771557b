#pragma once

// Counter-based random streams. Every (seed, stream id...) tuple names an
// independent sequence, so Monte-Carlo work can be split over runs, players
// and threads without any shared generator state.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace lrmfg {

/// Philox4x32-10 block function (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static constexpr Counter round(Counter c, Key k) noexcept {
    std::uint64_t p0 = std::uint64_t{kMulA} * c[0];
    std::uint64_t p1 = std::uint64_t{kMulB} * c[2];
    auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  static constexpr Counter apply(Counter c, Key k) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k[0] += kWeylA;
        k[1] += kWeylB;
      }
      c = round(c, k);
    }
    return c;
  }
};

/// SplitMix64 finalizer; used to fold stream identifiers into Philox keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// A uniform random bit generator reading one Philox stream.
///
/// The key is derived from the seed, the 4-word counter holds two 32-bit
/// stream ids plus a 64-bit position, so streams with different ids never
/// overlap.
class CounterRng {
public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0) noexcept {
    std::uint64_t key = mix64(seed);
    key_ = {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    std::uint64_t ids = mix64(mix64(stream_a) ^ (stream_b + 0x632BE59BD9B4E019ull));
    ctr_ = {0u, 0u, static_cast<std::uint32_t>(ids), static_cast<std::uint32_t>(ids >> 32)};
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (used_ == 4) refill();
    return block_[used_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    std::uint64_t hi = (*this)();
    std::uint64_t lo = (*this)();
    std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; safe as a log argument.
  double uniform_open0() noexcept { return 1.0 - uniform(); }

  double exponential() noexcept { return -std::log(uniform_open0()); }

private:
  void refill() noexcept {
    block_ = Philox4x32::apply(ctr_, key_);
    used_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  Philox4x32::Key key_{};
  Philox4x32::Counter ctr_{};
  Philox4x32::Counter block_{};
  int used_ = 4;
};

}  // namespace lrmfg

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace llc {

/// Philox4x32-10 counter-based generator. A (seed, stream) pair selects an
/// independent sequence, so sample i of a run can be regenerated without
/// replaying samples 0..i-1 and results do not depend on scheduling.
class Philox {
 public:
  using result_type = std::uint32_t;

  Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)(), lo = (*this)();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  void discard(unsigned long long z) {
    for (; z; --z) (*this)();
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;

  void refill() {
    std::array<std::uint32_t, 4> x = ctr_;
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * x[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * x[2];
      x = {static_cast<std::uint32_t>(p1 >> 32) ^ x[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ x[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += kW0;
      k[1] += kW1;
    }
    buf_ = x;
    pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace llc

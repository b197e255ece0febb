#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace shapeband {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The stream is fully determined by (key, counter prefix), so replicate r of a
/// simulation can be regenerated independently of every other replicate and of
/// the order in which replicates run.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  Philox4x32(std::uint64_t key, std::uint32_t stream_hi, std::uint32_t stream_lo) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        counter_{0, 0, stream_lo, stream_hi} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 4) {
      block_ = generate(counter_, key_);
      if (++counter_[0] == 0) ++counter_[1];
      pos_ = 0;
    }
    return block_[pos_++];
  }

  /// Raw block function: 10 rounds over `ctr` with `key`.
  static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

/// Purposes get disjoint counter spaces so that calibration noise, data noise
/// and bootstrap resampling never share draws for the same seed.
enum class StreamPurpose : std::uint32_t {
  calibration = 1,
  data = 2,
  bootstrap = 3,
  property = 4,
};

inline Philox4x32 substream(std::uint64_t seed, StreamPurpose purpose, std::uint32_t replicate) noexcept {
  return Philox4x32(seed, static_cast<std::uint32_t>(purpose), replicate);
}

}  // namespace shapeband

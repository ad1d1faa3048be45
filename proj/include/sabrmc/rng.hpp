#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace sabrmc {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
/// Maps a 128-bit counter and a 64-bit key to 128 random bits.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  static constexpr int kRounds = 10;

  static constexpr Counter encrypt(Counter ctr, Key key) {
    for (int r = 0; r < kRounds; ++r) {
      if (r > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  /// Encrypts the counters (block + i, stream) for i in [0, Lanes) and
  /// writes two 64-bit words per block. Each 32-bit word is held in a
  /// 64-bit lane so the round multiplies map onto widening vector multiplies.
  template <int Lanes>
  [[gnu::noinline]] static void encrypt_lanes(std::uint64_t block, std::uint64_t stream, Key key,
                                              std::uint64_t* out) {
    constexpr std::uint64_t kLow = 0xFFFFFFFFu;
    alignas(64) std::uint64_t c0[Lanes], c1[Lanes], c2[Lanes], c3[Lanes];
    for (int i = 0; i < Lanes; ++i) {
      const std::uint64_t b = block + static_cast<std::uint64_t>(i);
      c0[i] = b & kLow;
      c1[i] = b >> 32;
      c2[i] = stream & kLow;
      c3[i] = stream >> 32;
    }
    std::uint64_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < kRounds; ++r) {
      for (int i = 0; i < Lanes; ++i) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c0[i];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c2[i];
        const std::uint64_t n0 = (p1 >> 32) ^ c1[i] ^ k0;
        const std::uint64_t n2 = (p0 >> 32) ^ c3[i] ^ k1;
        c1[i] = p1 & kLow;
        c3[i] = p0 & kLow;
        c0[i] = n0;
        c2[i] = n2;
      }
      k0 = (k0 + kWeyl0) & kLow;
      k1 = (k1 + kWeyl1) & kLow;
    }
    for (int i = 0; i < Lanes; ++i) {
      out[2 * i] = (c1[i] << 32) | c0[i];
      out[2 * i + 1] = (c3[i] << 32) | c2[i];
    }
  }

  static constexpr int kBatch = 8;
  static constexpr int kBulkBatch = 32;
};

/// Deterministic random stream identified by (seed, stream_id).
///
/// The seed is the Philox key; the stream id occupies the upper half of the
/// counter and the draw index the lower half, so every (seed, stream_id)
/// pair addresses a disjoint 2^64-block sequence. Path p of a run uses
/// stream_id = p; repetition r of a study uses seed = base_seed + r.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// 64 uniformly distributed bits.
  std::uint64_t next_u64() noexcept {
    if (pos_ == kBuffer) refill();
    return buffer_[pos_++];
  }

  /// Writes the next out.size() words of the stream; identical to calling
  /// next_u64 that many times.
  void fill(std::span<std::uint64_t> out) noexcept {
    std::size_t i = 0;
    while (i < out.size() && pos_ < kBuffer) out[i++] = buffer_[pos_++];
    constexpr std::size_t kBulkWords = 2 * Philox4x32::kBulkBatch;
    const Philox4x32::Key k = key();
    for (; i + kBulkWords <= out.size(); i += kBulkWords) {
      Philox4x32::encrypt_lanes<Philox4x32::kBulkBatch>(block_, stream_id_, k, out.data() + i);
      block_ += Philox4x32::kBulkBatch;
    }
    for (; i < out.size(); ++i) out[i] = next_u64();
  }

  /// Uniform variate on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static constexpr int kBuffer = 2 * Philox4x32::kBatch;

  Philox4x32::Key key() const noexcept {
    return {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  }

  void refill() noexcept {
    Philox4x32::encrypt_lanes<Philox4x32::kBatch>(block_, stream_id_, key(), buffer_.data());
    block_ += Philox4x32::kBatch;
    pos_ = 0;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, kBuffer> buffer_{};
  int pos_ = kBuffer;
};

}  // namespace sabrmc

#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every draw is a pure function of (seed, stream, position), so ensembles can
// assign one stream per trajectory and produce bitwise-identical results for
// any thread count or evaluation order.

#include <array>
#include <cmath>
#include <cstdint>

namespace phasejump {

namespace detail {

struct PhiloxBlock {
    std::array<std::uint32_t, 4> v;
};

// One 10-round Philox4x32 block: bijection on the 128-bit counter keyed by
// the 64-bit key.
inline PhiloxBlock philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                 std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden-ratio increment
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3)-1 increment

    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
        const auto hi0 = std::uint32_t(p0 >> 32);
        const auto lo0 = std::uint32_t(p0);
        const auto hi1 = std::uint32_t(p1 >> 32);
        const auto lo1 = std::uint32_t(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return {ctr};
}

}  // namespace detail

// Stateful convenience wrapper around the Philox block function.
//
// The 128-bit counter is split as (block index, stream id); the key is the
// user seed.  Distinct (seed, stream) pairs give statistically independent
// sequences, and a given pair always reproduces the same sequence.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          stream_(stream) {}

    std::uint64_t seed() const {
        return std::uint64_t(key_[0]) | (std::uint64_t(key_[1]) << 32);
    }
    std::uint64_t stream() const { return stream_; }

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_.v[buf_pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Exponential with mean tau; log1p keeps accuracy for small u.
    double exponential(double tau) { return -tau * std::log1p(-uniform()); }

    // Standard normal via Box-Muller; second deviate is cached.
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        const double r = std::sqrt(-2.0 * std::log1p(-uniform()));
        const double theta = 2.0 * M_PI * uniform();
        cached_normal_ = r * std::sin(theta);
        have_cached_normal_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [0, n); n == 0 returns 0.  Rejection keeps it exact.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = n * ((~std::uint64_t(0)) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

  private:
    void refill() {
        const std::array<std::uint32_t, 4> ctr = {
            std::uint32_t(block_index_), std::uint32_t(block_index_ >> 32),
            std::uint32_t(stream_), std::uint32_t(stream_ >> 32)};
        buf_ = detail::philox4x32_10(ctr, key_);
        ++block_index_;
        buf_pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_ = 0;
    std::uint64_t block_index_ = 0;
    detail::PhiloxBlock buf_{};
    int buf_pos_ = 4;
    double cached_normal_ = 0.0;
    bool have_cached_normal_ = false;
};

}  // namespace phasejump

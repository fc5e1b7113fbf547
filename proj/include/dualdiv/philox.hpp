#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace dualdiv {

/// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
struct Philox4x32 {
    using ctr_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t M0 = 0xD2511F53u;
    static constexpr std::uint32_t M1 = 0xCD9E8D57u;
    static constexpr std::uint32_t W0 = 0x9E3779B9u;
    static constexpr std::uint32_t W1 = 0xBB67AE85u;

    static constexpr ctr_type apply(const ctr_type& ctr, const key_type& key) {
        std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c2;
            c0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            c1 = static_cast<std::uint32_t>(p1);
            c2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            c3 = static_cast<std::uint32_t>(p0);
            k0 += W0;
            k1 += W1;
        }
        return {c0, c1, c2, c3};
    }
};

/// Uniform and normal variates for one (seed, path, stream) triple. The
/// counter is (block, stream, path lo, path hi), so any path can be replayed
/// without touching the others. With `flip` set every uniform u becomes 1 - u
/// and every normal changes sign (the antithetic partner).
class PathRng {
public:
    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// Next raw 32-bit word (UniformRandomBitGenerator interface).
    result_type operator()() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    PathRng(std::uint64_t seed, std::uint64_t path, std::uint32_t stream, bool flip = false)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream),
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)),
          flip_(flip) {}

    /// Open uniform on (0, 1): (k + 0.5) 2^-53.
    double uniform() {
        const double u = raw_uniform();
        return flip_ ? 1.0 - u : u;
    }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    /// Standard normal by the ziggurat method, single-precision mantissa (one
    /// 32-bit word per draw outside the rare wedge and tail cases).
    double normal() {
        const double z = boost::random::normal_distribution<float>()(*this);
        return flip_ ? -z : z;
    }

private:
    double raw_uniform() {
        const std::uint64_t hi = (*this)();
        const std::uint64_t lo = (*this)();
        const std::uint64_t bits = (hi << 21) ^ (lo >> 11);
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    void refill() {
        buf_ = Philox4x32::apply({block_++, stream_, path_lo_, path_hi_}, key_);
        pos_ = 0;
    }

    Philox4x32::key_type key_;
    std::uint32_t stream_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
    bool flip_;
    std::uint32_t block_ = 0;
    Philox4x32::ctr_type buf_{};
    int pos_ = 4;
};

}  // namespace dualdiv

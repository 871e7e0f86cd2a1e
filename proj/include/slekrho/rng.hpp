#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace slekrho::rng {

// Philox4x32-10 (Salmon et al., SC 2011). Counter-based: the stream is a pure
// function of (key, counter), so parallel samplers indexed by path and draw
// reproduce bit-identically for any worker count.
struct Philox4x32 {
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return ctr;
    }
};

inline double u64_to_unit(std::uint64_t x) {
    // 53-bit mantissa in [0,1)
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// One logical Gaussian/uniform stream per (seed, stream, path). Draw index is
// the Philox counter, advanced per block of two normals.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32) ^
                   static_cast<std::uint32_t>(stream) ^
                   static_cast<std::uint32_t>(stream >> 32) * 0x85EBCA6Bu) {}

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto r = next_block();
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        // Box-Muller; u1 in (0,1]
        const double u1 = 1.0 - u64_to_unit(a);
        const double u2 = u64_to_unit(b);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 6.283185307179586476925286766559 * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    double uniform() {
        const auto r = next_block();
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        return u64_to_unit(a);
    }

    std::uint64_t draws() const { return draw_; }

private:
    std::array<std::uint32_t, 4> next_block() {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(draw_),
            static_cast<std::uint32_t>(draw_ >> 32), path_lo_, path_hi_};
        ++draw_;
        return Philox4x32::block(ctr, key_);
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_, path_hi_;
    std::uint64_t draw_ = 0;
    double spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace slekrho::rng

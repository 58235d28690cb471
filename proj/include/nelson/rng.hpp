#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

namespace nelson {

struct RngSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::string algorithm_id = "philox4x32-10";
};

// Philox4x32-10 counter-based generator (Salmon et al. 2011). The 128-bit counter is
// (block index, stream id); the key is the seed. Output depends only on these values.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream) : key_{lo(seed), hi(seed)}, stream_(stream) {}

    std::array<std::uint32_t, 4> block(std::uint64_t index) const {
        std::array<std::uint32_t, 4> c{lo(index), hi(index), lo(stream_), hi(stream_)};
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(0xD2511F53u) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(0xCD9E8D57u) * c[2];
            c = {hi32(p1) ^ c[1] ^ k[0], lo32(p1), hi32(p0) ^ c[3] ^ k[1], lo32(p0)};
            k[0] += 0x9E3779B9u;
            k[1] += 0xBB67AE85u;
        }
        return c;
    }

    // Uniform in (0, 1) with 53 random bits.
    double uniform() {
        if (pos_ == 4) refill();
        const std::uint64_t a = buf_[pos_++] >> 5;
        if (pos_ == 4) refill();
        const std::uint64_t b = buf_[pos_++] >> 6;
        return (static_cast<double>(a * 67108864ull + b) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Standard normal by Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

private:
    static std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
    static std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }
    static std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
    static std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }
    void refill() {
        buf_ = block(counter_++);
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nelson

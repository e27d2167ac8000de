#pragma once

// Seeded substream RNG. Every consumer (path, initial draw, bootstrap
// resample, random test field) derives its own stream from (master_seed,
// purpose, index), so results are bit-identical for a given master seed no
// matter how work is scheduled across threads.

#include <cmath>
#include <cstdint>

namespace skg {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

enum class StreamPurpose : std::uint64_t {
    path = 1,
    initial_draw = 2,
    bootstrap = 3,
    test_field = 4,
};

/// xoshiro256++ generator keyed by (master_seed, purpose, index).
/// Identical keys give bit-identical output sequences.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, StreamPurpose purpose, std::uint64_t index)
        : master_seed_(master_seed), path_index_(index) {
        std::uint64_t key = master_seed;
        key ^= 0x6a09e667f3bcc909ull * (static_cast<std::uint64_t>(purpose) + 1);
        key ^= 0x9e3779b97f4a7c15ull * (index + 0x243f6a8885a308d3ull);
        for (auto& s : state_) s = splitmix64(key);
    }

    RngStream(std::uint64_t master_seed, std::uint64_t path_index)
        : RngStream(master_seed, StreamPurpose::path, path_index) {}

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t path_index() const { return path_index_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; pairs are cached so draws stay cheap
    /// and the sequence depends only on the stream key.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        // Rejection-free would bias; n is tiny against 2^64 so rejection is rare.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t master_seed_;
    std::uint64_t path_index_;
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace skg

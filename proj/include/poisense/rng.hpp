#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace poisense {

/// Deterministic, seedable random stream (xoshiro256++ seeded via splitmix64).
/// Independent child streams are derived by mixing the parent seed with a
/// purpose label, so e.g. data generation and DQN exploration never share
/// a sequence. Identical seed + identical call order gives identical output
/// on every platform; no std::random distributions are involved.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    /// Derive an independent stream for a named purpose.
    RngStream child(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        std::uint64_t s = seed_ ^ (h * 0x9e3779b97f4a7c15ull);
        return RngStream(splitmix64(s));
    }

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

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(next_u64() % n);
    }

    /// Standard normal via Box-Muller (one deviate per call; the second
    /// branch is discarded to keep the call sequence trivially countable).
    double normal() {
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t splitmix64(std::uint64_t& s) {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    std::uint64_t seed_;
};

} // namespace poisense

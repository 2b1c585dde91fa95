#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace shbft {

/// SplitMix64 finalizer. Stable across platforms; used for seeding and
/// for hashing IDs onto butterfly columns.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Reproducible random substream. Streams are keyed by (seed, label) so
/// each purpose (assignment, adversary sampling, R arrays, p_call coin)
/// draws independently of the others.
///
/// Bounded draws use Lemire's method on the raw mt19937_64 output rather
/// than std::uniform_int_distribution, whose algorithm is unspecified and
/// would break byte-identical output across standard libraries.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label)
        : engine_(mix64(seed ^ mix64(fnv1a(label)))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [lo, hi], inclusive.
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);

    /// Uniform index in [0, count). count must be positive.
    std::size_t index(std::size_t count) { return static_cast<std::size_t>(uniform(0, count - 1)); }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return unit() < p;
    }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t seed, std::string_view label) { return RngStream(seed, label); }

} // namespace shbft

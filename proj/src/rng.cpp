#include "shbft/rng.hpp"

#include <limits>

namespace shbft {

std::uint64_t RngStream::uniform(std::uint64_t lo, std::uint64_t hi) {
    if (lo >= hi) return lo;
    const std::uint64_t span = hi - lo;
    if (span == std::numeric_limits<std::uint64_t>::max()) return next();
    const std::uint64_t range = span + 1;
    // Lemire's nearly divisionless rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range) {
        const std::uint64_t threshold = (0 - range) % range;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(next()) * range;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return lo + static_cast<std::uint64_t>(m >> 64);
}

} // namespace shbft

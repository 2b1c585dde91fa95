#include "shbft/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace shbft::oracles {

std::uint32_t iterated_log(double x) {
    if (!(x >= 1.0)) throw std::domain_error("iterated_log needs x >= 1");
    // 2^^0 .. 2^^4; 2^^5 = 2^65536 exceeds every double.
    const double tower[] = {1.0, 2.0, 4.0, 16.0, 65536.0};
    for (std::uint32_t k = 0; k < 5; ++k) {
        if (x <= tower[k]) return k;
    }
    return 5;
}

std::uint32_t iterated_log_pow2(double e) {
    if (e <= 0.0) return 0;
    return 1 + iterated_log(std::max(1.0, e));
}

std::uint32_t run_length_for(std::uint64_t x) {
    if (x <= 2) return 1;
    std::uint32_t bits = 0;
    while ((std::uint64_t{1} << bits) < x) ++bits;
    return bits;
}

std::vector<double> longest_run_curve(std::uint64_t max_x, double p_tail, std::uint32_t run_len) {
    if (run_len == 0) throw std::invalid_argument("run length must be positive");
    if (max_x > (std::uint64_t{1} << 20)) throw std::invalid_argument("x above 2^20");
    // state[k]: probability of no completed run yet and a current tail run of k.
    std::vector<double> state(run_len, 0.0);
    state[0] = 1.0;
    double done = 0.0;
    std::vector<double> curve;
    curve.reserve(max_x);
    for (std::uint64_t i = 0; i < max_x; ++i) {
        std::vector<double> next(run_len, 0.0);
        for (std::uint32_t k = 0; k < run_len; ++k) {
            next[0] += state[k] * (1.0 - p_tail);
            if (k + 1 == run_len) done += state[k] * p_tail;
            else next[k + 1] += state[k] * p_tail;
        }
        state = std::move(next);
        curve.push_back(done);
    }
    return curve;
}

double longest_run_prob(const RunLengthQuery& q) {
    if (q.x == 0) throw std::invalid_argument("x must be at least 1");
    const std::uint32_t len = q.run_len == 0 ? run_length_for(q.x) : q.run_len;
    return longest_run_curve(q.x, q.p_tail, len).back();
}

double longest_run_brute_force(std::uint32_t x, double p_tail, std::uint32_t run_len) {
    if (x > 20) throw std::invalid_argument("brute force limited to x <= 20");
    double total = 0.0;
    for (std::uint64_t outcome = 0; outcome < (std::uint64_t{1} << x); ++outcome) {
        double weight = 1.0;
        std::uint32_t run = 0;
        bool hit = false;
        for (std::uint32_t i = 0; i < x; ++i) {
            const bool tail = (outcome >> i) & 1;
            weight *= tail ? p_tail : 1.0 - p_tail;
            run = tail ? run + 1 : 0;
            hit = hit || run >= run_len;
        }
        if (hit) total += weight;
    }
    return total;
}

double check1_failure_bound(std::uint32_t levels, std::uint64_t n) {
    const double lg = std::log2(static_cast<double>(n));
    return levels / (lg * lg);
}

double check1_failure_exact(std::uint32_t levels, std::uint64_t n, double q, std::uint32_t sub) {
    if (sub == 0) sub = static_cast<std::uint32_t>(std::floor(std::log2(std::log2(static_cast<double>(n)))));
    return 1.0 - std::pow(1.0 - std::pow(q, sub), levels);
}

std::uint64_t corruption_budget(std::uint64_t t, std::uint64_t n, CheckVariant variant) {
    const std::uint64_t factor = variant == CheckVariant::Check1
                                     ? static_cast<std::uint64_t>(std::floor(std::log2(std::log2(static_cast<double>(n)))))
                                     : iterated_log(static_cast<double>(n));
    return 3 * t * factor * factor;
}

} // namespace shbft::oracles

#pragma once

#include "shbft/protocol.hpp"

#include <cstdint>
#include <vector>

namespace shbft::oracles {

/// log* x: the least k with x <= 2^^k (2^^0 = 1). Computed by comparing
/// against the power tower, not by taking logarithms. Throws
/// std::domain_error for x < 1.
std::uint32_t iterated_log(double x);
/// log* of 2^e, for arguments too large for a double.
std::uint32_t iterated_log_pow2(double e);

/// ceil(max(1, log2 x)).
std::uint32_t run_length_for(std::uint64_t x);

struct RunLengthQuery {
    std::uint64_t x{1};
    double p_tail{0.5};
    std::uint32_t run_len{0}; ///< 0 means run_length_for(x)
};

/// Exact probability that x independent tosses contain run_len tails in a
/// row. Dynamic program over the current run length. x <= 2^20.
double longest_run_prob(const RunLengthQuery& q);
/// The same probability for every prefix length 1..max_x in one pass:
/// element i holds the value for x = i + 1.
std::vector<double> longest_run_curve(std::uint64_t max_x, double p_tail, std::uint32_t run_len);
/// Sum over all 2^x outcome strings; x <= 20.
double longest_run_brute_force(std::uint32_t x, double p_tail, std::uint32_t run_len);

/// l / log2(n)^2.
double check1_failure_bound(std::uint32_t levels, std::uint64_t n);
/// 1 - (1 - q^sub)^levels, sub defaulting to floor(log2 log2 n).
double check1_failure_exact(std::uint32_t levels, std::uint64_t n, double q, std::uint32_t sub = 0);

/// 3 t floor(log2 log2 n)^2 for CHECK1, 3 t (log* n)^2 for CHECK2.
std::uint64_t corruption_budget(std::uint64_t t, std::uint64_t n, CheckVariant variant);

} // namespace shbft::oracles

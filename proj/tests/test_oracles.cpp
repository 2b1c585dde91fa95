#include "shbft/oracles.hpp"

#include "doctest.h"

#include <cmath>
#include <stdexcept>

using namespace shbft;
using namespace shbft::oracles;

TEST_CASE("iterated logarithm") {
    CHECK(iterated_log(1) == 0);
    CHECK(iterated_log(2) == 1);
    CHECK(iterated_log(3) == 2);
    CHECK(iterated_log(4) == 2);
    CHECK(iterated_log(16) == 3);
    CHECK(iterated_log(17) == 4);
    CHECK(iterated_log(65536) == 4);
    CHECK(iterated_log(65537) == 5);
    CHECK(iterated_log(1e10) == 5);
    CHECK(iterated_log(14116) == 4);
    CHECK(iterated_log_pow2(65536) == 5);
    CHECK(iterated_log_pow2(65537) == 6);
    CHECK(iterated_log_pow2(16) == 4);
    CHECK_THROWS_AS(iterated_log(0.5), std::domain_error);
    // Agrees with repeated log2 where floating point is exact enough.
    for (double x : {2.0, 5.0, 100.0, 1e5, 1e9}) CHECK(iterated_log(x) == log_star(x));
}

TEST_CASE("run length") {
    CHECK(run_length_for(1) == 1);
    CHECK(run_length_for(2) == 1);
    CHECK(run_length_for(3) == 2);
    CHECK(run_length_for(4) == 2);
    CHECK(run_length_for(5) == 3);
    CHECK(run_length_for(1024) == 10);
    CHECK(run_length_for(1025) == 11);
}

TEST_CASE("longest run probability by dynamic programming") {
    CHECK(longest_run_prob({1, 0.25, 0}) == doctest::Approx(0.25));
    CHECK(longest_run_prob({2, 0.25, 0}) == doctest::Approx(0.4375));
    CHECK(longest_run_prob({3, 0.5, 2}) == doctest::Approx(3.0 / 8));
    CHECK(longest_run_prob({4, 0.5, 2}) == doctest::Approx(0.5));
    CHECK(longest_run_prob({5, 0.5, 3}) == doctest::Approx(0.25));
    CHECK(longest_run_prob({10, 0.0, 1}) == 0.0);
    CHECK(longest_run_prob({10, 1.0, 10}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(longest_run_prob({0, 0.5, 1}), std::invalid_argument);
}

TEST_CASE("dynamic program matches enumeration") {
    for (std::uint32_t x = 1; x <= 14; ++x) {
        for (double p : {0.1, 0.25, 0.5, 0.8}) {
            for (std::uint32_t len = 1; len <= 4; ++len) {
                CHECK(longest_run_prob({x, p, len}) == doctest::Approx(longest_run_brute_force(x, p, len)).epsilon(1e-12));
            }
        }
    }
    CHECK_THROWS_AS(longest_run_brute_force(21, 0.5, 1), std::invalid_argument);
}

TEST_CASE("longest run probability is monotone") {
    const auto curve = longest_run_curve(2000, 0.3, 4);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
    double prev = 0.0;
    for (double p = 0.05; p < 1.0; p += 0.05) {
        const double v = longest_run_prob({100, p, 5});
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(curve[99] == doctest::Approx(longest_run_prob({100, 0.3, 4})));
}

TEST_CASE("CHECK1 failure probability") {
    CHECK(check1_failure_bound(11, 14116) == doctest::Approx(11.0 / std::pow(std::log2(14116.0), 2)));
    CHECK(check1_failure_bound(11, 14116) == doctest::Approx(0.0579).epsilon(1e-3));
    CHECK(check1_failure_exact(11, 14116, 0.25) == doctest::Approx(1 - std::pow(1 - 1.0 / 64, 11)));
    CHECK(check1_failure_exact(11, 14116, 0.25) == doctest::Approx(0.159).epsilon(1e-2));
    CHECK(check1_failure_exact(11, 14116, 0.0) == 0.0);
    CHECK(check1_failure_exact(1, 16, 0.25, 1) == doctest::Approx(0.25));
}

TEST_CASE("corruption budget") {
    CHECK(corruption_budget(220, 14116, CheckVariant::Check1) == 5940);
    CHECK(corruption_budget(0, 14116, CheckVariant::Check1) == 0);
    CHECK(corruption_budget(1, 14116, CheckVariant::Check2) == 48);
    CHECK(corruption_budget(1, 10000000000ULL, CheckVariant::Check2) == 75);
}

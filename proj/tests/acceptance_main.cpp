#include "shbft/acceptance.hpp"

#include <iostream>

int main() {
    shbft::AcceptanceOptions opts;
    opts.log = &std::cerr;
    const auto results = shbft::run_acceptance(opts);
    std::cout << shbft::format_results(results);
    for (const auto& r : results) {
        if (!r.passed) return 1;
    }
    return 0;
}

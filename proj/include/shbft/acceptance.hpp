#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shbft {

struct CriterionResult {
    int id{};
    std::string name;
    bool passed{};
    std::string detail;
};

struct AcceptanceOptions {
    unsigned threads{0};        ///< 0: hardware concurrency
    std::ostream* log{nullptr}; ///< progress lines, if set
};

/// Runs criteria 1-10 and returns one result per criterion, in order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options = {});

/// "PASS  3  corruption budget ...  detail" lines.
std::string format_results(const std::vector<CriterionResult>& results);

} // namespace shbft

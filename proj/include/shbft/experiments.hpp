#pragma once

#include "shbft/sim_engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shbft {

struct ExperimentGrid {
    std::vector<std::uint32_t> ns{14116};
    std::vector<double> fs{1.0 / 16};
    CheckVariant variant{CheckVariant::Check1};
    std::uint64_t sends{100000};
    std::vector<std::uint64_t> seeds{1};
    Strategy strategy{Strategy::AlwaysCorrupt};
    bool force_check{};
    ValidationMode validation{ValidationMode::Report};
    bool self_healing{true};
    bool baseline{true};
    std::size_t window{1000}; ///< sliding-window width for plotted curves
    unsigned threads{0};      ///< 0: hardware concurrency
    std::filesystem::path out; ///< empty: nothing written

    /// Throws ConfigError on empty axes or repeated seeds.
    void validate() const;
};

struct TrialResult {
    SimConfig config;
    bool baseline{};
    Metrics metrics;
    std::string error; ///< non-empty when the trial failed
};

struct GridResult {
    ExperimentGrid grid;
    std::vector<TrialResult> trials; ///< grid order: n, f, seed, then baseline after self-healing
    nlohmann::json summary;
};

/// "1-16" for 1/16, otherwise the decimal value.
std::string fraction_label(double f);

/// Mean over the last quarter of per-SEND message counts.
double final_quartile_mean(const Metrics& m);

/// Trailing-window mean of `values` (window clipped at the start).
std::vector<double> smooth(const std::vector<double>& values, std::size_t window);

/// Runs every trial, in parallel across trials. Failed trials are recorded
/// and the rest of the grid continues. Writes per-trial CSVs, the summary
/// and the figure files when grid.out is set.
GridResult run_grid(const ExperimentGrid& grid);

/// msgs_curve and corruption_curve data files plus an SVG chart per (n, f).
void emit_figures(const GridResult& result, const std::filesystem::path& dir);

/// Minimal line chart; series share the axes.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<std::pair<std::string, std::vector<double>>>& series);

} // namespace shbft

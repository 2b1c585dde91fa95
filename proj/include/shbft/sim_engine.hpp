#pragma once

#include "shbft/adversary.hpp"
#include "shbft/protocol.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace shbft {

struct SimConfig {
    std::uint32_t n{1024};
    double f{0.0}; ///< t = floor(f n)
    CheckVariant variant{CheckVariant::Check1};
    std::uint64_t sends{1000};
    std::uint64_t seed{1};
    Strategy strategy{Strategy::AlwaysCorrupt};
    bool force_check{};
    std::uint32_t h{1}; ///< delivery bound in rounds; every simulated message arrives in the next round
    ValidationMode validation{ValidationMode::Enforce};
    std::uint32_t retries{200};
    bool allow_bad_endpoints{};
    bool apply_updates{true};           ///< false measures detection without ever marking
    bool stop_when_all_bad_marked{};    ///< end the trial once every bad node is marked at once

    std::uint32_t t() const;
    /// Throws ConfigError on an invalid combination.
    void validate() const;
};

struct SendRecord {
    std::uint64_t index{};
    std::uint64_t messages{};
    std::uint64_t rounds{};
    bool corrupted{};
    bool detected{}; ///< CHECK raised at least one alarm
    bool check_ran{};
    std::uint64_t updates_so_far{};
    std::uint64_t marked_bad{};
    std::uint64_t marked_good{};
};

struct Metrics {
    SimConfig config;
    std::uint32_t t{};
    std::uint32_t quorum_size{};
    std::uint32_t levels{};
    std::size_t violating_quorums{};
    std::size_t max_bad_in_quorum{};
    std::uint32_t corruption_attempts{};

    std::vector<SendRecord> sends;
    std::uint64_t total_messages{};
    std::uint64_t total_rounds{};
    std::uint64_t corruptions{};
    std::uint64_t checks{};
    std::uint64_t detections{};            ///< sends whose CHECK raised an alarm
    std::uint64_t corrupted_detected{};    ///< corrupted sends whose CHECK raised an alarm
    std::uint64_t corrupted_checked{};     ///< corrupted sends on which CHECK ran
    std::uint64_t updates{};               ///< accepted UPDATEs
    std::uint64_t rejected_updates{};
    std::uint64_t rejected_on_corrupted{};  ///< UPDATEs after a corrupted SEND that found no markable pair
    std::uint64_t marks{};
    std::uint64_t unmarks{};
    std::uint64_t max_rounds_per_send{};

    std::vector<double> update_deltas;      ///< change of b - g/3 across each accepted UPDATE
    std::uint64_t conflict_pairs{};
    std::uint64_t pairs_without_bad{};
    std::uint64_t accepted_without_pairs{};
    std::uint64_t bar_violations{};         ///< CHECK2 subquorum/receiver monotonicity failures
    std::uint64_t all_bad_marked_at{};      ///< 1-based send index, 0 if never
    std::uint64_t updates_before_all_marked{};
    std::uint64_t final_marked_bad{};
    std::uint64_t final_marked_good{};

    double mean_messages() const;
    double mean_rounds() const;
    /// Per-SEND rows; identical across reruns of the same config.
    std::string to_csv() const;
    nlohmann::json summary() const;
};

/// Serialized SENDs between uniform (s, r) pairs of good nodes.
Metrics run_trial(const SimConfig& config);
/// Same schedule, every SEND routed with naive_send.
Metrics run_baseline_trial(const SimConfig& config);

} // namespace shbft

#pragma once

#include "shbft/behavior.hpp"
#include "shbft/membership.hpp"
#include "shbft/quorum_graph.hpp"
#include "shbft/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shbft {

enum class Strategy : std::uint8_t { AlwaysCorrupt, Silent, IntervalMaintainer, FaithfulControl };

std::string to_string(Strategy strategy);
/// Accepts always-corrupt, silent, interval, faithful. Throws ConfigError.
Strategy parse_strategy(std::string_view name);

/// Enforce resamples until every quorum holds at most floor(|Q|/8) bad
/// nodes; Report keeps the first sample and only counts violations.
enum class ValidationMode : std::uint8_t { Enforce, Report };

class SetupError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Corruption {
    std::vector<NodeId> bad; ///< sorted
    std::uint32_t attempts{};
    std::size_t violating_quorums{}; ///< quorums above floor(|Q|/8) bad members
    std::size_t max_bad_in_quorum{};
};

/// Samples t = |bad| nodes uniformly without replacement. t must be at
/// most n/8. In Enforce mode, throws SetupError once `retries` samples
/// all violate the per-quorum bound.
Corruption corrupt_nodes(const QuorumGraph& graph, std::uint32_t t, std::uint64_t seed,
                         ValidationMode mode = ValidationMode::Enforce, std::uint32_t retries = 200);

/// Read-only view of who is bad. Protocol code never sees it.
class GroundTruth {
public:
    GroundTruth(std::uint32_t n, std::span<const NodeId> bad);

    bool is_bad(NodeId x) const { return bad_[x.value] != 0; }
    std::size_t bad_count() const { return bad_count_; }
    std::size_t marked_bad(const MarkTable& marks) const;
    std::size_t marked_good(const MarkTable& marks) const;
    /// b - g/3 over the current marks.
    double potential(const MarkTable& marks) const;

private:
    std::vector<std::uint8_t> bad_;
    std::size_t bad_count_{};
};

/// Behavior of all nodes: good nodes comply, bad nodes follow the strategy.
///
/// AlwaysCorrupt corrupts every message it relays and otherwise follows the
/// protocol (it signs shares honestly). Silent sends nothing and withholds
/// shares. IntervalMaintainer corrupts like AlwaysCorrupt but, during
/// CHECK2, keeps m' from reaching Q_l while never leaving a good node able
/// to notice. FaithfulControl behaves. No bad node ever raises an alarm.
class Adversary final : public Behavior {
public:
    Adversary(const QuorumGraph& graph, const GroundTruth& truth, Strategy strategy);

    Strategy strategy() const { return strategy_; }
    void begin_send(std::uint64_t send_index) override;
    Action decide(NodeId node, const DutyContext& ctx) override;
    void observe_check2_round(const Check2View& view) override;

    /// Did a bad node deviate during SEND-PATH of the given send?
    bool was_corrupted(std::uint64_t send_index) const;
    /// Level from which IntervalMaintainer's nodes stop forwarding in the
    /// current CHECK2 round; nullopt when they comply.
    std::optional<std::uint32_t> stop_level() const { return stop_level_; }

private:
    Action always_corrupt(const DutyContext& ctx) const;
    Action interval(const DutyContext& ctx) const;

    const QuorumGraph* graph_;
    const GroundTruth* truth_;
    Strategy strategy_;
    std::uint64_t send_index_{};
    bool path_touched_{};
    std::vector<std::uint8_t> touched_;
    std::optional<std::uint32_t> stop_level_;
};

} // namespace shbft

#include "shbft/adversary.hpp"

#include "shbft/rng.hpp"

#include <algorithm>
#include <numeric>

namespace shbft {

std::string to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::AlwaysCorrupt: return "always-corrupt";
    case Strategy::Silent: return "silent";
    case Strategy::IntervalMaintainer: return "interval";
    case Strategy::FaithfulControl: return "faithful";
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : {Strategy::AlwaysCorrupt, Strategy::Silent, Strategy::IntervalMaintainer,
                       Strategy::FaithfulControl}) {
        if (name == to_string(s)) return s;
    }
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

namespace {

void count_violations(const QuorumGraph& graph, const std::vector<std::uint8_t>& is_bad, Corruption& out) {
    out.violating_quorums = 0;
    out.max_bad_in_quorum = 0;
    for (std::size_t i = 0; i < graph.quorum_count(); ++i) {
        const auto members = graph.members(graph.quorum_at(i));
        std::size_t bad = 0;
        for (NodeId x : members) bad += is_bad[x.value];
        out.max_bad_in_quorum = std::max(out.max_bad_in_quorum, bad);
        if (bad > members.size() / 8) ++out.violating_quorums;
    }
}

} // namespace

Corruption corrupt_nodes(const QuorumGraph& graph, std::uint32_t t, std::uint64_t seed, ValidationMode mode,
                         std::uint32_t retries) {
    const std::uint32_t n = graph.node_count();
    if (std::uint64_t{t} * 8 > n) {
        throw ConfigError("t = " + std::to_string(t) + " exceeds n/8 for n = " + std::to_string(n));
    }
    Corruption out;
    std::vector<std::uint32_t> order(n);
    std::vector<std::uint8_t> is_bad(n);
    const std::uint32_t attempts = mode == ValidationMode::Enforce ? std::max<std::uint32_t>(1, retries) : 1;
    for (std::uint32_t attempt = 0; attempt < attempts; ++attempt) {
        RngStream rng(mix64(seed) + attempt, "corrupt");
        std::iota(order.begin(), order.end(), 0u);
        // Partial Fisher-Yates: the first t slots are a uniform sample.
        for (std::uint32_t i = 0; i < t; ++i) std::swap(order[i], order[i + rng.index(n - i)]);
        std::fill(is_bad.begin(), is_bad.end(), 0);
        out.bad.clear();
        for (std::uint32_t i = 0; i < t; ++i) {
            is_bad[order[i]] = 1;
            out.bad.push_back(NodeId{order[i]});
        }
        std::sort(out.bad.begin(), out.bad.end());
        out.attempts = attempt + 1;
        count_violations(graph, is_bad, out);
        if (out.violating_quorums == 0 || mode == ValidationMode::Report) return out;
    }
    throw SetupError("no corruption set within " + std::to_string(attempts) + " samples keeps every quorum at most 1/8 bad (t = " +
                     std::to_string(t) + ", last sample: " + std::to_string(out.violating_quorums) +
                     " violating quorums, worst " + std::to_string(out.max_bad_in_quorum) + " bad)");
}

GroundTruth::GroundTruth(std::uint32_t n, std::span<const NodeId> bad) : bad_(n, 0) {
    for (NodeId x : bad) {
        if (x.value >= n) throw ConfigError("bad node out of range");
        if (!bad_[x.value]) ++bad_count_;
        bad_[x.value] = 1;
    }
}

std::size_t GroundTruth::marked_bad(const MarkTable& marks) const {
    std::size_t count = 0;
    for (NodeId x : marks.marked_nodes()) count += bad_[x.value];
    return count;
}

std::size_t GroundTruth::marked_good(const MarkTable& marks) const { return marks.total_marked() - marked_bad(marks); }

double GroundTruth::potential(const MarkTable& marks) const {
    const auto b = static_cast<double>(marked_bad(marks));
    const auto g = static_cast<double>(marks.total_marked()) - b;
    return b - g / 3.0;
}

Adversary::Adversary(const QuorumGraph& graph, const GroundTruth& truth, Strategy strategy)
    : graph_(&graph), truth_(&truth), strategy_(strategy) {}

void Adversary::begin_send(std::uint64_t send_index) {
    send_index_ = send_index;
    path_touched_ = false;
    stop_level_.reset();
    if (touched_.size() <= send_index) touched_.resize(send_index + 1, 0);
}

bool Adversary::was_corrupted(std::uint64_t send_index) const {
    return send_index < touched_.size() && touched_[send_index] != 0;
}

Action Adversary::always_corrupt(const DutyContext& ctx) const {
    switch (ctx.duty) {
    case Duty::ShareSign: return Action::Comply;
    case Duty::RaiseAlarm: return Action::Drop;
    default: return Action::Corrupt;
    }
}

Action Adversary::interval(const DutyContext& ctx) const {
    if (ctx.phase != Phase::Check2) return always_corrupt(ctx);
    switch (ctx.duty) {
    case Duty::ShareSign: return Action::Comply;
    case Duty::RaiseAlarm: return Action::Drop;
    case Duty::ProbeForward:
    case Duty::ProbeRelay:
    case Duty::Broadcast:
        if (!path_touched_ || !stop_level_ || ctx.level < *stop_level_) return Action::Comply;
        return Action::Drop;
    default: return Action::Comply;
    }
}

Action Adversary::decide(NodeId node, const DutyContext& ctx) {
    if (!truth_->is_bad(node)) return Action::Comply;
    Action act = Action::Comply;
    switch (strategy_) {
    case Strategy::FaithfulControl: act = Action::Comply; break;
    case Strategy::Silent: act = Action::Drop; break;
    case Strategy::AlwaysCorrupt: act = always_corrupt(ctx); break;
    case Strategy::IntervalMaintainer: act = interval(ctx); break;
    }
    if (ctx.phase == Phase::SendPath && act != Action::Comply && ctx.duty != Duty::RaiseAlarm) {
        if (send_index_ < touched_.size()) touched_[send_index_] = 1;
        // Only these reach r unfiltered; a corrupted copy to r alone is outvoted.
        if (ctx.duty == Duty::PathRelay || ctx.duty == Duty::Broadcast) path_touched_ = true;
    }
    return act;
}

void Adversary::observe_check2_round(const Check2View& view) {
    stop_level_.reset();
    if (strategy_ != Strategy::IntervalMaintainer || !path_touched_) return;
    const std::uint32_t l = view.levels;
    auto good = [&](NodeId x) { return !truth_->is_bad(x); };

    // Highest level already holding an informed good node: m' must keep
    // reaching it, or that node would notice the gap.
    std::uint32_t informed_good = 0;
    for (std::uint32_t j = 1; j <= l; ++j) {
        for (const auto& mem : view.subquorums[j - 1]) {
            if (mem.informed && good(mem.node)) informed_good = j;
        }
    }
    // An old, never-informed good node that now receives m' would flag it as late.
    auto late_risk = [&](std::uint32_t j) {
        if (j < 2) return false;
        for (const auto& mem : view.subquorums[j - 1]) {
            if (good(mem.node) && mem.scheduled_before && !mem.informed) return true;
        }
        return false;
    };

    std::uint32_t last_stop = l + 1;
    for (std::uint32_t j = 2; j <= l; ++j) {
        if (late_risk(j)) {
            last_stop = j;
            break;
        }
    }
    for (std::uint32_t k = std::max<std::uint32_t>(2, informed_good + 1); k <= last_stop; ++k) {
        if (k <= l) {
            if (good(view.selected[k - 1])) continue;
        } else {
            const auto& last = view.subquorums[l - 1];
            if (!std::all_of(last.begin(), last.end(), [&](const auto& mem) { return !good(mem.node); })) continue;
        }
        stop_level_ = k;
        return;
    }
}

} // namespace shbft

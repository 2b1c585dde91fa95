#include "shbft/membership.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace shbft {

MarkTable::MarkTable(const QuorumGraph& graph)
    : graph_(&graph), marked_(graph.node_count(), 0), marked_in_(graph.quorum_count(), 0) {}

void MarkTable::set_mark(NodeId x, bool marked) {
    if (is_marked(x) == marked) return;
    marked_[x.value] = marked ? 1 : 0;
    for (QuorumId q : graph_->quorums_of(x)) {
        auto& count = marked_in_[graph_->index_of(q)];
        count = marked ? count + 1 : count - 1;
    }
    total_marked_ = marked ? total_marked_ + 1 : total_marked_ - 1;
}

std::vector<NodeId> MarkTable::unmarked_set(QuorumId q) const {
    std::vector<NodeId> out;
    for (NodeId x : graph_->members(q)) {
        if (!is_marked(x)) out.push_back(x);
    }
    return out;
}

NodeId MarkTable::unmarked_at(QuorumId q, std::size_t index) const {
    for (NodeId x : graph_->members(q)) {
        if (is_marked(x)) continue;
        if (index-- == 0) return x;
    }
    throw LookupError("index past the unmarked set of " + to_string(q));
}

std::vector<NodeId> MarkTable::marked_members(QuorumId q) const {
    std::vector<NodeId> out;
    for (NodeId x : graph_->members(q)) {
        if (is_marked(x)) out.push_back(x);
    }
    return out;
}

std::vector<NodeId> MarkTable::marked_nodes() const {
    std::vector<NodeId> out;
    for (std::uint32_t i = 0; i < marked_.size(); ++i) {
        if (marked_[i]) out.push_back(NodeId{i});
    }
    return out;
}

std::uint64_t MarkTable::fan_out_to_neighbors(QuorumId q) const {
    std::uint64_t messages = 0;
    const auto size = graph_->members(q).size();
    for (QuorumId nb : graph_->neighbors(q)) messages += size * graph_->members(nb).size();
    return messages;
}

MarkReport MarkTable::record_conflicts(std::span<const ConflictPair> pairs) {
    MarkReport report;
    if (pairs.empty()) return report;

    std::vector<QuorumId> touched;
    for (const auto& pair : pairs) {
        const auto size_u = graph_->members(pair.quorum_u).size();
        const auto size_v = graph_->members(pair.quorum_v).size();

        // v announces the conflict inside Q_v, whose members relay it to Q_v and Q_u.
        report.cost.messages += size_v;
        report.cost.messages += size_v * (pair.quorum_u == pair.quorum_v ? size_v : size_v + size_u);

        std::set<QuorumId> notified;
        auto spread = [&](NodeId x, QuorumId home) {
            const auto home_size = graph_->members(home).size();
            for (QuorumId q : graph_->quorums_of(x)) {
                if (q != home) report.cost.messages += home_size * graph_->members(q).size();
                notified.insert(q);
            }
            notified.insert(home);
        };
        spread(pair.u, pair.quorum_u);
        spread(pair.v, pair.quorum_v);
        for (QuorumId q : notified) {
            report.cost.messages += fan_out_to_neighbors(q);
            report.quorums_notified.push_back(q);
        }

        for (NodeId x : {pair.u, pair.v}) {
            if (!is_marked(x)) {
                set_mark(x, true);
                report.newly_marked.push_back(x);
                for (QuorumId q : graph_->quorums_of(x)) touched.push_back(q);
            }
        }
    }
    report.cost.rounds += 4;
    unmark_pass(std::move(touched), report);
    return report;
}

MarkReport MarkTable::process_unmark_threshold() {
    MarkReport report;
    std::vector<QuorumId> all;
    all.reserve(graph_->quorum_count());
    for (std::size_t i = 0; i < graph_->quorum_count(); ++i) all.push_back(graph_->quorum_at(i));
    unmark_pass(std::move(all), report);
    return report;
}

void MarkTable::unmark_pass(std::vector<QuorumId> candidates, MarkReport& report) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Unmarking only lowers counts, so one sweep reaches the fixpoint.
    bool any = false;
    for (QuorumId q : candidates) {
        const auto size = graph_->members(q).size();
        if (marked_count(q) < unmark_threshold(size)) continue;
        any = true;
        const auto released = marked_members(q);
        std::set<QuorumId> affected{q};
        for (NodeId x : released) {
            for (QuorumId other : graph_->quorums_of(x)) affected.insert(other);
        }
        for (QuorumId other : affected) {
            if (other != q) report.cost.messages += size * graph_->members(other).size();
            report.cost.messages += fan_out_to_neighbors(other);
        }
        for (NodeId x : released) {
            set_mark(x, false);
            report.unmarked.push_back(x);
        }
        report.quorums_reset.push_back(q);
    }
    if (any) report.cost.rounds += 2;
}

std::string MarkTable::snapshot() const {
    std::ostringstream out;
    out << "marked " << total_marked_;
    for (std::uint32_t i = 0; i < marked_.size(); ++i) {
        if (marked_[i]) out << ' ' << i;
    }
    return out.str();
}

} // namespace shbft

#pragma once

#include "shbft/quorum_graph.hpp"
#include "shbft/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace shbft {

/// Two nodes whose UPDATE-time reports disagree about a transmission that
/// u was scheduled to make to v.
struct ConflictPair {
    NodeId u;
    NodeId v;
    QuorumId quorum_u; ///< quorum u acted in on the path
    QuorumId quorum_v;
    std::string evidence;
};

struct MarkReport {
    std::vector<NodeId> newly_marked;
    std::vector<NodeId> unmarked;
    std::vector<QuorumId> quorums_notified;
    std::vector<QuorumId> quorums_reset;
    Cost cost;
};

/// Authoritative mark state for one trial.
///
/// Marks are stored per node. Because a mark is applied in every quorum
/// the node belongs to, the per-quorum view is derived from it and is
/// consistent by construction. The table is mutated only between SENDs,
/// so a single copy stands in for every good node's local view.
class MarkTable {
public:
    explicit MarkTable(const QuorumGraph& graph);

    /// ceil(|Q|/2): this many marked members resets a quorum.
    static std::size_t unmark_threshold(std::size_t quorum_size) { return (quorum_size + 1) / 2; }

    bool is_marked(NodeId x) const { return marked_[x.value] != 0; }
    std::size_t marked_count(QuorumId q) const { return marked_in_[graph_->index_of(q)]; }
    std::size_t unmarked_count(QuorumId q) const { return graph_->members(q).size() - marked_count(q); }
    std::size_t total_marked() const { return total_marked_; }

    /// U_q: unmarked members sorted ascending by ID.
    std::vector<NodeId> unmarked_set(QuorumId q) const;
    /// U_q[index] without materializing the set.
    NodeId unmarked_at(QuorumId q, std::size_t index) const;
    std::vector<NodeId> marked_members(QuorumId q) const;
    std::vector<NodeId> marked_nodes() const;

    /// Marks u and v of every pair in all their quorums, notifies the
    /// neighboring quorums, then runs the unmark pass. Metered messages
    /// follow the conflict fan-out: v to Q_v, Q_v to Q_v and Q_u, Q_u/Q_v to
    /// every other quorum of u/v, and each of those quorums to its
    /// neighbors.
    MarkReport record_conflicts(std::span<const ConflictPair> pairs);

    /// Resets every quorum holding at least unmark_threshold() marked
    /// members; their marked members become unmarked everywhere.
    MarkReport process_unmark_threshold();

    /// One line: "marked <count> <id> <id> ...".
    std::string snapshot() const;

    const QuorumGraph& graph() const { return *graph_; }

private:
    void set_mark(NodeId x, bool marked);
    std::uint64_t fan_out_to_neighbors(QuorumId q) const;
    void unmark_pass(std::vector<QuorumId> candidates, MarkReport& report);

    const QuorumGraph* graph_;
    std::vector<std::uint8_t> marked_;
    std::vector<std::uint32_t> marked_in_;
    std::size_t total_marked_{};
};

} // namespace shbft

#pragma once

#include "shbft/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace shbft {

/// Canonical sequence of quorums Q_1 ... Q_l a message travels through.
struct QuorumPath {
    std::vector<QuorumId> quorums;

    std::size_t length() const { return quorums.size(); }
    QuorumId operator[](std::size_t i) const { return quorums[i]; }
    QuorumId front() const { return quorums.front(); }
    QuorumId back() const { return quorums.back(); }
    friend bool operator==(const QuorumPath&, const QuorumPath&) = default;
};

/// Static butterfly of quorums.
///
/// Level i (1-based) holds `columns()` quorums. Quorum (i, c) is wired to
/// (i+1, c) and to (i+1, c ^ (2^(i-1) & (columns-1))); the cross edge
/// disappears once the bit falls outside the column width. There are no
/// intra-level or wraparound edges.
///
/// Each level draws its members independently: nodes are ordered by how
/// many quorums they already belong to, ties broken by a seeded shuffle,
/// and the first columns*quorum_size of them are dealt round-robin into
/// the level's quorums. Every node therefore sits in at most one quorum
/// per level and, whenever the total slot count allows, in at least one
/// quorum overall.
///
/// Immutable after construction.
class QuorumGraph {
public:
    /// Throws ConfigError for n < 16.
    static QuorumGraph build_butterfly(std::uint32_t n, std::uint64_t seed);

    /// Explicit topology, used for small hand-built fixtures. `members`
    /// lists quorums in dense index order (level-major); all quorums must
    /// share one size. Throws ConfigError on malformed input.
    static QuorumGraph from_quorums(std::uint32_t n, std::uint32_t levels, std::uint32_t columns,
                                    std::vector<std::vector<NodeId>> members);

    static std::uint32_t levels_for(std::uint32_t n);
    static std::uint32_t quorum_size_for(std::uint32_t n);

    std::uint32_t node_count() const { return node_count_; }
    std::uint32_t quorum_size() const { return quorum_size_; }
    std::uint32_t levels() const { return levels_; }
    std::uint32_t columns() const { return columns_; }
    std::size_t quorum_count() const { return std::size_t{levels_} * columns_; }

    bool contains(QuorumId q) const;
    bool contains(NodeId x) const { return x.value < node_count_; }

    /// Dense index in [0, quorum_count()).
    std::size_t index_of(QuorumId q) const;
    QuorumId quorum_at(std::size_t index) const;

    /// Members of q sorted ascending by ID.
    std::span<const NodeId> members(QuorumId q) const;
    bool is_member(NodeId x, QuorumId q) const;

    std::span<const QuorumId> quorums_of(NodeId x) const;
    std::vector<QuorumId> neighbors(QuorumId q) const;
    bool are_neighbors(QuorumId a, QuorumId b) const;

    /// Deterministic path from a level-1 quorum picked by s's ID to the
    /// last-level quorum picked by r's ID.
    QuorumPath quorum_path(NodeId s, NodeId r) const;

    /// Column a node's ID hashes to.
    std::uint32_t column_of(NodeId x) const;

    /// Line-oriented diagnostics report.
    std::string summary() const;

private:
    QuorumGraph() = default;
    std::uint32_t cross_mask(std::uint32_t level) const;
    void check(QuorumId q) const;
    void check(NodeId x) const;

    std::uint32_t node_count_{};
    std::uint32_t quorum_size_{};
    std::uint32_t levels_{};
    std::uint32_t columns_{};
    std::vector<std::vector<NodeId>> members_;
    std::vector<std::vector<QuorumId>> memberships_;
};

} // namespace shbft

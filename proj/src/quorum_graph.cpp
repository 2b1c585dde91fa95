#include "shbft/quorum_graph.hpp"

#include "shbft/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

namespace shbft {

std::string to_string(NodeId id) { return "n" + std::to_string(id.value); }

std::string to_string(QuorumId id) {
    return "Q(" + std::to_string(id.level) + "," + std::to_string(id.column) + ")";
}

std::uint32_t QuorumGraph::levels_for(std::uint32_t n) {
    if (n < 16) throw ConfigError("butterfly needs at least 16 nodes, got " + std::to_string(n));
    return static_cast<std::uint32_t>(std::bit_width(n) - 1) - 2;
}

std::uint32_t QuorumGraph::quorum_size_for(std::uint32_t n) {
    if (n < 16) throw ConfigError("butterfly needs at least 16 nodes, got " + std::to_string(n));
    return static_cast<std::uint32_t>(std::floor(4.0 * std::log2(static_cast<double>(n))));
}

QuorumGraph QuorumGraph::build_butterfly(std::uint32_t n, std::uint64_t seed) {
    QuorumGraph g;
    g.node_count_ = n;
    g.levels_ = levels_for(n);
    g.quorum_size_ = std::min(quorum_size_for(n), n);
    g.columns_ = std::bit_floor(std::max<std::uint32_t>(1, n / g.quorum_size_));

    g.members_.resize(g.quorum_count());
    g.memberships_.resize(n);

    RngStream rng = rng_stream(seed, "assignment");
    std::vector<std::uint32_t> order(n);
    std::vector<std::uint64_t> tiebreak(n);
    const std::size_t slots = std::size_t{g.columns_} * g.quorum_size_;

    for (std::uint32_t level = 1; level <= g.levels_; ++level) {
        std::iota(order.begin(), order.end(), 0u);
        for (auto& t : tiebreak) t = rng.next();
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const auto ca = g.memberships_[a].size();
            const auto cb = g.memberships_[b].size();
            if (ca != cb) return ca < cb;
            if (tiebreak[a] != tiebreak[b]) return tiebreak[a] < tiebreak[b];
            return a < b;
        });
        std::span<std::uint32_t> chosen(order.data(), slots);
        rng.shuffle(chosen);
        for (std::size_t k = 0; k < slots; ++k) {
            const QuorumId q{level, static_cast<std::uint32_t>(k % g.columns_)};
            const NodeId x{chosen[k]};
            g.members_[g.index_of(q)].push_back(x);
            g.memberships_[x.value].push_back(q);
        }
    }
    for (auto& m : g.members_) std::sort(m.begin(), m.end());
    return g;
}

QuorumGraph QuorumGraph::from_quorums(std::uint32_t n, std::uint32_t levels, std::uint32_t columns,
                                      std::vector<std::vector<NodeId>> members) {
    if (levels == 0 || columns == 0 || !std::has_single_bit(columns)) {
        throw ConfigError("levels must be positive and columns a power of two");
    }
    if (members.size() != std::size_t{levels} * columns) throw ConfigError("quorum list does not match dimensions");
    QuorumGraph g;
    g.node_count_ = n;
    g.levels_ = levels;
    g.columns_ = columns;
    g.quorum_size_ = static_cast<std::uint32_t>(members.front().size());
    g.memberships_.resize(n);
    for (std::size_t i = 0; i < members.size(); ++i) {
        auto& m = members[i];
        std::sort(m.begin(), m.end());
        if (m.size() != g.quorum_size_ || std::adjacent_find(m.begin(), m.end()) != m.end()) {
            throw ConfigError("quorums must have equal size and distinct members");
        }
        for (NodeId x : m) {
            if (x.value >= n) throw ConfigError("member id out of range");
            g.memberships_[x.value].push_back(g.quorum_at(i));
        }
    }
    g.members_ = std::move(members);
    return g;
}

bool QuorumGraph::contains(QuorumId q) const {
    return q.level >= 1 && q.level <= levels_ && q.column < columns_;
}

void QuorumGraph::check(QuorumId q) const {
    if (!contains(q)) throw LookupError("unknown quorum " + to_string(q));
}

void QuorumGraph::check(NodeId x) const {
    if (!contains(x)) throw LookupError("unknown node " + to_string(x));
}

std::size_t QuorumGraph::index_of(QuorumId q) const {
    check(q);
    return std::size_t{q.level - 1} * columns_ + q.column;
}

QuorumId QuorumGraph::quorum_at(std::size_t index) const {
    if (index >= quorum_count()) throw LookupError("quorum index out of range");
    return QuorumId{static_cast<std::uint32_t>(index / columns_) + 1,
                    static_cast<std::uint32_t>(index % columns_)};
}

std::span<const NodeId> QuorumGraph::members(QuorumId q) const { return members_[index_of(q)]; }

bool QuorumGraph::is_member(NodeId x, QuorumId q) const {
    const auto m = members(q);
    return std::binary_search(m.begin(), m.end(), x);
}

std::span<const QuorumId> QuorumGraph::quorums_of(NodeId x) const {
    check(x);
    return memberships_[x.value];
}

std::uint32_t QuorumGraph::cross_mask(std::uint32_t level) const {
    if (level - 1 >= 32) return 0;
    return (1u << (level - 1)) & (columns_ - 1);
}

std::vector<QuorumId> QuorumGraph::neighbors(QuorumId q) const {
    check(q);
    std::vector<QuorumId> out;
    if (q.level > 1) {
        out.push_back({q.level - 1, q.column});
        if (const auto mask = cross_mask(q.level - 1)) out.push_back({q.level - 1, q.column ^ mask});
    }
    if (q.level < levels_) {
        out.push_back({q.level + 1, q.column});
        if (const auto mask = cross_mask(q.level)) out.push_back({q.level + 1, q.column ^ mask});
    }
    return out;
}

bool QuorumGraph::are_neighbors(QuorumId a, QuorumId b) const {
    const auto nb = neighbors(a);
    return std::find(nb.begin(), nb.end(), b) != nb.end();
}

std::uint32_t QuorumGraph::column_of(NodeId x) const {
    check(x);
    return static_cast<std::uint32_t>(mix64(x.value) % columns_);
}

QuorumPath QuorumGraph::quorum_path(NodeId s, NodeId r) const {
    std::uint32_t column = column_of(s);
    const std::uint32_t target = column_of(r);
    QuorumPath path;
    path.quorums.reserve(levels_);
    for (std::uint32_t level = 1; level <= levels_; ++level) {
        path.quorums.push_back({level, column});
        if (level < levels_) {
            const auto mask = cross_mask(level);
            if ((column ^ target) & mask) column ^= mask;
        }
    }
    return path;
}

std::string QuorumGraph::summary() const {
    std::ostringstream out;
    out << "nodes " << node_count_ << '\n';
    out << "quorum_size " << quorum_size_ << '\n';
    out << "levels " << levels_ << '\n';
    out << "columns " << columns_ << '\n';
    out << "quorums " << quorum_count() << '\n';
    std::size_t max_memberships = 0;
    std::size_t uncovered = 0;
    for (const auto& m : memberships_) {
        max_memberships = std::max(max_memberships, m.size());
        uncovered += m.empty() ? 1 : 0;
    }
    out << "max_memberships " << max_memberships << '\n';
    out << "uncovered_nodes " << uncovered << '\n';
    for (std::uint32_t level = 1; level <= levels_; ++level) {
        std::size_t total = 0;
        for (std::uint32_t c = 0; c < columns_; ++c) total += members({level, c}).size();
        out << "level " << level << " quorums " << columns_ << " slots " << total << '\n';
    }
    return out.str();
}

} // namespace shbft

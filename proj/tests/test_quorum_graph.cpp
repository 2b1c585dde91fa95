#include "shbft/quorum_graph.hpp"

#include "doctest.h"

#include <algorithm>
#include <set>

using namespace shbft;

TEST_CASE("butterfly dimensions follow n") {
    CHECK(QuorumGraph::levels_for(14116) == 11);
    CHECK(QuorumGraph::quorum_size_for(14116) == 55);
    CHECK(QuorumGraph::levels_for(30509) == 12);
    CHECK(QuorumGraph::quorum_size_for(30509) == 59);
    CHECK(QuorumGraph::levels_for(1024) == 8);
    CHECK(QuorumGraph::quorum_size_for(1024) == 40);
    CHECK_THROWS_AS(QuorumGraph::levels_for(15), ConfigError);

    const auto g = QuorumGraph::build_butterfly(14116, 1);
    CHECK(g.levels() == 11);
    CHECK(g.quorum_size() == 55);
    CHECK(g.columns() == 256);
    CHECK(g.quorum_count() == 11 * 256);
}

TEST_CASE("every quorum has |Q| distinct members and memberships agree") {
    const auto g = QuorumGraph::build_butterfly(1024, 3);
    for (std::size_t i = 0; i < g.quorum_count(); ++i) {
        const QuorumId q = g.quorum_at(i);
        const auto m = g.members(q);
        REQUIRE(m.size() == 40);
        CHECK(std::adjacent_find(m.begin(), m.end()) == m.end());
        CHECK(std::is_sorted(m.begin(), m.end()));
        for (NodeId x : m) {
            const auto mine = g.quorums_of(x);
            CHECK(std::find(mine.begin(), mine.end(), q) != mine.end());
        }
    }
}

TEST_CASE("quorum paths are deterministic, full length and follow edges") {
    const auto g = QuorumGraph::build_butterfly(14116, 1);
    for (std::uint32_t k = 0; k < 200; ++k) {
        const NodeId s{k * 37 % 14116};
        const NodeId r{(k * 101 + 5) % 14116};
        const auto p = g.quorum_path(s, r);
        REQUIRE(p.quorums.size() == 11);
        CHECK(p.quorums == g.quorum_path(s, r).quorums);
        CHECK(p.quorums.front().column == g.column_of(s));
        CHECK(p.quorums.back().column == g.column_of(r));
        for (std::size_t i = 0; i + 1 < p.quorums.size(); ++i) {
            CHECK(p.quorums[i].level == i + 1);
            CHECK(g.are_neighbors(p.quorums[i], p.quorums[i + 1]));
            CHECK(g.are_neighbors(p.quorums[i + 1], p.quorums[i]));
        }
    }
}

TEST_CASE("neighbor structure") {
    const auto g = QuorumGraph::build_butterfly(4096, 2);
    for (const auto& nb : g.neighbors({1, 5})) CHECK(nb.level == 2);
    CHECK(g.neighbors({1, 5}).size() == 2);
    for (std::uint32_t level = 2; level < g.levels(); ++level) {
        CHECK(g.neighbors({level, 7}).size() >= 2);
    }
    CHECK_THROWS_AS(g.neighbors({0, 0}), LookupError);
    CHECK_THROWS_AS(g.members({1, g.columns()}), LookupError);
}

TEST_CASE("same seed builds the same graph") {
    const auto a = QuorumGraph::build_butterfly(2048, 9);
    const auto b = QuorumGraph::build_butterfly(2048, 9);
    const auto c = QuorumGraph::build_butterfly(2048, 10);
    bool differs = false;
    for (std::size_t i = 0; i < a.quorum_count(); ++i) {
        const auto ma = a.members(a.quorum_at(i));
        const auto mb = b.members(b.quorum_at(i));
        CHECK(std::equal(ma.begin(), ma.end(), mb.begin(), mb.end()));
        const auto mc = c.members(c.quorum_at(i));
        differs = differs || !std::equal(ma.begin(), ma.end(), mc.begin(), mc.end());
    }
    CHECK(differs);
    CHECK(a.summary() == b.summary());
    CHECK(a.summary().find("quorum_size 44") != std::string::npos);
}

TEST_CASE("explicit quorum lists are validated") {
    std::vector<std::vector<NodeId>> ok{{NodeId{0}, NodeId{1}}, {NodeId{2}, NodeId{3}}};
    const auto g = QuorumGraph::from_quorums(4, 2, 1, ok);
    CHECK(g.is_member(NodeId{2}, {2, 0}));
    CHECK_FALSE(g.is_member(NodeId{2}, {1, 0}));
    CHECK_THROWS_AS(QuorumGraph::from_quorums(4, 2, 3, ok), ConfigError);
    CHECK_THROWS_AS(QuorumGraph::from_quorums(4, 1, 1, ok), ConfigError);
    std::vector<std::vector<NodeId>> dup{{NodeId{0}, NodeId{0}}};
    CHECK_THROWS_AS(QuorumGraph::from_quorums(4, 1, 1, dup), ConfigError);
    std::vector<std::vector<NodeId>> out_of_range{{NodeId{0}, NodeId{9}}};
    CHECK_THROWS_AS(QuorumGraph::from_quorums(4, 1, 1, out_of_range), ConfigError);
}

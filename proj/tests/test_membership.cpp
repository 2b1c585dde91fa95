#include "fixtures.hpp"
#include "shbft/membership.hpp"

#include "doctest.h"

#include <algorithm>

using namespace shbft;

namespace {

ConflictPair pair_of(std::uint32_t u, std::uint32_t v, const QuorumGraph& g) {
    return ConflictPair{NodeId{u}, NodeId{v}, g.quorums_of(NodeId{u})[0], g.quorums_of(NodeId{v})[0], "test"};
}

} // namespace

TEST_CASE("fresh table: every member is unmarked") {
    const auto g = QuorumGraph::build_butterfly(1024, 1);
    MarkTable marks(g);
    const QuorumId q{2, 3};
    const auto u = marks.unmarked_set(q);
    const auto m = g.members(q);
    CHECK(std::equal(u.begin(), u.end(), m.begin(), m.end()));
    CHECK(marks.total_marked() == 0);
    CHECK(marks.snapshot() == "marked 0");
}

TEST_CASE("marking a node removes it from every quorum it belongs to") {
    const auto g = QuorumGraph::build_butterfly(1024, 2);
    MarkTable marks(g);
    const NodeId a = g.members({3, 1})[5];
    const NodeId b = g.members({4, 1})[7];
    const ConflictPair p{a, b, QuorumId{3, 1}, QuorumId{4, 1}, "chain"};
    const auto report = marks.record_conflicts(std::span(&p, 1));
    CHECK(report.newly_marked.size() == 2);
    CHECK(report.cost.messages > 0);
    CHECK(report.cost.rounds == 4);
    for (NodeId x : {a, b}) {
        CHECK(marks.is_marked(x));
        for (QuorumId q : g.quorums_of(x)) {
            const auto u = marks.unmarked_set(q);
            CHECK(u.size() == g.quorum_size() - marks.marked_count(q));
            CHECK(std::is_sorted(u.begin(), u.end()));
            CHECK(std::find(u.begin(), u.end(), x) == u.end());
        }
    }
    CHECK(marks.unmarked_set({3, 1}).size() == g.quorum_size() - 1);

    // Re-recording the same pair changes nothing.
    const auto again = marks.record_conflicts(std::span(&p, 1));
    CHECK(again.newly_marked.empty());
    CHECK(marks.total_marked() == 2);
}

TEST_CASE("unmarked_at indexes the sorted unmarked set") {
    const auto g = test::column_graph(2, 8);
    MarkTable marks(g);
    const auto p = pair_of(2, 9, g);
    marks.record_conflicts(std::span(&p, 1));
    CHECK(marks.unmarked_at({1, 0}, 0) == NodeId{0});
    CHECK(marks.unmarked_at({1, 0}, 2) == NodeId{3});
    CHECK_THROWS_AS(marks.unmarked_at({1, 0}, 7), LookupError);
}

TEST_CASE("a quorum with half its members marked unmarks them all") {
    const auto g = test::column_graph(2, 8);
    MarkTable marks(g);
    CHECK(MarkTable::unmark_threshold(8) == 4);

    const std::vector<ConflictPair> three{pair_of(0, 1, g), pair_of(2, 8, g)};
    auto report = marks.record_conflicts(three);
    CHECK(marks.marked_count({1, 0}) == 3);
    CHECK(report.unmarked.empty());
    CHECK(report.quorums_reset.empty());

    const auto fourth = pair_of(3, 9, g);
    report = marks.record_conflicts(std::span(&fourth, 1));
    CHECK(report.quorums_reset == std::vector<QuorumId>{QuorumId{1, 0}});
    CHECK(report.unmarked.size() == 4);
    CHECK(marks.marked_count({1, 0}) == 0);
    // Marks elsewhere survive.
    CHECK(marks.is_marked(NodeId{8}));
    CHECK(marks.is_marked(NodeId{9}));
    CHECK(marks.snapshot() == "marked 2 8 9");
}

TEST_CASE("empty conflict list is a no-op") {
    const auto g = test::column_graph(2, 8);
    MarkTable marks(g);
    const auto report = marks.record_conflicts({});
    CHECK(report.cost == Cost{});
    CHECK(marks.process_unmark_threshold().unmarked.empty());
}

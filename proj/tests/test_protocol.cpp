#include "shbft/protocol.hpp"

#include "doctest.h"

#include <algorithm>
#include <functional>
#include <set>

using namespace shbft;

namespace {

/// Deviates wherever the script says so and remembers who did.
class Scripted final : public Behavior {
public:
    using Script = std::function<Action(NodeId, const DutyContext&)>;
    explicit Scripted(Script script) : script_(std::move(script)) {}

    Action decide(NodeId node, const DutyContext& ctx) override {
        const Action a = script_(node, ctx);
        if (a != Action::Comply) deviators.insert(node);
        return a;
    }

    std::set<NodeId> deviators;

private:
    Script script_;
};

struct Rig {
    explicit Rig(std::uint32_t n, Behavior& b, ProtocolParams params)
        : graph(QuorumGraph::build_butterfly(n, 11)), crypto(graph, 11), marks(graph),
          protocol(graph, crypto, marks, b, params, 11) {}
    QuorumGraph graph;
    CryptoSim crypto;
    MarkTable marks;
    Protocol protocol;
};

ProtocolParams forced(std::uint32_t n, CheckVariant v) { return ProtocolParams::for_network(n, v, true); }

} // namespace

TEST_CASE("check probabilities and sizes follow n") {
    const auto c1 = ProtocolParams::for_network(14116, CheckVariant::Check1);
    CHECK(c1.subquorum_size == 3);
    CHECK(c1.p_call == doctest::Approx(1.0 / 9));
    const auto c2 = ProtocolParams::for_network(14116, CheckVariant::Check2);
    CHECK(c2.check2_rounds == 16);
    CHECK(c2.p_call == doctest::Approx(1.0 / 16));
    CHECK(ProtocolParams::for_network(14116, CheckVariant::Check2, true).p_call == 1.0);
    CHECK(loglog_floor(14116) == 3);
    CHECK(loglog_floor(65536) == 4);
    CHECK(log_star(1.0) == 0);
    CHECK(log_star(65536) == 4);
    CHECK(log_star(65537) == 5);
}

TEST_CASE("BROADCAST metering") {
    HonestBehavior honest;
    Rig rig(14116, honest, forced(14116, CheckVariant::Check1));
    const QuorumId q{4, 2};
    const auto members = rig.graph.members(q);
    const auto full = rig.protocol.broadcast(members[0], Payload{7}, members, q);
    CHECK(full.signed_ok);
    CHECK(full.cost.messages == 165);
    CHECK(full.cost.rounds == 3);
    CHECK(full.delivered == 55);
    const auto none = rig.protocol.broadcast(members[0], Payload{7}, {}, q);
    CHECK(none.signed_ok);
    CHECK(none.cost.messages == 110);
}

TEST_CASE("an equivocating or silent broadcaster gets nothing signed") {
    Scripted equivocate([](NodeId, const DutyContext& ctx) {
        return ctx.duty == Duty::Broadcast ? Action::Equivocate : Action::Comply;
    });
    Rig rig(14116, equivocate, forced(14116, CheckVariant::Check1));
    const QuorumId q{4, 2};
    const auto members = rig.graph.members(q);
    const auto res = rig.protocol.broadcast(members[0], Payload{7}, members, q);
    CHECK_FALSE(res.signed_ok);
    CHECK(res.delivered == 0);

    Scripted drop([](NodeId, const DutyContext& ctx) {
        return ctx.duty == Duty::Broadcast ? Action::Drop : Action::Comply;
    });
    Rig rig2(14116, drop, forced(14116, CheckVariant::Check1));
    const auto dropped = rig2.protocol.broadcast(members[0], Payload{7}, members, q);
    CHECK_FALSE(dropped.signed_ok);
    CHECK(dropped.cost.messages == 0);
}

TEST_CASE("seven withheld shares out of 55 block the signature") {
    const auto g = QuorumGraph::build_butterfly(14116, 11);
    const QuorumId q{4, 2};
    const auto members = g.members(q);
    for (std::size_t withheld : {6u, 7u}) {
        const std::set<NodeId> silent(members.begin(), members.begin() + withheld);
        Scripted b([&](NodeId x, const DutyContext& ctx) {
            return ctx.duty == Duty::ShareSign && silent.count(x) ? Action::Drop : Action::Comply;
        });
        Rig rig(14116, b, forced(14116, CheckVariant::Check1));
        const auto res = rig.protocol.broadcast(members[54], Payload{1}, members, q);
        CHECK(res.signed_ok == (withheld == 6));
    }
}

TEST_CASE("honest SEND-PATH costs 450 messages at n = 14116") {
    HonestBehavior honest;
    Rig rig(14116, honest, forced(14116, CheckVariant::Check1));
    const NodeId s{3}, r{9000};
    const auto path = rig.graph.quorum_path(s, r);
    const auto sp = rig.protocol.send_path(s, Payload{42}, r, path);
    CHECK(sp.delivered == Payload{42});
    CHECK(sp.cost.messages == 450);
    CHECK(sp.selected.size() == 11);
    for (std::size_t i = 0; i < sp.selected.size(); ++i) {
        CHECK(rig.graph.is_member(sp.selected[i], path.quorums[i]));
        CHECK(sp.selected[i] != s);
        CHECK(sp.selected[i] != r);
    }
    const auto naive = rig.protocol.naive_send(s, Payload{42}, r, path);
    CHECK(naive.delivered == Payload{42});
    CHECK(naive.cost.messages == 30360);
}

TEST_CASE("without faults no SEND raises an alarm") {
    for (auto variant : {CheckVariant::Check1, CheckVariant::Check2}) {
        HonestBehavior honest;
        Rig rig(1024, honest, forced(1024, variant));
        for (std::uint32_t i = 0; i < 30; ++i) {
            const auto res = rig.protocol.send(NodeId{i}, Payload{i * 3 + 1}, NodeId{1023 - i});
            REQUIRE(res.check.has_value());
            CHECK_FALSE(res.check->raised());
            CHECK(res.outcome == SendOutcome::DeliveredClean);
            CHECK_FALSE(res.update.has_value());
        }
        CHECK(rig.marks.total_marked() == 0);
    }
}

TEST_CASE("CHECK1 catches a corrupting relay and UPDATE marks it") {
    Scripted b([](NodeId, const DutyContext& ctx) {
        return ctx.phase == Phase::SendPath && ctx.duty == Duty::PathRelay && ctx.level == 3 ? Action::Corrupt
                                                                                             : Action::Comply;
    });
    Rig rig(1024, b, forced(1024, CheckVariant::Check1));
    const auto res = rig.protocol.send(NodeId{5}, Payload{99}, NodeId{700});
    CHECK(res.corrupted);
    REQUIRE(res.check.has_value());
    REQUIRE(res.check->raised());
    CHECK(res.check->alarms.front().phase == Phase::Check1);
    REQUIRE(res.update.has_value());
    CHECK(res.update->accepted);
    REQUIRE(res.update->marked.has_value());
    CHECK(res.update->marked->u == res.path.selected[2]);
    CHECK(res.update->marked->v == res.path.selected[3]);
    CHECK(res.outcome == SendOutcome::CorruptionDetectedAndUpdated);
    CHECK(rig.marks.is_marked(res.path.selected[2]));
}

TEST_CASE("CHECK2 flags a forged probe in a later round") {
    Scripted b([](NodeId, const DutyContext& ctx) {
        return ctx.phase == Phase::Check2 && ctx.duty == Duty::ProbeRelay && ctx.round == 2 ? Action::Corrupt
                                                                                            : Action::Comply;
    });
    Rig rig(1024, b, forced(1024, CheckVariant::Check2));
    const auto res = rig.protocol.send(NodeId{5}, Payload{99}, NodeId{700});
    CHECK_FALSE(res.corrupted);
    REQUIRE(res.check.has_value());
    REQUIRE(res.check->raised());
    CHECK(res.check->rounds_run == 2);
    bool bad_signature = false;
    for (const auto& a : res.check->alarms) {
        CHECK(a.round == 2);
        bad_signature = bad_signature || a.reason == AlarmReason::BadSignature;
    }
    CHECK(bad_signature);
    CHECK(res.check->alarms.front().reason == AlarmReason::BadSignature);
    REQUIRE(res.update.has_value());
    REQUIRE(res.update->marked.has_value());
    CHECK(b.deviators.count(res.update->marked->u) == 1);
    CHECK(b.deviators.count(res.update->marked->v) == 0);
}

TEST_CASE("CHECK2 subquorums grow by at most one per round") {
    HonestBehavior honest;
    Rig rig(4096, honest, forced(4096, CheckVariant::Check2));
    const auto res = rig.protocol.send(NodeId{1}, Payload{2}, NodeId{3000});
    REQUIRE(res.check.has_value());
    CHECK(res.check->rounds_run == rig.protocol.params().check2_rounds);
    const auto trace = rig.protocol.check2_trace();
    REQUIRE(trace.size() == res.check->rounds_run);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        CHECK(trace[i].round == i + 1);
        for (std::size_t j = 0; j < trace[i].subquorums.size(); ++j) {
            const auto& now = trace[i].subquorums[j];
            const std::size_t before = i == 0 ? 0 : trace[i - 1].subquorums[j].size();
            CHECK(now.size() >= before);
            CHECK(now.size() <= before + 1);
        }
    }
}

TEST_CASE("fabricated alarms are rejected") {
    HonestBehavior honest;
    Rig rig(1024, honest, forced(1024, CheckVariant::Check1));
    const NodeId s{5}, r{700};
    const auto res = rig.protocol.send(s, Payload{1}, r);
    const auto& records = rig.protocol.transcript().records;
    REQUIRE_FALSE(records.empty());
    const auto& rec = records.front();

    Alarm empty{rec.to, rec.to_quorum, rec.phase, 0, AlarmReason::MissingMessage, {}};
    CHECK_FALSE(rig.protocol.verify_evidence(empty));

    Alarm lie{rec.to, rec.to_quorum, rec.phase, 0, AlarmReason::MissingMessage, {0}};
    CHECK_FALSE(rig.protocol.verify_evidence(lie));

    Alarm wrong_node{rec.from, rec.to_quorum, rec.phase, 0, AlarmReason::PayloadMismatch, {0}};
    CHECK_FALSE(rig.protocol.verify_evidence(wrong_node));

    Alarm out_of_range{rec.to, rec.to_quorum, rec.phase, 0, AlarmReason::PayloadMismatch, {records.size()}};
    CHECK_FALSE(rig.protocol.verify_evidence(out_of_range));

    const auto upd = rig.protocol.update(lie, s, r, res.path.path);
    CHECK_FALSE(upd.accepted);
    CHECK_FALSE(upd.marked.has_value());
    CHECK(upd.cost.messages == 3 * rig.graph.members(rec.to_quorum).size());
    CHECK(rig.marks.total_marked() == 0);
}

TEST_CASE("naive baseline tolerates a minority and fails with a majority") {
    const auto g = QuorumGraph::build_butterfly(1024, 11);
    const NodeId s{5}, r{700};
    const auto path = g.quorum_path(s, r);
    const auto q3 = g.members(path.quorums[2]);
    for (std::size_t bad : {19u, 21u}) {
        const std::set<NodeId> bad_set(q3.begin(), q3.begin() + bad);
        Scripted b([&](NodeId x, const DutyContext&) { return bad_set.count(x) ? Action::Corrupt : Action::Comply; });
        Rig rig(1024, b, forced(1024, CheckVariant::Check1));
        const auto res = rig.protocol.naive_send(s, Payload{8}, r, path);
        CHECK((res.delivered == Payload{8}) == (bad == 19u));
    }
}

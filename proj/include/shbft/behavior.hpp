#pragma once

#include "shbft/rng.hpp"
#include "shbft/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace shbft {

enum class Phase : std::uint8_t { SendPath, Check1, Check2, Baseline };

/// Obligations a node can be asked to fulfil during a SEND.
enum class Duty : std::uint8_t {
    EntryForward,   ///< Q_1 member forwarding s's broadcast to the selected node(s)
    PathRelay,      ///< q_i sending m to q_{i+1}
    Broadcast,      ///< node driving a BROADCAST (sending m to its quorum, then the signed result)
    ShareSign,      ///< quorum member contributing a signature share
    ExitDeliver,    ///< Q_l member sending m to r
    ProbeForward,   ///< CHECK: S_j member sending m' towards level j+1
    ProbeRelay,     ///< CHECK2: x_j relaying m' to the rest of S_j
    QuorumRelay,    ///< baseline: member of Q_i sending to all of Q_{i+1}
    RaiseAlarm,     ///< node that observed an inconsistency initiating UPDATE
};

/// Equivocate only has an effect on Broadcast: half the members receive
/// the honest content, half the corrupted one.
enum class Action : std::uint8_t { Comply, Corrupt, Drop, Equivocate };

struct DutyContext {
    Duty duty;
    Phase phase;
    std::uint32_t level{}; ///< path position of the acting node, 1-based
    std::uint32_t round{}; ///< CHECK2 round, 1-based; 0 elsewhere
};

/// What the nodes observe at the start of a CHECK2 round: the subquorums
/// after this round's selection, and which members have already received
/// m' in an earlier round. A rushing adversary sees all of it.
struct Check2View {
    struct Member {
        NodeId node;
        bool informed;
        bool scheduled_before; ///< in S_j before this round
    };
    std::uint32_t round{};
    std::uint32_t levels{};
    std::span<const std::vector<Member>> subquorums; ///< index j-1 holds S_j
    std::span<const NodeId> selected;                ///< x_j for this round
};

/// Decision source for every node. The protocol asks it for each duty and
/// never learns which nodes are faulty: an honest node simply answers
/// Comply. Adversary strategies implement this interface.
class Behavior {
public:
    virtual ~Behavior() = default;

    virtual void begin_send(std::uint64_t send_index) { (void)send_index; }
    virtual Action decide(NodeId node, const DutyContext& ctx) = 0;
    /// Replacement content a node substitutes when it corrupts `honest`.
    /// The default ignores the node so colluding nodes agree on the forgery.
    virtual Payload corrupt(NodeId node, Payload honest) const {
        (void)node;
        return Payload{mix64(honest.value ^ 0xBAD)};
    }
    virtual void observe_check2_round(const Check2View& view) { (void)view; }
};

class HonestBehavior final : public Behavior {
public:
    Action decide(NodeId, const DutyContext&) override { return Action::Comply; }
};

} // namespace shbft

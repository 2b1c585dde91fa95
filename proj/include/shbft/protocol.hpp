#pragma once

#include "shbft/behavior.hpp"
#include "shbft/crypto_sim.hpp"
#include "shbft/membership.hpp"
#include "shbft/quorum_graph.hpp"
#include "shbft/rng.hpp"
#include "shbft/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace shbft {

enum class CheckVariant : std::uint8_t { Check1 = 1, Check2 = 2 };

/// floor(log2 log2 n), at least 1.
std::uint32_t loglog_floor(std::uint64_t n);
/// Iterated base-2 logarithm; log*(x) = 0 for x <= 1.
std::uint32_t log_star(double x);

struct ProtocolParams {
    CheckVariant variant{CheckVariant::Check1};
    double p_call{1.0};
    std::uint32_t check2_rounds{4};  ///< 4 log* n
    std::uint32_t subquorum_size{1}; ///< floor(log log n)
    bool run_update{true};           ///< false: alarms are reported but never acted on

    /// p_call = 1/(loglog n)^2 for CHECK1, 1/(log* n)^2 for CHECK2, clamped
    /// to (0, 1]; `force_check` pins it to 1.
    static ProtocolParams for_network(std::uint32_t n, CheckVariant variant, bool force_check = false);
};

/// Kind of a scheduled point-to-point transmission.
///
/// Fan-in from all of Q_1 and fan-out from Q_l to r are not recorded:
/// copies from Q_1 are filtered by its signature, r majority-filters, and
/// neither can place a pair inside the path.
enum class EdgeKind : std::uint8_t {
    Chain, ///< selected node at level k to selected node at level k+1
    Relay, ///< CHECK2: x_j to the other members of S_j
    Exit,  ///< selected level-l node's BROADCAST into Q_l
};

/// One scheduled transmission of the last SEND-PATH or CHECK. `expected`
/// is what the sender was obliged to send (the value it holds), `received`
/// what actually arrived. Fingerprints compare message contents.
struct TranscriptRecord {
    Phase phase;
    EdgeKind kind;
    std::uint32_t round;
    NodeId from;
    NodeId to;
    QuorumId from_quorum;
    QuorumId to_quorum;
    std::optional<std::uint64_t> expected;
    std::optional<std::uint64_t> received;

    bool conflicting() const { return expected != received; }
};

struct Transcript {
    std::vector<TranscriptRecord> records;
    void clear() { records.clear(); }
};

enum class AlarmReason : std::uint8_t {
    InconsistentCopies, ///< copies of one message disagree
    MissingMessage,     ///< an expected message never arrived
    BadSignature,       ///< a copy fails quorum or ephemeral-key verification
    LateDelivery,       ///< CHECK2: first copy arrives after an earlier scheduled one was missed
    PayloadMismatch,    ///< Q_l member: m' carries a different m than SEND-PATH delivered
};

std::string to_string(AlarmReason reason);

/// A node's claim that it observed an inconsistency, with the transcript
/// records it cites as evidence.
struct Alarm {
    NodeId node;
    QuorumId quorum;
    Phase phase;
    std::uint32_t round;
    AlarmReason reason;
    std::vector<std::size_t> evidence;
};

struct BroadcastResult {
    Action action{Action::Comply}; ///< what the broadcaster chose to do
    bool signed_ok{};
    std::optional<Digest> content; ///< what the receivers in S hold
    Token signature;
    std::size_t delivered{};
    Cost cost;
};

struct SendPathResult {
    QuorumPath path;
    std::vector<NodeId> selected;                ///< q_1 .. q_l
    std::vector<std::optional<Payload>> holding; ///< what each q_i held
    std::vector<std::optional<Payload>> exit_values; ///< per Q_l member, in member order
    std::vector<std::size_t> exit_records;           ///< transcript index of each Exit record
    std::optional<Payload> delivered;            ///< r's majority-filtered output
    Cost cost;
};

struct CheckResult {
    CheckVariant variant;
    std::uint32_t rounds_run{};
    std::vector<Alarm> alarms; ///< raised alarms, in detection order
    std::vector<std::vector<NodeId>> subquorums; ///< final S_1 .. S_l (distinct members)
    Cost cost;
    bool raised() const { return !alarms.empty(); }
};

/// Per-round bookkeeping of CHECK2 for bar-monotonicity assertions.
struct Check2RoundTrace {
    std::uint32_t round;
    std::vector<std::vector<NodeId>> subquorums;
    std::vector<std::vector<NodeId>> receivers; ///< members of S_j holding m' this round
};

struct UpdateResult {
    bool accepted{};                        ///< initiator's evidence verified by its quorum
    std::vector<ConflictPair> conflicts;    ///< every conflicting pair found, leftmost first
    std::optional<ConflictPair> marked;     ///< the pair passed to the mark table
    MarkReport marks;
    Cost cost;
};

enum class SendOutcome : std::uint8_t { DeliveredClean, CorruptedUndetected, CorruptionDetectedAndUpdated };

std::string to_string(SendOutcome outcome);

struct SendResult {
    SendPathResult path;
    std::optional<CheckResult> check;
    std::optional<UpdateResult> update;
    bool corrupted{};
    SendOutcome outcome{SendOutcome::DeliveredClean};
    Cost cost;
};

struct NaiveResult {
    std::optional<Payload> delivered;
    Cost cost;
};

/// The SEND pipeline (SEND-PATH, CHECK1/CHECK2, UPDATE) plus the naive
/// all-to-all baseline, over one trial's graph, keys and mark table.
///
/// Exactly one SEND runs at a time; the transcript of the last SEND-PATH
/// and CHECK is kept for UPDATE. Every decision a node makes is delegated
/// to the Behavior, so the protocol never consults which nodes are bad.
///
/// Bad nodes file truthful UPDATE reports: a transmission conflicts
/// exactly when its sender did not send what it held. UPDATE marks only
/// the leftmost conflicting pair.
class Protocol {
public:
    Protocol(const QuorumGraph& graph, CryptoSim& crypto, MarkTable& marks, Behavior& behavior,
             ProtocolParams params, std::uint64_t seed);

    const ProtocolParams& params() const { return params_; }
    const Transcript& transcript() const { return transcript_; }
    std::span<const Check2RoundTrace> check2_trace() const { return check2_trace_; }

    /// BROADCAST of `m` by x through quorum q to the nodes in S.
    /// Metered as |Q| sends + shares actually sent + |S| deliveries.
    BroadcastResult broadcast(NodeId x, Payload m, std::span<const NodeId> S, QuorumId q);

    SendResult send(NodeId s, Payload m, NodeId r);
    SendPathResult send_path(NodeId s, Payload m, NodeId r, const QuorumPath& path);
    CheckResult check1(NodeId s, Payload m, NodeId r, const SendPathResult& sp);
    CheckResult check2(NodeId s, Payload m, NodeId r, const SendPathResult& sp);
    UpdateResult update(const Alarm& alarm, NodeId s, NodeId r, const QuorumPath& path);

    /// Does the cited evidence actually show the claimed inconsistency?
    bool verify_evidence(const Alarm& alarm) const;

    NaiveResult naive_send(NodeId s, Payload m, NodeId r, const QuorumPath& path);

private:
    /// One version of m' seen during a CHECK. Versions differ in content
    /// (inner, tag) or in the signature material they carry.
    struct Probe {
        Payload inner;
        std::uint64_t tag;
        Digest content;     ///< identifies (inner, tag)
        Digest fingerprint; ///< identifies the whole version
        bool quorum_signed; ///< carries Q_1's signature from s's broadcast
        SignedBlob blob;    ///< CHECK2 ephemeral signature
        Token key;          ///< k_p the blob claims to verify under
        bool authentic;     ///< verifies against s's CHECK2 key, or Q_1's signature in CHECK1
    };

    BroadcastResult broadcast_digest(NodeId x, Digest honest, Digest corrupted, std::span<const NodeId> S,
                                     QuorumId q, const DutyContext& ctx);
    bool raise(std::vector<Alarm>& alarms, Alarm alarm);
    std::size_t record(TranscriptRecord rec);
    Digest payload_digest(Payload m);
    std::uint64_t broadcast_fanout_cost(QuorumId q) const;
    /// U_q without s and r: the endpoints never relay their own message.
    std::vector<NodeId> relay_candidates(QuorumId q, NodeId s, NodeId r) const;
    std::uint32_t intern_probe(Payload inner, std::uint64_t tag, bool quorum_signed, SignedBlob blob, Token key,
                               bool authentic);
    std::uint32_t forge_probe(NodeId node, std::uint32_t held, CheckVariant variant);
    std::optional<std::uint32_t> probe_of(std::optional<std::uint64_t> fingerprint) const;
    void check_exit(NodeId s, const SendPathResult& sp, const std::vector<std::optional<std::uint32_t>>& held_by,
                    std::span<const NodeId> exit_senders, Phase phase, std::uint32_t round, CheckResult& out);

    const QuorumGraph* graph_;
    CryptoSim* crypto_;
    MarkTable* marks_;
    Behavior* behavior_;
    ProtocolParams params_;
    RngStream select_rng_;
    RngStream array_rng_;
    RngStream coin_rng_;
    Transcript transcript_;
    std::vector<Check2RoundTrace> check2_trace_;
    std::vector<Probe> probes_;
    std::unordered_map<std::uint64_t, std::uint32_t> probe_index_;
    std::unordered_map<std::uint32_t, EphemeralKeyPair> forge_keys_;
    std::optional<EphemeralKeyPair> check2_key_;
    std::uint64_t send_index_{};
};

} // namespace shbft

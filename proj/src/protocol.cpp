#include "shbft/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace shbft {

namespace {

template <class T>
std::optional<T> plurality(const std::vector<T>& values) {
    if (values.empty()) return std::nullopt;
    std::map<T, std::size_t> counts;
    for (const auto& v : values) ++counts[v];
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

std::optional<std::uint64_t> value_of(const std::optional<Payload>& p) {
    if (!p) return std::nullopt;
    return p->value;
}

} // namespace

std::uint32_t loglog_floor(std::uint64_t n) {
    if (n < 4) return 1;
    const double v = std::floor(std::log2(std::log2(static_cast<double>(n))));
    return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(v));
}

std::uint32_t log_star(double x) {
    std::uint32_t count = 0;
    while (x > 1.0) {
        x = std::log2(x);
        ++count;
    }
    return count;
}

ProtocolParams ProtocolParams::for_network(std::uint32_t n, CheckVariant variant, bool force_check) {
    ProtocolParams p;
    p.variant = variant;
    p.subquorum_size = loglog_floor(n);
    p.check2_rounds = 4 * std::max<std::uint32_t>(1, log_star(n));
    const double base = variant == CheckVariant::Check1 ? p.subquorum_size : std::max<std::uint32_t>(1, log_star(n));
    p.p_call = force_check ? 1.0 : std::clamp(1.0 / (base * base), 0.0, 1.0);
    return p;
}

std::string to_string(AlarmReason reason) {
    switch (reason) {
    case AlarmReason::InconsistentCopies: return "inconsistent";
    case AlarmReason::MissingMessage: return "missing";
    case AlarmReason::BadSignature: return "bad-signature";
    case AlarmReason::LateDelivery: return "late";
    case AlarmReason::PayloadMismatch: return "payload-mismatch";
    }
    return "unknown";
}

std::string to_string(SendOutcome outcome) {
    switch (outcome) {
    case SendOutcome::DeliveredClean: return "clean";
    case SendOutcome::CorruptedUndetected: return "corrupted";
    case SendOutcome::CorruptionDetectedAndUpdated: return "detected";
    }
    return "unknown";
}

Protocol::Protocol(const QuorumGraph& graph, CryptoSim& crypto, MarkTable& marks, Behavior& behavior,
                   ProtocolParams params, std::uint64_t seed)
    : graph_(&graph), crypto_(&crypto), marks_(&marks), behavior_(&behavior), params_(params),
      select_rng_(seed, "select"), array_rng_(seed, "check-arrays"), coin_rng_(seed, "check-coin") {}

Digest Protocol::payload_digest(Payload m) { return crypto_->digest("m:" + std::to_string(m.value)); }

std::size_t Protocol::record(TranscriptRecord rec) {
    transcript_.records.push_back(std::move(rec));
    return transcript_.records.size() - 1;
}

bool Protocol::raise(std::vector<Alarm>& alarms, Alarm alarm) {
    const DutyContext ctx{Duty::RaiseAlarm, alarm.phase, alarm.quorum.level, alarm.round};
    if (behavior_->decide(alarm.node, ctx) != Action::Comply) return false;
    alarms.push_back(std::move(alarm));
    return true;
}

std::uint64_t Protocol::broadcast_fanout_cost(QuorumId q) const {
    const std::uint64_t size = graph_->members(q).size();
    std::uint64_t messages = 3 * size;
    for (QuorumId nb : graph_->neighbors(q)) messages += graph_->members(nb).size();
    return messages;
}

BroadcastResult Protocol::broadcast_digest(NodeId x, Digest honest, Digest corrupted, std::span<const NodeId> S,
                                           QuorumId q, const DutyContext& ctx) {
    BroadcastResult res;
    res.cost.rounds = 3;
    const auto members = graph_->members(q);
    const Action act = behavior_->decide(x, DutyContext{Duty::Broadcast, ctx.phase, ctx.level, ctx.round});
    res.action = act;
    if (act == Action::Drop) return res;

    res.cost.messages += members.size();
    std::vector<SignatureShare> shares;
    shares.reserve(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        Digest held = honest;
        if (act == Action::Corrupt || (act == Action::Equivocate && i % 2 == 1)) held = corrupted;
        const Action sign = behavior_->decide(members[i], DutyContext{Duty::ShareSign, ctx.phase, ctx.level, ctx.round});
        if (sign == Action::Drop) continue;
        if (sign != Action::Comply) held = Digest{mix64(held.value ^ members[i].value)};
        shares.push_back(crypto_->sign_share(members[i], q, held));
        ++res.cost.messages;
    }

    const Digest target = act == Action::Corrupt ? corrupted : honest;
    const auto sig = crypto_->try_combine(q, target, shares);
    if (!sig) return res;
    res.signed_ok = true;
    res.content = target;
    res.signature = *sig;
    res.delivered = S.size();
    res.cost.messages += S.size();
    return res;
}

BroadcastResult Protocol::broadcast(NodeId x, Payload m, std::span<const NodeId> S, QuorumId q) {
    return broadcast_digest(x, payload_digest(m), payload_digest(behavior_->corrupt(x, m)), S, q,
                            DutyContext{Duty::Broadcast, Phase::SendPath, 0, 0});
}

std::vector<NodeId> Protocol::relay_candidates(QuorumId q, NodeId s, NodeId r) const {
    auto out = marks_->unmarked_set(q);
    std::erase_if(out, [&](NodeId x) { return x == s || x == r; });
    if (out.empty()) throw LookupError("no relay candidate left in " + to_string(q));
    return out;
}

SendPathResult Protocol::send_path(NodeId s, Payload m, NodeId r, const QuorumPath& path) {
    SendPathResult res;
    res.path = path;
    const auto l = static_cast<std::uint32_t>(path.quorums.size());
    res.selected.reserve(l);
    for (QuorumId q : path.quorums) {
        const auto candidates = relay_candidates(q, s, r);
        res.selected.push_back(candidates[select_rng_.index(candidates.size())]);
    }
    res.holding.assign(l, std::nullopt);

    // s to Q_1, then every member of Q_1 forwards the signed copy to q_1.
    const QuorumId q1 = path.quorums.front();
    const auto q1_members = graph_->members(q1);
    auto entry = broadcast_digest(s, payload_digest(m), payload_digest(behavior_->corrupt(s, m)), q1_members, q1,
                                  DutyContext{Duty::Broadcast, Phase::SendPath, 0, 0});
    res.cost += entry.cost;
    for (NodeId u : q1_members) {
        if (entry.signed_ok && behavior_->decide(u, DutyContext{Duty::EntryForward, Phase::SendPath, 1, 0}) != Action::Drop) {
            ++res.cost.messages;
        }
    }
    res.cost.rounds += 1;
    // Unsigned copies are discarded, so q_1 ends up with the signed content.
    if (entry.signed_ok) res.holding[0] = *entry.content == payload_digest(m) ? m : behavior_->corrupt(s, m);

    for (std::uint32_t k = 0; k + 1 < l; ++k) {
        const NodeId from = res.selected[k];
        const NodeId to = res.selected[k + 1];
        std::optional<Payload> sent;
        if (res.holding[k]) {
            switch (behavior_->decide(from, DutyContext{Duty::PathRelay, Phase::SendPath, k + 1, 0})) {
            case Action::Comply: sent = res.holding[k]; break;
            case Action::Drop: break;
            default: sent = behavior_->corrupt(from, *res.holding[k]); break;
            }
        }
        if (sent) ++res.cost.messages;
        record({Phase::SendPath, EdgeKind::Chain, k + 1, from, to, path.quorums[k], path.quorums[k + 1],
                value_of(res.holding[k]), value_of(sent)});
        res.holding[k + 1] = sent;
        res.cost.rounds += 1;
    }

    const QuorumId ql = path.quorums.back();
    const auto ql_members = graph_->members(ql);
    const NodeId exit_node = res.selected.back();
    res.exit_values.assign(ql_members.size(), std::nullopt);
    // A complying node whose broadcast is blocked by withheld shares sent nothing it could be held to.
    std::optional<std::uint64_t> exit_expected = value_of(res.holding.back());
    if (const auto held = res.holding.back()) {
        const Payload bad = behavior_->corrupt(exit_node, *held);
        auto out = broadcast_digest(exit_node, payload_digest(*held), payload_digest(bad), ql_members, ql,
                                    DutyContext{Duty::Broadcast, Phase::SendPath, l, 0});
        res.cost += out.cost;
        if (out.action == Action::Comply && !out.signed_ok) exit_expected.reset();
        if (out.signed_ok) {
            const Payload got = *out.content == payload_digest(*held) ? *held : bad;
            std::fill(res.exit_values.begin(), res.exit_values.end(), got);
        }
    } else {
        res.cost.rounds += 3;
    }
    for (std::size_t i = 0; i < ql_members.size(); ++i) {
        res.exit_records.push_back(record({Phase::SendPath, EdgeKind::Exit, l, exit_node, ql_members[i], ql, ql,
                                           exit_expected, value_of(res.exit_values[i])}));
    }

    std::vector<Payload> at_r;
    for (std::size_t i = 0; i < ql_members.size(); ++i) {
        if (!res.exit_values[i]) continue;
        switch (behavior_->decide(ql_members[i], DutyContext{Duty::ExitDeliver, Phase::SendPath, l, 0})) {
        case Action::Comply: at_r.push_back(*res.exit_values[i]); break;
        case Action::Drop: continue;
        default: at_r.push_back(behavior_->corrupt(ql_members[i], *res.exit_values[i])); break;
        }
        ++res.cost.messages;
    }
    res.cost.rounds += 1;
    res.delivered = plurality(at_r);
    return res;
}

std::uint32_t Protocol::intern_probe(Payload inner, std::uint64_t tag, bool quorum_signed, SignedBlob blob, Token key,
                                     bool authentic) {
    const std::string content = "c:" + std::to_string(inner.value) + ':' + std::to_string(tag);
    const std::string version = "v:" + content + ':' + (quorum_signed ? '1' : '0') + ':' +
                                std::to_string(blob.tag.bits) + ':' + std::to_string(key.bits);
    const Digest fp = crypto_->digest(version);
    if (const auto it = probe_index_.find(fp.value); it != probe_index_.end()) return it->second;
    const auto index = static_cast<std::uint32_t>(probes_.size());
    probes_.push_back(Probe{inner, tag, crypto_->digest(content), fp, quorum_signed, blob, key, authentic});
    probe_index_.emplace(fp.value, index);
    return index;
}

std::uint32_t Protocol::forge_probe(NodeId node, std::uint32_t held, CheckVariant variant) {
    const Probe p = probes_[held];
    const Payload inner = behavior_->corrupt(node, p.inner);
    if (variant == CheckVariant::Check1) return intern_probe(inner, p.tag, false, SignedBlob{}, Token{}, false);
    auto it = forge_keys_.find(node.value);
    if (it == forge_keys_.end()) it = forge_keys_.emplace(node.value, crypto_->ephemeral_keypair(node)).first;
    const Digest content = crypto_->digest("c:" + std::to_string(inner.value) + ':' + std::to_string(p.tag));
    const SignedBlob blob = crypto_->sign(it->second.k_s, content);
    const bool authentic = check2_key_ && crypto_->verify_ephemeral(it->second.k_p, blob) &&
                           crypto_->ephemeral_owner(it->second.k_p) == check2_key_->owner;
    return intern_probe(inner, p.tag, false, blob, it->second.k_p, authentic);
}

std::optional<std::uint32_t> Protocol::probe_of(std::optional<std::uint64_t> fingerprint) const {
    if (!fingerprint) return std::nullopt;
    const auto it = probe_index_.find(*fingerprint);
    if (it == probe_index_.end()) return std::nullopt;
    return it->second;
}

namespace {

struct Incoming {
    std::size_t record;
    std::optional<std::uint32_t> probe;
};

} // namespace

void Protocol::check_exit(NodeId s, const SendPathResult& sp,
                          const std::vector<std::optional<std::uint32_t>>& held_by,
                          std::span<const NodeId> exit_senders, Phase phase, std::uint32_t round, CheckResult& out) {
    const auto l = static_cast<std::uint32_t>(sp.path.quorums.size());
    const QuorumId ql = sp.path.quorums.back();
    const auto members = graph_->members(ql);
    const CheckVariant variant = phase == Phase::Check1 ? CheckVariant::Check1 : CheckVariant::Check2;
    const QuorumId q1 = sp.path.quorums.front();
    (void)s;

    std::vector<std::vector<Incoming>> incoming(members.size());
    for (std::size_t w = 0; w < exit_senders.size(); ++w) {
        const auto held = held_by[w];
        std::optional<std::uint32_t> delivered;
        std::optional<std::uint64_t> expected;
        if (held) {
            expected = probes_[*held].fingerprint.value;
            const std::uint32_t forged = forge_probe(exit_senders[w], *held, variant);
            auto bc = broadcast_digest(exit_senders[w], probes_[*held].fingerprint, probes_[forged].fingerprint, members,
                                       ql, DutyContext{Duty::Broadcast, phase, l, round});
            out.cost.messages += bc.cost.messages;
            if (bc.action == Action::Comply && !bc.signed_ok) expected.reset();
            if (bc.signed_ok) delivered = probe_of(bc.content->value);
        }
        for (std::size_t i = 0; i < members.size(); ++i) {
            std::optional<std::uint64_t> received;
            if (delivered) received = probes_[*delivered].fingerprint.value;
            const auto idx = record({phase, EdgeKind::Exit, round, exit_senders[w], members[i], ql, ql, expected, received});
            incoming[i].push_back({idx, delivered});
        }
    }
    out.cost.rounds += 3;

    for (std::size_t i = 0; i < members.size(); ++i) {
        const NodeId v = members[i];
        const auto& in = incoming[i];
        std::vector<std::size_t> evidence;
        bool present = false;
        bool missing = false;
        bool bad_sig = false;
        bool mismatch = false;
        std::set<std::uint64_t> contents;
        const bool can_check_sig = variant == CheckVariant::Check2 || crypto_->can_verify(v, q1);
        for (const auto& c : in) {
            evidence.push_back(c.record);
            if (!c.probe) {
                missing = true;
                continue;
            }
            present = true;
            const Probe& p = probes_[*c.probe];
            contents.insert(p.content.value);
            if (can_check_sig && !p.authentic) bad_sig = true;
            if (!sp.exit_values[i] || p.inner != *sp.exit_values[i]) mismatch = true;
        }
        std::optional<AlarmReason> reason;
        if (bad_sig) reason = AlarmReason::BadSignature;
        else if (contents.size() > 1) reason = AlarmReason::InconsistentCopies;
        else if (present && missing) reason = AlarmReason::MissingMessage;
        else if (mismatch) reason = AlarmReason::PayloadMismatch;
        if (reason) raise(out.alarms, Alarm{v, ql, phase, round, *reason, std::move(evidence)});
    }
}

CheckResult Protocol::check1(NodeId s, Payload m, NodeId r, const SendPathResult& sp) {
    CheckResult out;
    out.variant = CheckVariant::Check1;
    out.rounds_run = 1;
    const auto& path = sp.path;
    const auto l = path.quorums.size();
    const QuorumId q1 = path.quorums.front();

    std::uint64_t tag = mix64(m.value ^ mix64(r.value));
    out.subquorums.resize(l);
    for (std::size_t j = 0; j < l; ++j) {
        const auto unmarked = relay_candidates(path.quorums[j], s, r);
        auto& sj = out.subquorums[j];
        for (std::uint32_t k = 0; k < params_.subquorum_size; ++k) {
            const auto idx = array_rng_.index(unmarked.size());
            tag = mix64(tag ^ ((std::uint64_t{static_cast<std::uint32_t>(j)} << 32) | idx));
            sj.push_back(unmarked[idx]);
        }
        std::sort(sj.begin(), sj.end());
        sj.erase(std::unique(sj.begin(), sj.end()), sj.end());
    }

    const std::uint32_t honest = intern_probe(m, tag, true, SignedBlob{}, Token{}, true);
    const auto q1_members = graph_->members(q1);
    auto bc = broadcast_digest(s, probes_[honest].fingerprint, probes_[honest].fingerprint, q1_members, q1,
                               DutyContext{Duty::Broadcast, Phase::Check1, 0, 0});
    out.cost += bc.cost;

    // S_1 members hold the signed broadcast; forwarded copies from Q_1 are
    // signature-filtered, so they only cost messages.
    std::vector<std::optional<std::uint32_t>> held(out.subquorums[0].size());
    if (bc.signed_ok) std::fill(held.begin(), held.end(), honest);
    for (NodeId u : q1_members) {
        if (!bc.signed_ok) break;
        if (behavior_->decide(u, DutyContext{Duty::EntryForward, Phase::Check1, 1, 0}) != Action::Drop) {
            out.cost.messages += out.subquorums[0].size();
        }
    }
    out.cost.rounds += 1;

    for (std::size_t j = 0; j + 1 < l; ++j) {
        const auto& from = out.subquorums[j];
        const auto& to = out.subquorums[j + 1];
        const QuorumId qj = path.quorums[j];
        const QuorumId qn = path.quorums[j + 1];
        std::vector<std::optional<std::uint32_t>> sent(from.size());
        for (std::size_t u = 0; u < from.size(); ++u) {
            if (!held[u]) continue;
            const auto level = static_cast<std::uint32_t>(j + 1);
            switch (behavior_->decide(from[u], DutyContext{Duty::ProbeForward, Phase::Check1, level, 0})) {
            case Action::Comply: sent[u] = held[u]; break;
            case Action::Drop: break;
            default: sent[u] = forge_probe(from[u], *held[u], CheckVariant::Check1); break;
            }
            if (sent[u]) out.cost.messages += to.size();
        }

        std::vector<std::optional<std::uint32_t>> next(to.size());
        for (std::size_t v = 0; v < to.size(); ++v) {
            std::vector<std::size_t> evidence;
            bool present = false;
            bool missing = false;
            bool bad_sig = false;
            std::set<std::uint64_t> contents;
            std::vector<std::pair<std::uint64_t, std::uint32_t>> accepted;
            const bool can_check_sig = crypto_->can_verify(to[v], q1);
            for (std::size_t u = 0; u < from.size(); ++u) {
                std::optional<std::uint64_t> expected;
                std::optional<std::uint64_t> received;
                if (held[u]) expected = probes_[*held[u]].fingerprint.value;
                if (sent[u]) received = probes_[*sent[u]].fingerprint.value;
                evidence.push_back(record({Phase::Check1, EdgeKind::Chain, 0, from[u], to[v], qj, qn, expected, received}));
                if (!sent[u]) {
                    missing = true;
                    continue;
                }
                present = true;
                const Probe& p = probes_[*sent[u]];
                contents.insert(p.content.value);
                if (can_check_sig && !p.authentic) {
                    bad_sig = true;
                    continue;
                }
                accepted.emplace_back(p.content.value, *sent[u]);
            }
            if (!accepted.empty()) {
                std::vector<std::uint64_t> keys;
                for (const auto& a : accepted) keys.push_back(a.first);
                const auto pick = *plurality(keys);
                for (const auto& a : accepted) {
                    if (a.first == pick) {
                        next[v] = a.second;
                        break;
                    }
                }
            }
            std::optional<AlarmReason> reason;
            if (bad_sig) reason = AlarmReason::BadSignature;
            else if (contents.size() > 1) reason = AlarmReason::InconsistentCopies;
            else if (present && missing) reason = AlarmReason::MissingMessage;
            if (reason) raise(out.alarms, Alarm{to[v], qn, Phase::Check1, 0, *reason, std::move(evidence)});
        }
        held = std::move(next);
        out.cost.rounds += 1;
    }

    check_exit(s, sp, held, out.subquorums.back(), Phase::Check1, 0, out);
    return out;
}

CheckResult Protocol::check2(NodeId s, Payload m, NodeId r, const SendPathResult& sp) {
    CheckResult out;
    out.variant = CheckVariant::Check2;
    const auto& path = sp.path;
    const auto l = path.quorums.size();
    const QuorumId q1 = path.quorums.front();
    const auto q1_members = graph_->members(q1);
    check2_key_ = crypto_->ephemeral_keypair(s);

    using Member = Check2View::Member;
    std::vector<std::vector<Member>> S(l);
    std::uint64_t tag = mix64(m.value ^ mix64(r.value) ^ check2_key_->k_p.bits);

    for (std::uint32_t round = 1; round <= params_.check2_rounds; ++round) {
        std::vector<NodeId> x(l);
        std::vector<std::size_t> x_at(l);
        for (std::size_t j = 0; j < l; ++j) {
            const auto unmarked = relay_candidates(path.quorums[j], s, r);
            const auto idx = array_rng_.index(unmarked.size());
            tag = mix64(tag ^ ((std::uint64_t{static_cast<std::uint32_t>(j)} << 32) | idx));
            x[j] = unmarked[idx];
            for (auto& mem : S[j]) mem.scheduled_before = true;
            auto it = std::find_if(S[j].begin(), S[j].end(), [&](const Member& mem) { return mem.node == x[j]; });
            if (it == S[j].end()) {
                S[j].push_back(Member{x[j], false, false});
                it = S[j].end() - 1;
            }
            x_at[j] = static_cast<std::size_t>(it - S[j].begin());
        }
        behavior_->observe_check2_round(Check2View{round, static_cast<std::uint32_t>(l), S, x});

        const Digest content = crypto_->digest("c:" + std::to_string(m.value) + ':' + std::to_string(tag));
        const std::uint32_t honest =
            intern_probe(m, tag, true, crypto_->sign(check2_key_->k_s, content), check2_key_->k_p, true);
        auto bc = broadcast_digest(s, probes_[honest].fingerprint, probes_[honest].fingerprint, q1_members, q1,
                                   DutyContext{Duty::Broadcast, Phase::Check2, 0, round});
        out.cost += bc.cost;
        out.cost.rounds += 1;

        std::vector<std::vector<std::optional<std::uint32_t>>> held(l);
        held[0].assign(S[0].size(), bc.signed_ok ? std::optional<std::uint32_t>(honest) : std::nullopt);

        for (std::size_t j = 0; j + 1 < l; ++j) {
            const auto level = static_cast<std::uint32_t>(j + 1);
            const QuorumId qj = path.quorums[j];
            const QuorumId qn = path.quorums[j + 1];
            const NodeId xn = x[j + 1];
            held[j + 1].assign(S[j + 1].size(), std::nullopt);

            // S_j to x_{j+1}.
            std::vector<std::size_t> evidence;
            bool present = false;
            bool missing = false;
            bool invalid = false;
            std::vector<std::pair<std::uint64_t, std::uint32_t>> valid;
            for (std::size_t u = 0; u < S[j].size(); ++u) {
                const auto& h = held[j][u];
                std::optional<std::uint32_t> sent;
                if (h) {
                    switch (behavior_->decide(S[j][u].node, DutyContext{Duty::ProbeForward, Phase::Check2, level, round})) {
                    case Action::Comply: sent = h; break;
                    case Action::Drop: break;
                    default: sent = forge_probe(S[j][u].node, *h, CheckVariant::Check2); break;
                    }
                }
                std::optional<std::uint64_t> expected;
                std::optional<std::uint64_t> received;
                if (h) expected = probes_[*h].fingerprint.value;
                if (sent) {
                    received = probes_[*sent].fingerprint.value;
                    ++out.cost.messages;
                }
                evidence.push_back(record({Phase::Check2, EdgeKind::Chain, round, S[j][u].node, xn, qj, qn, expected, received}));
                if (!sent) {
                    missing = true;
                    continue;
                }
                present = true;
                const Probe& p = probes_[*sent];
                if (!p.authentic) {
                    invalid = true;
                    continue;
                }
                valid.emplace_back(p.content.value, *sent);
            }
            std::optional<std::uint32_t> x_holds;
            if (!valid.empty()) {
                std::vector<std::uint64_t> keys;
                for (const auto& a : valid) keys.push_back(a.first);
                const auto pick = *plurality(keys);
                for (const auto& a : valid) {
                    if (a.first == pick) {
                        x_holds = a.second;
                        break;
                    }
                }
            }
            held[j + 1][x_at[j + 1]] = x_holds;
            if (invalid) raise(out.alarms, Alarm{xn, qn, Phase::Check2, round, AlarmReason::BadSignature, evidence});
            else if (present && missing) raise(out.alarms, Alarm{xn, qn, Phase::Check2, round, AlarmReason::MissingMessage, evidence});

            // x_{j+1} relays to the rest of S_{j+1}.
            std::optional<std::uint32_t> relayed;
            if (x_holds) {
                switch (behavior_->decide(xn, DutyContext{Duty::ProbeRelay, Phase::Check2, level + 1, round})) {
                case Action::Comply: relayed = x_holds; break;
                case Action::Drop: break;
                default: relayed = forge_probe(xn, *x_holds, CheckVariant::Check2); break;
                }
            }
            for (std::size_t v = 0; v < S[j + 1].size(); ++v) {
                if (v == x_at[j + 1]) continue;
                const Member& mem = S[j + 1][v];
                std::optional<std::uint64_t> expected;
                std::optional<std::uint64_t> received;
                if (x_holds) expected = probes_[*x_holds].fingerprint.value;
                if (relayed) {
                    received = probes_[*relayed].fingerprint.value;
                    ++out.cost.messages;
                }
                const auto idx = record({Phase::Check2, EdgeKind::Relay, round, xn, mem.node, qn, qn, expected, received});
                std::optional<AlarmReason> reason;
                if (relayed && !probes_[*relayed].authentic) reason = AlarmReason::BadSignature;
                else if (!relayed && mem.informed) reason = AlarmReason::MissingMessage;
                else if (relayed && !mem.informed && mem.scheduled_before) reason = AlarmReason::LateDelivery;
                if (relayed && probes_[*relayed].authentic) held[j + 1][v] = relayed;
                if (reason) raise(out.alarms, Alarm{mem.node, qn, Phase::Check2, round, *reason, {idx}});
            }
            out.cost.rounds += 2;
        }

        std::vector<NodeId> exit_senders;
        for (const auto& mem : S[l - 1]) exit_senders.push_back(mem.node);
        check_exit(s, sp, held[l - 1], exit_senders, Phase::Check2, round, out);

        Check2RoundTrace trace{round, {}, {}};
        for (std::size_t j = 0; j < l; ++j) {
            std::vector<NodeId> nodes;
            std::vector<NodeId> receivers;
            for (std::size_t v = 0; v < S[j].size(); ++v) {
                nodes.push_back(S[j][v].node);
                if (held[j][v]) {
                    receivers.push_back(S[j][v].node);
                    S[j][v].informed = true;
                }
            }
            trace.subquorums.push_back(std::move(nodes));
            trace.receivers.push_back(std::move(receivers));
        }
        check2_trace_.push_back(std::move(trace));
        out.rounds_run = round;
        if (out.raised()) break;
    }

    out.subquorums.resize(l);
    for (std::size_t j = 0; j < l; ++j) {
        for (const auto& mem : S[j]) out.subquorums[j].push_back(mem.node);
        std::sort(out.subquorums[j].begin(), out.subquorums[j].end());
    }
    return out;
}

bool Protocol::verify_evidence(const Alarm& alarm) const {
    if (alarm.evidence.empty()) return false;
    const auto& records = transcript_.records;
    bool missing = false;
    bool unauthentic = false;
    bool delivered = false;
    std::set<std::uint64_t> contents;
    for (std::size_t idx : alarm.evidence) {
        if (idx >= records.size()) return false;
        const auto& rec = records[idx];
        if (rec.to != alarm.node || rec.to_quorum != alarm.quorum || rec.phase != alarm.phase) return false;
        if (!rec.received) {
            missing = true;
            continue;
        }
        const auto probe = probe_of(rec.received);
        if (!probe) return false;
        delivered = true;
        contents.insert(probes_[*probe].content.value);
        if (!probes_[*probe].authentic) unauthentic = true;
    }
    switch (alarm.reason) {
    case AlarmReason::MissingMessage: return missing;
    case AlarmReason::InconsistentCopies: return contents.size() > 1;
    case AlarmReason::BadSignature: return unauthentic;
    case AlarmReason::LateDelivery:
    case AlarmReason::PayloadMismatch: return delivered;
    }
    return false;
}

UpdateResult Protocol::update(const Alarm& alarm, NodeId s, NodeId r, const QuorumPath& path) {
    UpdateResult res;
    const std::uint64_t initiator_size = graph_->members(alarm.quorum).size();
    res.cost.messages += 3 * initiator_size;
    res.cost.rounds += 3;
    if (!verify_evidence(alarm)) return res;

    for (QuorumId q : path.quorums) res.cost.messages += initiator_size * graph_->members(q).size();
    res.cost.rounds += 1;

    std::set<NodeId> involved;
    for (NodeId x : graph_->members(path.quorums.front())) involved.insert(x);
    for (NodeId x : graph_->members(path.quorums.back())) involved.insert(x);
    for (const auto& rec : transcript_.records) {
        involved.insert(rec.from);
        involved.insert(rec.to);
    }
    involved.erase(s);
    involved.erase(r);
    for (NodeId x : involved) {
        for (QuorumId q : graph_->quorums_of(x)) res.cost.messages += broadcast_fanout_cost(q);
    }
    res.cost.rounds += 3;

    using Key = std::tuple<std::uint32_t, std::uint8_t, std::uint32_t, std::uint8_t, NodeId, bool, NodeId>;
    std::vector<std::pair<Key, std::size_t>> order;
    const auto& records = transcript_.records;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.conflicting()) continue;
        if (rec.from == s || rec.from == r || rec.to == s || rec.to == r || rec.from == rec.to) continue;
        order.emplace_back(Key{rec.from_quorum.level, static_cast<std::uint8_t>(rec.phase), rec.round,
                               static_cast<std::uint8_t>(rec.kind), rec.from, marks_->is_marked(rec.to), rec.to},
                           i);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [key, i] : order) {
        const auto& rec = records[i];
        res.conflicts.push_back(ConflictPair{rec.from, rec.to, rec.from_quorum, rec.to_quorum,
                                             "record " + std::to_string(i) + " phase " +
                                                 std::to_string(static_cast<int>(rec.phase)) + " round " +
                                                 std::to_string(rec.round)});
    }
    if (res.conflicts.empty()) return res;

    res.accepted = true;
    res.marked = res.conflicts.front();
    res.marks = marks_->record_conflicts(std::span<const ConflictPair>(&*res.marked, 1));
    res.cost += res.marks.cost;
    return res;
}

NaiveResult Protocol::naive_send(NodeId s, Payload m, NodeId r, const QuorumPath& path) {
    (void)s;
    (void)r;
    NaiveResult res;
    const auto l = static_cast<std::uint32_t>(path.quorums.size());
    std::optional<Payload> level_value = m;
    res.cost.messages += graph_->members(path.quorums.front()).size();
    res.cost.rounds += 1;
    for (std::uint32_t i = 0; i < l; ++i) {
        const auto members = graph_->members(path.quorums[i]);
        const std::uint64_t fan = i + 1 < l ? graph_->members(path.quorums[i + 1]).size() : 1;
        std::vector<Payload> sent;
        if (level_value) {
            for (NodeId u : members) {
                switch (behavior_->decide(u, DutyContext{Duty::QuorumRelay, Phase::Baseline, i + 1, 0})) {
                case Action::Comply: sent.push_back(*level_value); break;
                case Action::Drop: continue;
                default: sent.push_back(behavior_->corrupt(u, *level_value)); break;
                }
                res.cost.messages += fan;
            }
        }
        // Every receiver gets the same multiset, so one plurality stands for all of them.
        level_value = plurality(sent);
        res.cost.rounds += 1;
    }
    res.delivered = level_value;
    return res;
}

SendResult Protocol::send(NodeId s, Payload m, NodeId r) {
    transcript_.clear();
    check2_trace_.clear();
    probes_.clear();
    probe_index_.clear();
    check2_key_.reset();
    ++send_index_;
    behavior_->begin_send(send_index_);

    SendResult res;
    const QuorumPath path = graph_->quorum_path(s, r);
    res.path = send_path(s, m, r, path);
    res.cost += res.path.cost;
    if (coin_rng_.bernoulli(params_.p_call)) {
        res.check = params_.variant == CheckVariant::Check1 ? check1(s, m, r, res.path) : check2(s, m, r, res.path);
        res.cost += res.check->cost;
        if (res.check->raised() && params_.run_update) {
            res.update = update(res.check->alarms.front(), s, r, path);
            res.cost += res.update->cost;
        }
    }
    res.corrupted = res.path.delivered != std::optional<Payload>(m);
    if (!res.corrupted) res.outcome = SendOutcome::DeliveredClean;
    else if (res.update) res.outcome = SendOutcome::CorruptionDetectedAndUpdated;
    else res.outcome = SendOutcome::CorruptedUndetected;
    return res;
}

} // namespace shbft

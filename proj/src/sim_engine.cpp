#include "shbft/sim_engine.hpp"

#include "shbft/crypto_sim.hpp"
#include "shbft/membership.hpp"
#include "shbft/quorum_graph.hpp"
#include "shbft/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace shbft {

std::uint32_t SimConfig::t() const { return static_cast<std::uint32_t>(std::floor(f * n + 1e-9)); }

void SimConfig::validate() const {
    if (n < 16) throw ConfigError("n must be at least 16");
    if (f < 0.0 || f > 0.125) throw ConfigError("f must lie in [0, 1/8]");
    if (sends == 0) throw ConfigError("sends must be positive");
    if (h == 0) throw ConfigError("h must be positive");
}

double Metrics::mean_messages() const {
    return sends.empty() ? 0.0 : static_cast<double>(total_messages) / static_cast<double>(sends.size());
}

double Metrics::mean_rounds() const {
    return sends.empty() ? 0.0 : static_cast<double>(total_rounds) / static_cast<double>(sends.size());
}

std::string Metrics::to_csv() const {
    std::ostringstream out;
    out << "index,messages,rounds,corrupted,detected,updates_so_far,marked_bad,marked_good\n";
    for (const auto& r : sends) {
        out << r.index << ',' << r.messages << ',' << r.rounds << ',' << (r.corrupted ? 1 : 0) << ','
            << (r.detected ? 1 : 0) << ',' << r.updates_so_far << ',' << r.marked_bad << ',' << r.marked_good << '\n';
    }
    return out.str();
}

nlohmann::json Metrics::summary() const {
    nlohmann::json j;
    j["n"] = config.n;
    j["f"] = config.f;
    j["t"] = t;
    j["check"] = static_cast<int>(config.variant);
    j["strategy"] = to_string(config.strategy);
    j["seed"] = config.seed;
    j["force_check"] = config.force_check;
    j["validation"] = config.validation == ValidationMode::Enforce ? "enforce" : "report";
    j["quorum_size"] = quorum_size;
    j["levels"] = levels;
    j["violating_quorums"] = violating_quorums;
    j["max_bad_in_quorum"] = max_bad_in_quorum;
    j["sends"] = sends.size();
    j["total_messages"] = total_messages;
    j["mean_messages"] = mean_messages();
    j["mean_rounds"] = mean_rounds();
    j["max_rounds"] = max_rounds_per_send;
    j["corruptions"] = corruptions;
    j["checks"] = checks;
    j["detections"] = detections;
    j["corrupted_checked"] = corrupted_checked;
    j["corrupted_detected"] = corrupted_detected;
    j["updates"] = updates;
    j["rejected_updates"] = rejected_updates;
    j["rejected_on_corrupted"] = rejected_on_corrupted;
    j["marks"] = marks;
    j["unmarks"] = unmarks;
    j["conflict_pairs"] = conflict_pairs;
    j["pairs_without_bad"] = pairs_without_bad;
    j["accepted_without_pairs"] = accepted_without_pairs;
    j["bar_violations"] = bar_violations;
    j["all_bad_marked_at"] = all_bad_marked_at;
    j["updates_before_all_marked"] = updates_before_all_marked;
    j["final_marked_bad"] = final_marked_bad;
    j["final_marked_good"] = final_marked_good;
    if (!update_deltas.empty()) {
        j["min_update_delta"] = *std::min_element(update_deltas.begin(), update_deltas.end());
    }
    return j;
}

namespace {

std::uint64_t check2_bar_violations(std::span<const Check2RoundTrace> trace) {
    std::uint64_t bad = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& now = trace[i];
        for (std::size_t j = 0; j < now.subquorums.size(); ++j) {
            const auto& sub = now.subquorums[j];
            for (NodeId x : now.receivers[j]) {
                if (std::find(sub.begin(), sub.end(), x) == sub.end()) ++bad;
            }
            if (i == 0) continue;
            const auto& before = trace[i - 1].subquorums[j];
            // Subquorums only grow, by at most one node per round.
            if (sub.size() < before.size() || sub.size() > before.size() + 1) ++bad;
            for (std::size_t k = 0; k < std::min(before.size(), sub.size()); ++k) {
                if (before[k] != sub[k]) ++bad;
            }
        }
    }
    return bad;
}

struct Trial {
    explicit Trial(const SimConfig& config)
        : cfg(config), graph(QuorumGraph::build_butterfly(config.n, config.seed)),
          corruption(corrupt_nodes(graph, config.t(), mix64(config.seed ^ 0xC0FFEE), config.validation, config.retries)),
          truth(config.n, corruption.bad), crypto(graph, config.seed), marks(graph),
          adversary(graph, truth, config.strategy), endpoints(config.seed, "endpoints"), payloads(config.seed, "payloads") {
        for (std::uint32_t i = 0; i < config.n; ++i) {
            if (config.allow_bad_endpoints || !truth.is_bad(NodeId{i})) eligible.push_back(NodeId{i});
        }
        if (eligible.size() < 2) throw ConfigError("fewer than two eligible endpoints");
        metrics.config = config;
        metrics.t = config.t();
        metrics.quorum_size = graph.quorum_size();
        metrics.levels = graph.levels();
        metrics.violating_quorums = corruption.violating_quorums;
        metrics.max_bad_in_quorum = corruption.max_bad_in_quorum;
        metrics.corruption_attempts = corruption.attempts;
    }

    std::pair<NodeId, NodeId> draw_endpoints() {
        const NodeId s = eligible[endpoints.index(eligible.size())];
        NodeId r = s;
        while (r == s) r = eligible[endpoints.index(eligible.size())];
        return {s, r};
    }

    SimConfig cfg;
    QuorumGraph graph;
    Corruption corruption;
    GroundTruth truth;
    CryptoSim crypto;
    MarkTable marks;
    Adversary adversary;
    RngStream endpoints;
    RngStream payloads;
    std::vector<NodeId> eligible;
    Metrics metrics;
};

} // namespace

Metrics run_trial(const SimConfig& config) {
    config.validate();
    Trial trial(config);
    auto params = ProtocolParams::for_network(config.n, config.variant, config.force_check);
    params.run_update = config.apply_updates;
    Protocol protocol(trial.graph, trial.crypto, trial.marks, trial.adversary, params, mix64(config.seed ^ 0x5E4D));
    Metrics& m = trial.metrics;
    std::int64_t marked_bad = 0;
    std::int64_t marked_good = 0;
    const auto t = static_cast<std::int64_t>(trial.truth.bad_count());

    for (std::uint64_t i = 1; i <= config.sends; ++i) {
        const auto [s, r] = trial.draw_endpoints();
        const Payload payload{trial.payloads.next()};
        const SendResult res = protocol.send(s, payload, r);

        SendRecord rec;
        rec.index = i;
        rec.messages = res.cost.messages;
        rec.rounds = res.cost.rounds;
        rec.corrupted = res.corrupted;
        rec.check_ran = res.check.has_value();
        rec.detected = res.check && res.check->raised();

        m.checks += rec.check_ran ? 1 : 0;
        m.detections += rec.detected ? 1 : 0;
        if (rec.corrupted) {
            ++m.corruptions;
            if (rec.check_ran) ++m.corrupted_checked;
            if (rec.detected) ++m.corrupted_detected;
        }
        if (res.check && res.check->variant == CheckVariant::Check2) {
            m.bar_violations += check2_bar_violations(protocol.check2_trace());
        }
        if (res.update) {
            const auto& up = *res.update;
            if (!up.accepted) {
                ++m.rejected_updates;
                if (rec.corrupted) ++m.rejected_on_corrupted;
            } else {
                ++m.updates;
                if (up.conflicts.empty()) ++m.accepted_without_pairs;
                for (const auto& pair : up.conflicts) {
                    ++m.conflict_pairs;
                    if (!trial.truth.is_bad(pair.u) && !trial.truth.is_bad(pair.v)) ++m.pairs_without_bad;
                }
                const double before = static_cast<double>(marked_bad) - static_cast<double>(marked_good) / 3.0;
                for (NodeId x : up.marks.newly_marked) (trial.truth.is_bad(x) ? marked_bad : marked_good) += 1;
                for (NodeId x : up.marks.unmarked) (trial.truth.is_bad(x) ? marked_bad : marked_good) -= 1;
                m.marks += up.marks.newly_marked.size();
                m.unmarks += up.marks.unmarked.size();
                const double after = static_cast<double>(marked_bad) - static_cast<double>(marked_good) / 3.0;
                m.update_deltas.push_back(after - before);
            }
        }
        rec.updates_so_far = m.updates;
        rec.marked_bad = static_cast<std::uint64_t>(marked_bad);
        rec.marked_good = static_cast<std::uint64_t>(marked_good);
        m.total_messages += rec.messages;
        m.total_rounds += rec.rounds;
        m.max_rounds_per_send = std::max(m.max_rounds_per_send, rec.rounds);
        m.sends.push_back(rec);

        if (t > 0 && marked_bad == t && m.all_bad_marked_at == 0) {
            m.all_bad_marked_at = i;
            m.updates_before_all_marked = m.updates;
            if (config.stop_when_all_bad_marked) break;
        }
    }
    m.final_marked_bad = static_cast<std::uint64_t>(marked_bad);
    m.final_marked_good = static_cast<std::uint64_t>(marked_good);
    return m;
}

Metrics run_baseline_trial(const SimConfig& config) {
    config.validate();
    Trial trial(config);
    auto params = ProtocolParams::for_network(config.n, config.variant, config.force_check);
    Protocol protocol(trial.graph, trial.crypto, trial.marks, trial.adversary, params, mix64(config.seed ^ 0x5E4D));
    Metrics& m = trial.metrics;
    for (std::uint64_t i = 1; i <= config.sends; ++i) {
        const auto [s, r] = trial.draw_endpoints();
        const Payload payload{trial.payloads.next()};
        trial.adversary.begin_send(i);
        const NaiveResult res = protocol.naive_send(s, payload, r, trial.graph.quorum_path(s, r));
        SendRecord rec;
        rec.index = i;
        rec.messages = res.cost.messages;
        rec.rounds = res.cost.rounds;
        rec.corrupted = res.delivered != std::optional<Payload>(payload);
        m.corruptions += rec.corrupted ? 1 : 0;
        m.total_messages += rec.messages;
        m.total_rounds += rec.rounds;
        m.max_rounds_per_send = std::max(m.max_rounds_per_send, rec.rounds);
        m.sends.push_back(rec);
    }
    return m;
}

} // namespace shbft

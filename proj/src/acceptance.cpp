#include "shbft/acceptance.hpp"

#include "shbft/crypto_sim.hpp"
#include "shbft/experiments.hpp"
#include "shbft/oracles.hpp"
#include "shbft/rng.hpp"
#include "shbft/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace shbft {

namespace {

// Targets and tolerances.
constexpr double kBaseline14116 = 30516.0;
constexpr double kBaseline30509 = 39170.0;
constexpr double kHealing14116 = 525.0;
constexpr double kHealing30509 = 562.0;
constexpr double kBaselineTolerance = 0.10;
constexpr double kHealingTolerance = 0.25;
constexpr double kMinReduction14116 = 40.0;
constexpr double kMinReduction30509 = 50.0;
constexpr std::uint64_t kLongRun = 100000;
constexpr std::uint64_t kBaselineSends = 300;
constexpr std::uint64_t kUpdateBudgetSeeds = 100;
constexpr std::uint64_t kUpdateBudgetSendCap = 200000;
constexpr double kMinPotentialGain = 2.0 / 3.0 - 1e-9;
constexpr std::uint64_t kDetectionSends = 4000;
constexpr std::uint64_t kMinCorruptedSends = 2000;
constexpr double kMinDetection = 0.48;
constexpr double kRunBound = 0.5;
constexpr double kDpAgreement = 1e-12;
constexpr double kControlConstant = 40.0;
constexpr std::uint64_t kControlSends = 2000;

std::string fmt(double v, int precision = 4) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol * target; }

SimConfig config(std::uint32_t n, double f, CheckVariant variant, std::uint64_t sends, std::uint64_t seed,
                 Strategy strategy, ValidationMode mode) {
    SimConfig c;
    c.n = n;
    c.f = f;
    c.variant = variant;
    c.sends = sends;
    c.seed = seed;
    c.strategy = strategy;
    c.validation = mode;
    return c;
}

struct Job {
    SimConfig config;
    bool baseline{};
    Metrics metrics;
    std::string error;
};

void run_jobs(std::vector<Job>& jobs, unsigned threads, std::ostream* log) {
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            auto& job = jobs[i];
            try {
                job.metrics = job.baseline ? run_baseline_trial(job.config) : run_trial(job.config);
            } catch (const std::exception& e) {
                job.error = e.what();
            }
            if (log && (job.config.sends >= 1000 || !job.error.empty())) {
                std::lock_guard lock(log_mutex);
                *log << "  finished n=" << job.config.n << " f=" << fraction_label(job.config.f) << " check "
                     << static_cast<int>(job.config.variant) << " " << to_string(job.config.strategy)
                     << (job.baseline ? " baseline" : "") << " seed " << job.config.seed
                     << (job.error.empty() ? "" : " ERROR " + job.error) << '\n';
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads ? threads : std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>(jobs.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < count; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

CriterionResult cost_criterion(int id, std::uint32_t n, const Job& base, const Job& heal, double base_target,
                               double heal_target, double min_reduction) {
    CriterionResult r{id, "message cost n=" + std::to_string(n), false, {}};
    if (!base.error.empty() || !heal.error.empty()) {
        r.detail = "trial failed: " + base.error + heal.error;
        return r;
    }
    const double b = base.metrics.mean_messages();
    const double h = final_quartile_mean(heal.metrics);
    const double factor = b / h;
    r.passed = within(b, base_target, kBaselineTolerance) && within(h, heal_target, kHealingTolerance) &&
               factor >= min_reduction;
    r.detail = "baseline " + fmt(b, 6) + " (target " + fmt(base_target, 6) + " +-10%), self-healing final quartile " +
               fmt(h) + " (target " + fmt(heal_target) + " +-25%), reduction " + fmt(factor, 3) + " (>= " +
               fmt(min_reduction) + ")";
    return r;
}

CriterionResult run_length_oracle() {
    CriterionResult r{6, "run-length oracle", true, {}};
    const double p = 0.25;
    const std::uint64_t max_x = std::uint64_t{1} << 16;
    double worst = 0.0;
    std::uint64_t worst_x = 0;
    for (std::uint32_t len = 1; len <= 16; ++len) {
        const auto curve = oracles::longest_run_curve(max_x, p, len);
        for (std::uint64_t x = 1; x <= max_x; ++x) {
            if (oracles::run_length_for(x) != len) continue;
            if (curve[x - 1] > worst) {
                worst = curve[x - 1];
                worst_x = x;
            }
        }
    }
    double max_gap = 0.0;
    for (std::uint32_t x = 1; x <= 16; ++x) {
        const double dp = oracles::longest_run_prob({x, p, 0});
        const double bf = oracles::longest_run_brute_force(x, p, oracles::run_length_for(x));
        max_gap = std::max(max_gap, std::abs(dp - bf));
    }
    r.passed = worst <= kRunBound && max_gap <= kDpAgreement;
    r.detail = "max probability " + fmt(worst, 6) + " at x=" + std::to_string(worst_x) + " (<= 0.5); DP vs enumeration gap " +
               fmt(max_gap, 3) + " for x <= 16";
    return r;
}

CriterionResult threshold_sweep() {
    CriterionResult r{8, "threshold semantics", true, {}};
    std::ostringstream detail;
    for (std::uint32_t q : {8u, 16u, 55u}) {
        std::vector<NodeId> members(q);
        for (std::uint32_t i = 0; i < q; ++i) members[i] = NodeId{i};
        const auto graph = QuorumGraph::from_quorums(q, 1, 1, {members});
        CryptoSim crypto(graph, 99 + q);
        const QuorumId quorum{1, 0};
        const auto need = static_cast<std::size_t>(std::ceil(7.0 * q / 8.0));
        const std::string message = "sweep-" + std::to_string(q);
        const Digest d = crypto.digest(message);
        const Digest other = crypto.digest(message + "-other");
        RngStream rng(q, "threshold-sweep");
        std::size_t mismatches = 0;
        for (std::size_t k = 0; k <= q; ++k) {
            std::vector<NodeId> order = members;
            rng.shuffle(std::span<NodeId>(order));
            std::vector<SignatureShare> shares;
            for (std::size_t i = 0; i < k; ++i) shares.push_back(crypto.sign_share(order[i], quorum, d));
            // Noise that must never count: duplicates, shares over another
            // message, and tokens not issued to the claimed signer.
            if (k > 0) shares.push_back(shares.front());
            for (std::size_t i = k; i < q; ++i) {
                shares.push_back(crypto.sign_share(order[i], quorum, other));
                auto forged = crypto.sign_share(order[i], quorum, d);
                forged.share_token.bits ^= 0x5A5A;
                shares.push_back(forged);
            }
            const bool ok = crypto.try_combine(quorum, d, shares).has_value();
            bool threw = false;
            try {
                const auto sm = crypto.combine_shares(quorum, message, shares);
                if (!crypto.verify(crypto.key_pair(quorum).public_key, sm)) ++mismatches;
            } catch (const ThresholdNotMet&) {
                threw = true;
            }
            if (ok != (k >= need) || threw == ok) ++mismatches;
        }
        if (mismatches) r.passed = false;
        detail << "|Q|=" << q << " threshold " << need << " mismatches " << mismatches << "; ";
    }
    r.detail = detail.str();
    return r;
}

} // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
    const double fs[] = {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};
    const auto report = ValidationMode::Report;
    const auto corrupt = Strategy::AlwaysCorrupt;

    std::vector<Job> jobs;
    auto add = [&](SimConfig c, bool baseline = false) {
        jobs.push_back(Job{c, baseline, {}, {}});
        return jobs.size() - 1;
    };
    const auto base14 = add(config(14116, 1.0 / 16, CheckVariant::Check1, kBaselineSends, 1, corrupt, report), true);
    const auto base30 = add(config(30509, 1.0 / 16, CheckVariant::Check1, kBaselineSends, 1, corrupt, report), true);
    const auto heal30 = add(config(30509, 1.0 / 16, CheckVariant::Check1, kLongRun, 1, corrupt, report));
    std::vector<std::size_t> budget_runs;
    for (double f : fs) budget_runs.push_back(add(config(14116, f, CheckVariant::Check1, kLongRun, 1, corrupt, report)));
    const auto heal14 = budget_runs[2];

    std::vector<std::size_t> budget_trials;
    for (std::uint32_t n : {1024u, 4096u}) {
        for (std::uint64_t seed = 1; seed <= kUpdateBudgetSeeds; ++seed) {
            auto c = config(n, 1.0 / 32, CheckVariant::Check2, kUpdateBudgetSendCap, seed, corrupt, ValidationMode::Enforce);
            c.force_check = true;
            c.stop_when_all_bad_marked = true;
            budget_trials.push_back(add(c));
        }
    }
    std::vector<std::size_t> detection;
    for (Strategy s : {Strategy::IntervalMaintainer, Strategy::AlwaysCorrupt}) {
        auto c = config(4096, 1.0 / 8, CheckVariant::Check2, kDetectionSends, 7, s, report);
        c.force_check = true;
        c.apply_updates = false;
        detection.push_back(add(c));
    }
    const auto control = add(config(14116, 0.0, CheckVariant::Check1, kControlSends, 3, corrupt, report));
    const auto control2 = add(config(4096, 0.0, CheckVariant::Check2, kControlSends, 3, corrupt, report));
    std::vector<std::size_t> determinism;
    for (int rep = 0; rep < 2; ++rep) {
        determinism.push_back(add(config(1024, 1.0 / 16, CheckVariant::Check1, 5000, 11, corrupt, report)));
        auto c = config(1024, 1.0 / 32, CheckVariant::Check2, 1000, 12, Strategy::IntervalMaintainer, report);
        c.force_check = true;
        determinism.push_back(add(c));
    }

    if (options.log) *options.log << "running " << jobs.size() << " trials\n";
    run_jobs(jobs, options.threads, options.log);

    std::vector<CriterionResult> results;
    results.push_back(cost_criterion(1, 14116, jobs[base14], jobs[heal14], kBaseline14116, kHealing14116, kMinReduction14116));
    results.push_back(cost_criterion(2, 30509, jobs[base30], jobs[heal30], kBaseline30509, kHealing30509, kMinReduction30509));

    {
        CriterionResult r{3, "corruption budget (CHECK1)", true, {}};
        std::ostringstream detail;
        for (std::size_t i = 0; i < budget_runs.size(); ++i) {
            const auto& job = jobs[budget_runs[i]];
            if (!job.error.empty()) {
                r.passed = false;
                detail << "f=" << fraction_label(fs[i]) << " failed: " << job.error << "; ";
                continue;
            }
            const auto budget = oracles::corruption_budget(job.metrics.t, 14116, CheckVariant::Check1);
            if (job.metrics.corruptions > budget) r.passed = false;
            detail << "f=" << fraction_label(fs[i]) << " " << job.metrics.corruptions << "/" << budget << "; ";
        }
        r.detail = detail.str();
        results.push_back(r);
    }

    {
        CriterionResult r{4, "UPDATE budget and potential gain", true, {}};
        std::size_t ok = 0;
        std::uint64_t worst_updates = 0;
        double worst_ratio = 0.0;
        double min_gain = 1e9;
        std::uint64_t bars = 0;
        std::string failure;
        for (auto idx : budget_trials) {
            const auto& job = jobs[idx];
            if (!job.error.empty()) {
                failure = job.error;
                continue;
            }
            const auto& m = job.metrics;
            bool good = m.all_bad_marked_at > 0 && 2 * m.updates_before_all_marked <= 3 * std::uint64_t{m.t};
            for (double d : m.update_deltas) {
                min_gain = std::min(min_gain, d);
                good = good && d >= kMinPotentialGain;
            }
            bars += m.bar_violations;
            worst_updates = std::max(worst_updates, m.updates_before_all_marked);
            worst_ratio = std::max(worst_ratio, static_cast<double>(m.updates_before_all_marked) / m.t);
            ok += good ? 1 : 0;
        }
        r.passed = ok == budget_trials.size();
        r.detail = std::to_string(ok) + "/" + std::to_string(budget_trials.size()) + " trials; max updates/t " + fmt(worst_ratio, 3) +
                   " (<= 1.5); min potential gain " + fmt(min_gain, 4) + " (>= 2/3); subquorum trace violations " +
                   std::to_string(bars) + (failure.empty() ? "" : "; error: " + failure);
        results.push_back(r);
    }

    {
        CriterionResult r{5, "CHECK2 detection rate", true, {}};
        std::ostringstream detail;
        for (auto idx : detection) {
            const auto& job = jobs[idx];
            if (!job.error.empty()) {
                r.passed = false;
                detail << job.error << "; ";
                continue;
            }
            const auto& m = job.metrics;
            const double rate = m.corrupted_checked ? static_cast<double>(m.corrupted_detected) / m.corrupted_checked : 0.0;
            if (m.corrupted_checked < kMinCorruptedSends || rate < kMinDetection) r.passed = false;
            detail << to_string(job.config.strategy) << " " << m.corrupted_detected << "/" << m.corrupted_checked << " = "
                   << fmt(rate) << "; ";
        }
        r.detail = detail.str() + "(>= 0.48 over >= 2000 corrupted sends)";
        results.push_back(r);
    }

    results.push_back(run_length_oracle());

    {
        CriterionResult r{7, "conflict soundness", true, {}};
        std::uint64_t pairs = 0, unsound = 0, empty = 0, rejected = 0, updates = 0;
        for (const auto& job : jobs) {
            if (job.baseline || !job.error.empty()) continue;
            pairs += job.metrics.conflict_pairs;
            unsound += job.metrics.pairs_without_bad;
            empty += job.metrics.accepted_without_pairs;
            rejected += job.metrics.rejected_on_corrupted;
            updates += job.metrics.updates;
        }
        r.passed = unsound == 0 && empty == 0 && rejected == 0 && pairs > 0;
        r.detail = std::to_string(pairs) + " pairs over " + std::to_string(updates) + " UPDATEs, " + std::to_string(unsound) +
                   " without a bad node, " + std::to_string(empty + rejected) + " UPDATEs after corruption with no pair";
        results.push_back(r);
    }

    results.push_back(threshold_sweep());

    {
        CriterionResult r{9, "f = 0 control", true, {}};
        const auto& job = jobs[control];
        const auto& job2 = jobs[control2];
        if (!job.error.empty() || !job2.error.empty()) {
            r.passed = false;
            r.detail = job.error + job2.error;
        } else {
            const auto& m = job.metrics;
            const double bound = kControlConstant * (m.levels + std::log2(14116.0));
            const double peak = static_cast<double>(std::max_element(m.sends.begin(), m.sends.end(), [](const auto& a, const auto& b) {
                                                        return a.messages < b.messages;
                                                    })->messages);
            r.passed = m.corruptions == 0 && m.updates == 0 && m.detections == 0 && m.mean_messages() <= bound &&
                       job2.metrics.corruptions == 0 && job2.metrics.updates == 0;
            r.detail = "CHECK1 n=14116: corruptions " + std::to_string(m.corruptions) + ", UPDATEs " +
                       std::to_string(m.updates) + ", mean messages " + fmt(m.mean_messages()) + " <= " + fmt(bound) +
                       " (peak " + fmt(peak) + "); CHECK2 n=4096: corruptions " + std::to_string(job2.metrics.corruptions) +
                       ", UPDATEs " + std::to_string(job2.metrics.updates) + ", mean messages " +
                       fmt(job2.metrics.mean_messages());
        }
        results.push_back(r);
    }

    {
        CriterionResult r{10, "determinism", true, {}};
        std::ostringstream detail;
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& a = jobs[determinism[k]];
            const auto& b = jobs[determinism[k + 2]];
            const bool same = a.error.empty() && b.error.empty() && a.metrics.to_csv() == b.metrics.to_csv() &&
                              a.metrics.summary().dump() == b.metrics.summary().dump();
            if (!same) r.passed = false;
            detail << "check " << static_cast<int>(a.config.variant) << " " << a.metrics.sends.size() << " rows "
                   << (same ? "identical" : "DIFFER") << "; ";
        }
        r.detail = detail.str();
        results.push_back(r);
    }
    return results;
}

std::string format_results(const std::vector<CriterionResult>& results) {
    std::ostringstream out;
    for (const auto& r : results) {
        out << (r.passed ? "PASS" : "FAIL") << "  " << r.id << "  " << r.name << "  " << r.detail << '\n';
    }
    return out.str();
}

} // namespace shbft

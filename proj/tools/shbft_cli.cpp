#include "shbft/acceptance.hpp"
#include "shbft/experiments.hpp"
#include "shbft/oracles.hpp"
#include "shbft/protocol.hpp"
#include "shbft/quorum_graph.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

using namespace shbft;

namespace {

struct GridFlags {
    std::vector<std::uint32_t> ns{14116};
    std::vector<double> fs{1.0 / 16};
    int check{1};
    std::uint64_t sends{100000};
    std::vector<std::uint64_t> seeds{1};
    std::string strategy{"always-corrupt"};
    bool force_check{};
    bool baseline{};
    std::string validation{"report"};
    std::size_t window{1000};
    unsigned threads{0};
    std::string out{"results"};
};

void add_grid_flags(CLI::App* cmd, GridFlags& g, bool with_baseline) {
    cmd->add_option("--n", g.ns, "node counts")->capture_default_str();
    cmd->add_option("--f", g.fs, "bad fractions, each at most 1/8")->capture_default_str();
    cmd->add_option("--check", g.check, "CHECK variant")->check(CLI::IsMember({1, 2}))->capture_default_str();
    cmd->add_option("--sends", g.sends, "SENDs per trial")->capture_default_str();
    cmd->add_option("--seeds", g.seeds, "trial seeds")->capture_default_str();
    cmd->add_option("--strategy", g.strategy, "always-corrupt | silent | interval | faithful")->capture_default_str();
    cmd->add_flag("--force-check", g.force_check, "run CHECK after every SEND");
    if (with_baseline) cmd->add_flag("--baseline", g.baseline, "also run the all-to-all baseline");
    cmd->add_option("--validation", g.validation, "enforce | report")->check(CLI::IsMember({"enforce", "report"}))->capture_default_str();
    cmd->add_option("--window", g.window, "curve smoothing window")->capture_default_str();
    cmd->add_option("--threads", g.threads, "worker threads, 0 for all cores")->capture_default_str();
    cmd->add_option("--out", g.out, "output directory")->capture_default_str();
}

ExperimentGrid to_grid(const GridFlags& g) {
    ExperimentGrid grid;
    grid.ns = g.ns;
    grid.fs = g.fs;
    grid.variant = g.check == 2 ? CheckVariant::Check2 : CheckVariant::Check1;
    grid.sends = g.sends;
    grid.seeds = g.seeds;
    grid.strategy = parse_strategy(g.strategy);
    grid.force_check = g.force_check;
    grid.validation = g.validation == "enforce" ? ValidationMode::Enforce : ValidationMode::Report;
    grid.window = g.window;
    grid.threads = g.threads;
    grid.out = g.out;
    return grid;
}

int report_grid(const GridResult& result) {
    int failures = 0;
    for (const auto& t : result.trials) {
        if (!t.error.empty()) {
            ++failures;
            std::cerr << "trial n=" << t.config.n << " f=" << fraction_label(t.config.f) << " seed " << t.config.seed
                      << " failed: " << t.error << '\n';
        }
    }
    std::cout << result.summary["series"].dump(2) << '\n';
    if (!result.grid.out.empty()) std::cout << "wrote " << result.grid.out.string() << '\n';
    return failures ? 1 : 0;
}

void oracle_report() {
    std::printf("%-34s %s\n", "quantity", "value");
    for (double x : {2.0, 16.0, 65536.0, 1e10, 14116.0, 30509.0}) {
        std::printf("log* %-29.6g %u\n", x, oracles::iterated_log(x));
    }
    std::printf("log* 2^65536%22s %u\n", "", oracles::iterated_log_pow2(65536.0));
    for (std::uint64_t x : {1ull, 2ull, 16ull, 1000ull, 65536ull}) {
        std::printf("run prob x=%-6llu p=1/4 len=%-8u %.6f\n", static_cast<unsigned long long>(x),
                    oracles::run_length_for(x), oracles::longest_run_prob({x, 0.25, 0}));
    }
    for (std::uint32_t n : {1024u, 4096u, 14116u, 30509u}) {
        const auto l = QuorumGraph::levels_for(n);
        std::printf("n=%-6u l=%-2u |Q|=%-3u check1 bound %.4f exact(q=1/4) %.4f\n", n, l, QuorumGraph::quorum_size_for(n),
                    oracles::check1_failure_bound(l, n), oracles::check1_failure_exact(l, n, 0.25));
    }
    for (double f : {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8}) {
        const auto t = static_cast<std::uint64_t>(std::floor(f * 14116));
        std::printf("budget n=14116 f=%-8s t=%-5llu check1 %-7llu check2 %llu\n", fraction_label(f).c_str(),
                    static_cast<unsigned long long>(t),
                    static_cast<unsigned long long>(oracles::corruption_budget(t, 14116, CheckVariant::Check1)),
                    static_cast<unsigned long long>(oracles::corruption_budget(t, 14116, CheckVariant::Check2)));
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-healing quorum routing simulator"};
    app.require_subcommand(1);

    GridFlags run_flags;
    auto* run = app.add_subcommand("run", "run a grid of self-healing trials");
    add_grid_flags(run, run_flags, true);

    GridFlags base_flags;
    base_flags.sends = 1000;
    auto* baseline = app.add_subcommand("baseline", "run only the all-to-all baseline");
    add_grid_flags(baseline, base_flags, false);

    app.add_subcommand("oracle-report", "print the analytic oracle table");

    unsigned accept_threads = 0;
    auto* accept = app.add_subcommand("accept", "run acceptance criteria 1-10");
    accept->add_option("--threads", accept_threads, "worker threads, 0 for all cores");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto grid = to_grid(run_flags);
            grid.baseline = run_flags.baseline;
            return report_grid(run_grid(grid));
        }
        if (*baseline) {
            auto grid = to_grid(base_flags);
            grid.self_healing = false;
            grid.baseline = true;
            return report_grid(run_grid(grid));
        }
        if (app.got_subcommand("oracle-report")) {
            oracle_report();
            return 0;
        }
        if (*accept) {
            const auto results = run_acceptance({accept_threads, &std::cerr});
            std::cout << format_results(results);
            for (const auto& r : results) {
                if (!r.passed) return 1;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

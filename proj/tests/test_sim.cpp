#include "shbft/experiments.hpp"
#include "shbft/sim_engine.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shbft;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

SimConfig small(double f, std::uint64_t seed) {
    SimConfig c;
    c.n = 1024;
    c.f = f;
    c.sends = 300;
    c.seed = seed;
    c.validation = ValidationMode::Report;
    return c;
}

} // namespace

TEST_CASE("config validation") {
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    c.f = 0.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.f = 0.0;
    c.n = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.n = 1024;
    c.sends = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.sends = 1;
    c.f = 1.0 / 8;
    CHECK(c.t() == 128);
    c.n = 14116;
    CHECK(c.t() == 1764);
}

TEST_CASE("without bad nodes nothing is corrupted") {
    const auto m = run_trial(small(0.0, 3));
    CHECK(m.t == 0);
    CHECK(m.sends.size() == 300);
    CHECK(m.corruptions == 0);
    CHECK(m.detections == 0);
    CHECK(m.updates == 0);
    CHECK(m.final_marked_bad + m.final_marked_good == 0);
}

TEST_CASE("trials are reproducible from the seed") {
    const auto a = run_trial(small(1.0 / 16, 5));
    const auto b = run_trial(small(1.0 / 16, 5));
    const auto c = run_trial(small(1.0 / 16, 6));
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.summary() == b.summary());
    CHECK(a.to_csv() != c.to_csv());
    CHECK(a.to_csv().rfind("index,messages,rounds,corrupted,detected,updates_so_far,marked_bad,marked_good\n", 0) == 0);
}

TEST_CASE("self-healing marks only through conflicts and lowers corruption") {
    auto cfg = small(1.0 / 16, 7);
    cfg.sends = 2000;
    const auto m = run_trial(cfg);
    CHECK(m.corruptions > 0);
    CHECK(m.updates > 0);
    CHECK(m.pairs_without_bad == 0);
    CHECK(m.accepted_without_pairs == 0);
    for (double d : m.update_deltas) CHECK(d >= 2.0 / 3 - 1e-9);
    std::uint64_t late = 0;
    for (std::size_t i = m.sends.size() - 500; i < m.sends.size(); ++i) late += m.sends[i].corrupted;
    std::uint64_t early = 0;
    for (std::size_t i = 0; i < 500; ++i) early += m.sends[i].corrupted;
    CHECK(late < early);
}

TEST_CASE("baseline costs the same for every SEND") {
    const auto m = run_baseline_trial(small(1.0 / 32, 2));
    REQUIRE_FALSE(m.sends.empty());
    for (const auto& r : m.sends) CHECK(r.messages == m.sends.front().messages);
    CHECK(m.updates == 0);
}

TEST_CASE("grid helpers") {
    CHECK(fraction_label(1.0 / 16) == "1-16");
    CHECK(fraction_label(0.0) == "0");
    CHECK(fraction_label(0.3) != "");
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(smooth(v, 2) == std::vector<double>{1, 1.5, 2.5, 3.5});
    CHECK(smooth(v, 10) == std::vector<double>{1, 1.5, 2, 2.5});

    Metrics m;
    for (std::uint64_t i = 0; i < 8; ++i) m.sends.push_back(SendRecord{i, i < 6 ? 100u : 10u});
    CHECK(final_quartile_mean(m) == doctest::Approx(10.0));

    ExperimentGrid g;
    g.seeds = {};
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g.seeds = {1, 1};
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("grid output is byte-identical across reruns") {
    const auto root = std::filesystem::temp_directory_path() / "shbft_grid_test";
    std::filesystem::remove_all(root);
    ExperimentGrid g;
    g.ns = {256};
    g.fs = {1.0 / 16};
    g.sends = 200;
    g.seeds = {1, 2};
    g.window = 50;
    g.threads = 2;
    for (const char* run : {"a", "b"}) {
        g.out = root / run;
        const auto res = run_grid(g);
        CHECK(res.trials.size() == 4);
        for (const auto& t : res.trials) CHECK(t.error.empty());
    }
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto rel = std::filesystem::relative(e.path(), root / "a");
        CHECK_MESSAGE(slurp(e.path()) == slurp(root / "b" / rel), rel.string());
    }
    CHECK(files >= 8);
    CHECK(std::filesystem::exists(root / "a" / "summary.json"));
    CHECK(std::filesystem::exists(root / "a" / "figures" / "msgs_curve_n256_f1-16.svg"));
    std::filesystem::remove_all(root);
}

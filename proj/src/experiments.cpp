#include "shbft/experiments.hpp"

#include "shbft/oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace shbft {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string series_stem(std::uint32_t n, double f) { return "n" + std::to_string(n) + "_f" + fraction_label(f); }

std::string trial_stem(const TrialResult& t) {
    return series_stem(t.config.n, t.config.f) + "_seed" + std::to_string(t.config.seed) + (t.baseline ? "_baseline" : "");
}

struct Series {
    std::uint32_t n;
    double f;
    std::vector<const TrialResult*> healing;
    std::vector<const TrialResult*> baseline;
};

std::vector<Series> group(const GridResult& result) {
    std::vector<Series> out;
    for (std::uint32_t n : result.grid.ns) {
        for (double f : result.grid.fs) {
            Series s{n, f, {}, {}};
            for (const auto& t : result.trials) {
                if (t.config.n != n || t.config.f != f || !t.error.empty()) continue;
                (t.baseline ? s.baseline : s.healing).push_back(&t);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Per-index mean over trials, truncated to the shortest trial.
std::vector<double> mean_curve(const std::vector<const TrialResult*>& trials, bool corrupted) {
    if (trials.empty()) return {};
    std::size_t len = trials.front()->metrics.sends.size();
    for (const auto* t : trials) len = std::min(len, t->metrics.sends.size());
    std::vector<double> out(len, 0.0);
    for (const auto* t : trials) {
        for (std::size_t i = 0; i < len; ++i) {
            const auto& rec = t->metrics.sends[i];
            out[i] += corrupted ? (rec.corrupted ? 1.0 : 0.0) : static_cast<double>(rec.messages);
        }
    }
    for (auto& v : out) v /= static_cast<double>(trials.size());
    return out;
}

std::string curve_file(const std::vector<double>& values) {
    std::ostringstream out;
    out << "send_index value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out << i + 1 << ' ' << num(values[i]) << '\n';
    return out.str();
}

nlohmann::json grid_json(const ExperimentGrid& g) {
    nlohmann::json j;
    j["n"] = g.ns;
    j["f"] = g.fs;
    j["check"] = static_cast<int>(g.variant);
    j["sends"] = g.sends;
    j["seeds"] = g.seeds;
    j["strategy"] = to_string(g.strategy);
    j["force_check"] = g.force_check;
    j["validation"] = g.validation == ValidationMode::Enforce ? "enforce" : "report";
    j["self_healing"] = g.self_healing;
    j["baseline"] = g.baseline;
    j["window"] = g.window;
    return j;
}

} // namespace

void ExperimentGrid::validate() const {
    if (ns.empty() || fs.empty()) throw ConfigError("n and f axes must be non-empty");
    if (seeds.empty()) throw ConfigError("seed list is empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) throw ConfigError("seeds must be distinct");
    if (!self_healing && !baseline) throw ConfigError("nothing to run: both self-healing and baseline disabled");
    if (window == 0) throw ConfigError("smoothing window must be positive");
}

std::string fraction_label(double f) {
    if (f == 0.0) return "0";
    const double inv = 1.0 / f;
    if (std::abs(inv - std::round(inv)) < 1e-9) return "1-" + std::to_string(static_cast<long long>(std::round(inv)));
    return num(f);
}

double final_quartile_mean(const Metrics& m) {
    if (m.sends.empty()) return 0.0;
    const std::size_t start = m.sends.size() - std::max<std::size_t>(1, m.sends.size() / 4);
    double total = 0.0;
    for (std::size_t i = start; i < m.sends.size(); ++i) total += static_cast<double>(m.sends[i].messages);
    return total / static_cast<double>(m.sends.size() - start);
}

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        if (i >= window) sum -= values[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

GridResult run_grid(const ExperimentGrid& grid) {
    grid.validate();
    GridResult result;
    result.grid = grid;
    for (std::uint32_t n : grid.ns) {
        for (double f : grid.fs) {
            for (std::uint64_t seed : grid.seeds) {
                SimConfig c;
                c.n = n;
                c.f = f;
                c.variant = grid.variant;
                c.sends = grid.sends;
                c.seed = seed;
                c.strategy = grid.strategy;
                c.force_check = grid.force_check;
                c.validation = grid.validation;
                if (grid.self_healing) result.trials.push_back(TrialResult{c, false, {}, {}});
                if (grid.baseline) result.trials.push_back(TrialResult{c, true, {}, {}});
            }
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < result.trials.size(); i = next++) {
            auto& t = result.trials[i];
            try {
                t.metrics = t.baseline ? run_baseline_trial(t.config) : run_trial(t.config);
            } catch (const std::exception& e) {
                t.error = e.what();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(grid.threads ? grid.threads : std::thread::hardware_concurrency(),
                                                             static_cast<unsigned>(result.trials.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    nlohmann::json summary;
    summary["grid"] = grid_json(grid);
    summary["trials"] = nlohmann::json::array();
    for (const auto& t : result.trials) {
        nlohmann::json j = t.error.empty() ? t.metrics.summary() : nlohmann::json::object();
        j["baseline"] = t.baseline;
        j["seed"] = t.config.seed;
        if (!t.error.empty()) j["error"] = t.error;
        else j["final_quartile_mean"] = final_quartile_mean(t.metrics);
        summary["trials"].push_back(std::move(j));
    }
    summary["series"] = nlohmann::json::array();
    for (const auto& s : group(result)) {
        nlohmann::json j;
        j["n"] = s.n;
        j["f"] = s.f;
        double healing = 0.0;
        double base = 0.0;
        double corruptions = 0.0;
        for (const auto* t : s.healing) {
            healing += final_quartile_mean(t->metrics);
            corruptions += static_cast<double>(t->metrics.corruptions);
        }
        for (const auto* t : s.baseline) base += t->metrics.mean_messages();
        if (!s.healing.empty()) {
            healing /= static_cast<double>(s.healing.size());
            j["self_healing_final_quartile_mean"] = healing;
            j["mean_corruptions"] = corruptions / static_cast<double>(s.healing.size());
            const auto t = s.healing.front()->metrics.t;
            j["corruption_budget"] = oracles::corruption_budget(t, s.n, grid.variant);
        }
        if (!s.baseline.empty()) {
            base /= static_cast<double>(s.baseline.size());
            j["baseline_mean"] = base;
        }
        if (!s.healing.empty() && !s.baseline.empty() && healing > 0.0) j["reduction_factor"] = base / healing;
        summary["series"].push_back(std::move(j));
    }
    result.summary = std::move(summary);

    if (!grid.out.empty()) {
        for (const auto& t : result.trials) {
            if (t.error.empty()) write_file(grid.out / "trials" / (trial_stem(t) + ".csv"), t.metrics.to_csv());
        }
        write_file(grid.out / "summary.json", result.summary.dump(2) + "\n");
        emit_figures(result, grid.out / "figures");
    }
    return result;
}

void emit_figures(const GridResult& result, const std::filesystem::path& dir) {
    const std::size_t window = result.grid.window;
    for (const auto& s : group(result)) {
        const std::string stem = series_stem(s.n, s.f);
        if (s.healing.empty() && s.baseline.empty()) {
            std::cerr << "warning: no completed trials for " << stem << ", skipping figures\n";
            continue;
        }
        std::vector<std::pair<std::string, std::vector<double>>> msgs;
        if (!s.healing.empty()) {
            auto curve = smooth(mean_curve(s.healing, false), window);
            write_file(dir / ("msgs_curve_" + stem + ".dat"), curve_file(curve));
            msgs.emplace_back("self-healing", std::move(curve));
            auto corr = smooth(mean_curve(s.healing, true), window);
            write_file(dir / ("corruption_curve_" + stem + ".dat"), curve_file(corr));
            write_file(dir / ("corruption_curve_" + stem + ".svg"),
                       render_svg("Fraction corrupted, " + stem, "# calls to SEND", "corrupted fraction",
                                  {{"self-healing", corr}}));
        }
        if (!s.baseline.empty()) {
            auto curve = smooth(mean_curve(s.baseline, false), window);
            write_file(dir / ("baseline_msgs_curve_" + stem + ".dat"), curve_file(curve));
            msgs.emplace_back("no-self-healing", std::move(curve));
        }
        write_file(dir / ("msgs_curve_" + stem + ".svg"),
                   render_svg("Messages per SEND, " + stem, "# calls to SEND", "# messages per SEND", msgs));
    }
}

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const double width = 720, height = 440, left = 80, right = 20, top = 40, bottom = 60;
    std::size_t points = 1;
    double y_max = 0.0;
    for (const auto& [name, values] : series) {
        points = std::max(points, values.size());
        for (double v : values) y_max = std::max(y_max, v);
    }
    if (y_max <= 0.0) y_max = 1.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double y = top + plot_h * (1.0 - k / 4.0);
        out << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
            << num(y_max * k / 4.0) << "</text>\n";
        const double x = left + plot_w * k / 4.0;
        out << "<text x=\"" << x << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
            << num(static_cast<double>(points) * k / 4.0) << "</text>\n";
    }
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
        << top + plot_h / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& values = series[s].second;
        // At most ~1000 vertices per line keeps files small.
        const std::size_t stride = std::max<std::size_t>(1, values.size() / 1000);
        out << "<polyline fill=\"none\" stroke=\"" << colors[s % 4] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < values.size(); i += stride) {
            const double x = left + plot_w * static_cast<double>(i + 1) / static_cast<double>(points);
            const double y = top + plot_h * (1.0 - values[i] / y_max);
            out << num(x) << ',' << num(y) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << left + plot_w - 4 << "\" y=\"" << top + 16 + 16 * s << "\" text-anchor=\"end\" font-size=\"12\" fill=\""
            << colors[s % 4] << "\">" << series[s].first << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace shbft

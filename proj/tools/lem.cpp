// Command-line entry point: gen, run, baseline, compare, validate.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "lem/data/metrics.hpp"
#include "lem/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace lem;

namespace {

struct Common {
    std::string config;
    std::string out = "lem_out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> budget_mode;
    std::optional<int> horizon;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "scenario JSON; defaults apply when omitted")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--budget-mode", c.budget_mode, "SMO budget mode")
        ->check(CLI::IsMember({"strict", "relaxed", "quasi"}));
    app->add_option("--horizon-minutes", c.horizon, "simulated minutes")->check(CLI::PositiveNumber);
}

data::ScenarioConfig resolve(const Common& c) {
    data::ScenarioConfig cfg = c.config.empty() ? data::ScenarioConfig{} : data::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.budget_mode) cfg.budget_mode = *c.budget_mode;
    if (c.horizon) cfg.horizon_minutes = *c.horizon;
    cfg.validate();
    return cfg;
}

data::MetricsOptions metrics_options(const orch::Scenario& s) {
    return {s.net.slack_id(), s.net.kw_per_pu(), s.timeline.dt_p / 60.0, s.config.flat_rate};
}

void print_summary(const char* label, const orch::RunSummary& r, double seconds) {
    std::cout << label << ": " << r.sm_clearings << " SM clearings, " << r.pm_clearings << " PM clearings in "
              << seconds << " s\n"
              << "  setpoint fallbacks " << r.setpoint_fallbacks << ", budget drops " << r.budget_drops
              << ", price-infeasible " << r.price_infeasible << ", widened stages " << r.widened_stages
              << ", reduced accuracy " << r.reduced_accuracy << "\n"
              << "  SOCP gap range [" << r.min_socp_gap << ", " << r.max_socp_gap << "]\n";
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

orch::RunOutput do_run(orch::Scenario& s, const fs::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = orch::run_timeline(s);
    fs::create_directories(dir);
    data::export_results(out.results, dir.string());
    print_summary("with SMOs", out.summary, elapsed(t0));
    return out;
}

orch::RunOutput do_baseline(const orch::Scenario& s, const fs::path& dir) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = orch::run_without_smo(s);
    fs::create_directories(dir);
    data::export_results(out.results, dir.string());
    print_summary("PM only", out.summary, elapsed(t0));
    return out;
}

int cmd_gen(const Common& c) {
    auto cfg = resolve(c);
    auto params = cfg.synthetic;
    params.seed = cfg.seed;
    params.minutes = std::max(params.minutes, cfg.horizon_minutes);
    const auto syn = data::gen_synthetic_feeder(params);
    const fs::path dir = c.out;
    fs::create_directories(dir);
    grid::write_feeder_file((dir / "feeder.csv").string(), syn.feeder);
    {
        std::ofstream p(dir / "profiles.csv");
        data::write_profiles(p, syn.profiles);
        std::ofstream l(dir / "lmp.csv");
        data::write_lmps(l, syn.lmps);
        if (!p || !l) throw std::runtime_error("cannot write scenario files under " + dir.string());
    }
    cfg.feeder_path = "feeder.csv";
    cfg.profiles_path = "profiles.csv";
    cfg.lmp_path = "lmp.csv";
    data::save_config((dir / "config.json").string(), cfg);
    std::cout << "wrote " << syn.feeder.nodes.size() << "-node feeder, " << syn.profiles.length()
              << " minutes of profiles and " << syn.lmps.length() << " prices to " << dir.string() << "\n";
    return 0;
}

int cmd_run(const Common& c) {
    auto s = orch::build_scenario(resolve(c));
    do_run(s, c.out);
    return 0;
}

int cmd_baseline(const Common& c) {
    const auto s = orch::build_scenario(resolve(c));
    do_baseline(s, c.out);
    return 0;
}

int cmd_compare(const Common& c) {
    auto s = orch::build_scenario(resolve(c));
    const fs::path dir = c.out;
    const auto base = do_baseline(s, dir / "without_smo");
    const auto run = do_run(s, dir / "with_smo");
    const auto table = data::report_metrics(run.results, base.results, metrics_options(s));
    std::ofstream m(dir / "metrics.csv");
    data::write_metrics(m, table);
    data::write_metrics(std::cout, table);
    return 0;
}

// Invariants that can be checked from the exported CSVs alone.
int cmd_validate(const Common& c) {
    const auto cfg = resolve(c);
    const auto r = data::import_results(c.out);
    constexpr double tol = 1e-6;
    int failures = 0;
    auto report = [&](const char* what, std::size_t bad, std::size_t total) {
        std::cout << (bad == 0 ? "PASS " : "FAIL ") << what << ": " << bad << " of " << total << " violate\n";
        failures += bad != 0;
    };

    std::size_t bad = 0;
    for (const auto& x : r.sm) bad += !(x.score >= 0.0 && x.score <= 1.0);
    report("scores in [0, 1]", bad, r.sm.size());
    bad = 0;
    for (const auto& x : r.sm) bad += !(x.dP >= -tol && x.dQ >= -tol);
    report("nonnegative bands", bad, r.sm.size());
    bad = 0;
    for (const auto& x : r.sm) {
        bad += !(x.mu_P >= -tol && x.mu_P <= cfg.cap_P + tol && x.mu_Q >= -tol && x.mu_Q <= cfg.cap_Q + tol);
    }
    report("tariffs within ceilings", bad, r.sm.size());
    bad = 0;
    for (const auto& x : r.lines) bad += x.socp_gap < -1e-7;
    report("SOCP gap >= -1e-7", bad, r.lines.size());
    bad = 0;
    for (const auto& x : r.flex) bad += !(x.P_lo <= x.P_cleared + tol && x.P_cleared <= x.P_hi + tol);
    report("PM injections within bids", bad, r.flex.size());
    bad = 0;
    std::set<int> pm_times;
    for (const auto& x : r.pm) {
        pm_times.insert(x.t);
        bad += x.t % cfg.dt_p_minutes != 0;
    }
    report("PM clearings on primary boundaries", bad, r.pm.size());

    // Every SMO clears the same DCAs every minute.
    std::map<int, std::map<int, int>> per_minute;  // smo -> t -> rows
    for (const auto& x : r.sm) ++per_minute[x.smo][x.t];
    bad = 0;
    std::size_t groups = 0;
    for (const auto& [smo, rows] : per_minute) {
        ++groups;
        const int expect = rows.begin()->second;
        bool ok = static_cast<int>(rows.size()) == cfg.horizon_minutes;
        for (const auto& [t, n] : rows) ok = ok && n == expect;
        bad += !ok;
    }
    report("one SM clearing per SMO per minute", bad, groups);
    if (!r.pm.empty()) {
        const auto want = static_cast<std::size_t>((cfg.horizon_minutes + cfg.dt_p_minutes - 1) / cfg.dt_p_minutes);
        report("PM clearing count", pm_times.size() != want, 1);
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-level local electricity market simulator"};
    app.require_subcommand(1);
    Common c;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const Common&);
    };
    const Sub subs[] = {
        {"gen", "write a synthetic scenario (feeder, profiles, prices, config) to --out", cmd_gen},
        {"run", "run secondary and primary markets, export results to --out", cmd_run},
        {"baseline", "run the primary market alone, export results to --out", cmd_baseline},
        {"compare", "run both modes and write metrics.csv under --out", cmd_compare},
        {"validate", "check invariants of the results stored in --out", cmd_validate},
    };
    std::vector<std::pair<CLI::App*, int (*)(const Common&)>> handlers;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, c);
        handlers.emplace_back(sub, s.fn);
    }
    CLI11_PARSE(app, argc, argv);
    try {
        for (const auto& [sub, fn] : handlers) {
            if (sub->parsed()) return fn(c);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

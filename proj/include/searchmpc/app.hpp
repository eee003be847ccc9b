// Command-line entry points: run one scenario, a seed sweep, or a directory batch.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "searchmpc/plots.hpp"
#include "searchmpc/results.hpp"
#include "searchmpc/scenario_io.hpp"

namespace searchmpc {

struct RunOptions {
    std::filesystem::path out_dir{"out"};
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_cell;
    bool plots{true};
    int runs{1};  // > 1: repeat with seeds seed, seed+1, ... (timing study)
};

struct RunOutcome {
    int exit_code{0};
    std::vector<BatchRow> rows;
};

inline void apply_overrides(Scenario& sc, const RunOptions& opt) {
    if (opt.seed) sc.seed = *opt.seed;
    if (opt.grid_cell) {
        if (!(*opt.grid_cell > 0.0)) throw ScenarioError("--grid-cell", "must be > 0");
        sc.grid_cell_size = *opt.grid_cell;
    }
}

/// Runs one mission and writes its bundle into dir. Solver aborts still write
/// the partial tables and return a failed row.
inline BatchRow run_bundle(const Scenario& sc, const std::string& name, const std::filesystem::path& dir,
                           bool plots, std::ostream& err) {
    BatchRow row{name, sc.seed};
    MissionLog log;
    try {
        log = run_mission(sc);
    } catch (const MissionError& e) {
        err << name << ": " << e.what() << '\n';
        log = e.partial_log();
        row.ok = false;
    }
    write_tables(dir, log, sc);
    write_scenario(sc, (dir / "scenario.json").string());
    if (plots && row.ok) render_plots(dir, log, sc);
    std::vector<double> ms;
    for (const auto& r : log.solve_stats) ms.push_back(r.solve_ms);
    row.timing = timing_stats(ms);
    row.final_H = log.coverage_series.empty() ? 0.0 : log.coverage_series.back();
    return row;
}

inline RunOutcome run_scenario(const Scenario& base, const std::string& name, const RunOptions& opt,
                               std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunOutcome res;
    Scenario sc = base;
    apply_overrides(sc, opt);
    const int runs = std::max(1, opt.runs);
    for (int i = 0; i < runs; ++i) {
        Scenario s = sc;
        s.seed = sc.seed + static_cast<std::uint64_t>(i);
        const auto dir = runs == 1 ? opt.out_dir : opt.out_dir / ("seed_" + std::to_string(s.seed));
        auto row = run_bundle(s, name, dir, opt.plots, err);
        out << name << " seed " << s.seed << ": H=" << fmt_double(row.final_H) << " solves=" << row.timing.solves
            << " mean_ms=" << row.timing.mean_ms << " max_ms=" << row.timing.max_ms
            << (row.ok ? "" : " FAILED") << '\n';
        if (!row.ok) res.exit_code = 2;
        res.rows.push_back(std::move(row));
    }
    if (runs > 1) write_text(opt.out_dir / "timing.csv", batch_timing_csv(res.rows));
    return res;
}

/// Every *.json file in dir (sorted by name) becomes one bundle under out_dir/<stem>.
inline RunOutcome run_batch(const std::filesystem::path& dir, const RunOptions& opt,
                            std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    RunOutcome res;
    for (const auto& f : files) {
        RunOptions sub = opt;
        sub.out_dir = opt.out_dir / f.stem();
        try {
            auto r = run_scenario(load_scenario(f.string()), f.stem().string(), sub, out, err);
            res.exit_code = std::max(res.exit_code, r.exit_code);
            for (auto& row : r.rows) res.rows.push_back(std::move(row));
        } catch (const std::exception& e) {
            err << f.string() << ": " << e.what() << '\n';
            BatchRow row{f.stem().string()};
            row.ok = false;
            res.rows.push_back(row);
            res.exit_code = std::max(res.exit_code, 1);
        }
    }
    std::filesystem::create_directories(opt.out_dir);
    write_text(opt.out_dir / "timing.csv", batch_timing_csv(res.rows));
    return res;
}

}  // namespace searchmpc

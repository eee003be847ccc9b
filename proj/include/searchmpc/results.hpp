// Result tables (CSV), run summary (JSON) and batch timing aggregation.
#pragma once

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "searchmpc/mission.hpp"

namespace searchmpc {

/// Text that reads back as the same double ("%.17g").
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string solve_flag(const SolveRecord& r) {
    std::string f = r.converged ? "converged" : "iteration_cap";
    if (r.jittered) f += "|jittered";
    return f;
}

inline std::string trajectory_csv(const MissionLog& log) {
    std::string out = "t,x,y,vx,vy,ux,uy\n";
    for (std::size_t k = 0; k < log.states.size(); ++k) {
        const auto& s = log.states[k];
        out += fmt_double(log.times[k]) + ',' + fmt_double(s.position.x()) + ',' +
               fmt_double(s.position.y()) + ',' + fmt_double(s.velocity.x()) + ',' +
               fmt_double(s.velocity.y()) + ',';
        // The final state has no applied input.
        if (k < log.inputs.size())
            out += fmt_double(log.inputs[k].x()) + ',' + fmt_double(log.inputs[k].y());
        else
            out += ',';
        out += '\n';
    }
    return out;
}

inline std::string coverage_csv(const MissionLog& log) {
    std::string out = "t,H\n";
    for (std::size_t k = 0; k < log.coverage_series.size(); ++k)
        out += fmt_double(log.times[k]) + ',' + fmt_double(log.coverage_series[k]) + '\n';
    return out;
}

inline std::string solver_csv(const MissionLog& log) {
    std::string out = "k,iterations,kkt_residual,solve_ms,flag\n";
    for (const auto& r : log.solve_stats)
        out += std::to_string(r.step) + ',' + std::to_string(r.iterations) + ',' +
               fmt_double(r.kkt_residual) + ',' + fmt_double(r.solve_ms) + ',' + solve_flag(r) + '\n';
    return out;
}

struct TimingStats {
    std::size_t solves{0};
    double mean_ms{0.0};
    double median_ms{0.0};
    double max_ms{0.0};
};

/// Mean, median and max of a list of solve times, summed in list order.
inline TimingStats timing_stats(std::vector<double> ms) {
    TimingStats t;
    t.solves = ms.size();
    if (ms.empty()) return t;
    double sum = 0.0;
    for (double v : ms) {
        sum += v;
        t.max_ms = std::max(t.max_ms, v);
    }
    t.mean_ms = sum / static_cast<double>(ms.size());
    std::sort(ms.begin(), ms.end());
    const std::size_t n = ms.size();
    t.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
    return t;
}

/// Largest limit excess over the logged inputs and velocities (0 when feasible).
inline double logged_max_violation(const Vec2Seq& inputs, const std::vector<VehicleState>& states,
                                   const InputLimits& lim) {
    double worst = 0.0;
    for (const auto& u : inputs) worst = std::max(worst, u.norm() - lim.a_max);
    for (const auto& s : states) worst = std::max(worst, s.velocity.norm() - lim.v_max);
    return worst;
}

inline nlohmann::json summary_json(const MissionLog& log, const Scenario& sc) {
    std::vector<double> ms;
    int converged = 0;
    for (const auto& r : log.solve_stats) {
        ms.push_back(r.solve_ms);
        converged += r.converged ? 1 : 0;
    }
    const auto t = timing_stats(ms);
    return {{"steps", log.inputs.size()},
            {"solves", t.solves},
            {"converged_solves", converged},
            {"final_H", log.coverage_series.empty() ? 0.0 : log.coverage_series.back()},
            {"mean_solve_ms", t.mean_ms},
            {"median_solve_ms", t.median_ms},
            {"max_solve_ms", t.max_ms},
            {"max_violation", logged_max_violation(log.inputs, log.states, sc.planner.limits)},
            {"grid",
             {{"origin", {log.grid.origin.x(), log.grid.origin.y()}},
              {"cell_size", log.grid.cell_size},
              {"width", log.grid.width},
              {"height", log.grid.height}}},
            {"seed", sc.seed}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + p.string());
}

/// Writes trajectory.csv, coverage.csv, solver.csv and summary.json into dir.
inline void write_tables(const std::filesystem::path& dir, const MissionLog& log, const Scenario& sc) {
    std::filesystem::create_directories(dir);
    write_text(dir / "trajectory.csv", trajectory_csv(log));
    write_text(dir / "coverage.csv", coverage_csv(log));
    write_text(dir / "solver.csv", solver_csv(log));
    write_text(dir / "summary.json", summary_json(log, sc).dump(2) + "\n");
}

struct BatchRow {
    std::string name;
    std::uint64_t seed{0};
    TimingStats timing;
    double final_H{0.0};
    bool ok{true};
};

inline std::string batch_timing_csv(const std::vector<BatchRow>& rows) {
    std::string out = "scenario,seed,status,solves,mean_ms,median_ms,max_ms,max_over_median,final_H\n";
    for (const auto& r : rows) {
        const double ratio = r.timing.median_ms > 0.0 ? r.timing.max_ms / r.timing.median_ms : 0.0;
        out += r.name + ',' + std::to_string(r.seed) + ',' + (r.ok ? "ok" : "failed") + ',' +
               std::to_string(r.timing.solves) + ',' + fmt_double(r.timing.mean_ms) + ',' +
               fmt_double(r.timing.median_ms) + ',' + fmt_double(r.timing.max_ms) + ',' +
               fmt_double(ratio) + ',' + fmt_double(r.final_H) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reading tables back (used by consistency checks)

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace searchmpc

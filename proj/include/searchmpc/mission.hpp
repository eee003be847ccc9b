// Receding-horizon mission loop and log replay.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "searchmpc/coverage.hpp"
#include "searchmpc/dynamics.hpp"
#include "searchmpc/gmm_map.hpp"
#include "searchmpc/planner.hpp"

namespace searchmpc {

struct Scenario {
    UncertaintyMap map;
    VehicleState x0{};
    double mission_time{30.0};
    PlannerConfig planner{};
    std::optional<double> grid_cell_size;  // default radius / 10
    std::uint64_t seed{0};

    double cell_size() const { return grid_cell_size.value_or(planner.radius() / 10.0); }

    /// Number of control steps: ceil(T / Ts), robust to T being a float multiple of Ts.
    int step_count() const {
        const double ratio = mission_time / planner.Ts;
        const double nearest = std::round(ratio);
        return static_cast<int>(std::abs(ratio - nearest) < 1e-9 * std::max(1.0, ratio)
                                    ? nearest
                                    : std::ceil(ratio));
    }

    std::vector<std::string> violations() const {
        auto v = planner.violations();
        if (!(mission_time >= planner.Ts)) v.emplace_back("mission_time: must be >= planner.Ts");
        if (!x0.finite()) v.emplace_back("x0: must be finite");
        if (x0.velocity.norm() > planner.limits.v_max)
            v.emplace_back("x0.vel: speed exceeds planner.v_max");
        if (grid_cell_size && !(*grid_cell_size > 0.0)) v.emplace_back("grid.cell_size: must be > 0");
        return v;
    }
};

struct SolveRecord {
    int step{0};
    int iterations{0};
    double kkt_residual{0.0};
    double solve_ms{0.0};
    double objective{0.0};
    bool converged{false};
    bool jittered{false};
};

struct MissionLog {
    std::vector<double> times;          // K + 1 sample times
    std::vector<VehicleState> states;   // K + 1 states
    Vec2Seq inputs;                     // K applied inputs
    std::vector<SolveRecord> solve_stats;
    std::vector<double> coverage_series;  // H[0..K]
    GridSpec grid;

    Vec2Seq positions() const {
        Vec2Seq p;
        p.reserve(states.size());
        for (const auto& s : states) p.push_back(s.position);
        return p;
    }
};

class MissionError : public std::runtime_error {
public:
    MissionError(const std::string& what, MissionLog partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const MissionLog& partial_log() const noexcept { return partial_; }

private:
    MissionLog partial_;
};

inline void finalize_coverage(MissionLog& log, const UncertaintyMap& map, double r, double cell) {
    const auto pos = log.positions();
    log.grid = covering_grid(map, pos, r, cell);
    log.coverage_series = coverage_series(pos, map, log.grid, r);
}

inline MissionLog run_mission(const Scenario& sc) {
    if (auto v = sc.violations(); !v.empty()) throw std::invalid_argument(v.front());
    PlannerConfig cfg = sc.planner;
    cfg.solver.deterministic_seed = sc.seed;
    const auto model = discretize(cfg.Ts);
    const int steps = sc.step_count();
    const int n_apply = cfg.n_apply;

    Planner planner(sc.map, cfg);
    HistoryBuffer history(cfg.backward_horizon);
    MissionLog log;
    log.times.reserve(steps + 1);
    log.states.reserve(steps + 1);
    log.inputs.reserve(steps);

    VehicleState x = sc.x0;
    log.times.push_back(0.0);
    log.states.push_back(x);
    history.push(x.position);

    Vec2Seq plan;
    for (int k = 0; k < steps; ++k) {
        const int slot = k % n_apply;
        if (slot == 0) {
            if (k > 0) planner.shift(n_apply);
            try {
                const auto sol = planner.plan(x, history);
                plan = sol.u_seq;
                log.solve_stats.push_back({k, sol.iterations, sol.kkt_residual,
                                           sol.solve_time.count() * 1e3, sol.objective,
                                           sol.converged, sol.jittered});
            } catch (const SolverError& e) {
                finalize_coverage(log, sc.map, cfg.radius(), sc.cell_size());
                throw MissionError("solve failed at step " + std::to_string(k) + ": " + e.what(),
                                   std::move(log));
            }
        }
        const Vec2 u = plan[slot];
        x = step(model, x, u);
        log.inputs.push_back(u);
        log.states.push_back(x);
        log.times.push_back((k + 1) * cfg.Ts);
        history.push(x.position);
    }
    finalize_coverage(log, sc.map, cfg.radius(), sc.cell_size());
    return log;
}

struct ReplayReport {
    bool ok{true};
    double max_state_error{0.0};
    double max_violation{0.0};
    std::vector<std::string> issues;
};

/// Re-simulates the logged inputs from x0 and checks states, timing and limits.
inline ReplayReport replay(const MissionLog& log, const Scenario& sc, double state_tol = 1e-9,
                           double constraint_tol = 1e-6) {
    ReplayReport rep;
    const auto fail = [&](std::string msg) {
        rep.ok = false;
        rep.issues.push_back(std::move(msg));
    };
    if (log.states.size() != log.inputs.size() + 1 || log.times.size() != log.states.size()) {
        fail("log lengths are inconsistent");
        return rep;
    }
    if (!log.coverage_series.empty() && log.coverage_series.size() != log.states.size())
        fail("coverage series length differs from state count");
    const auto& cfg = sc.planner;
    const auto model = discretize(cfg.Ts);
    VehicleState x = sc.x0;
    const auto err = [](const VehicleState& a, const VehicleState& b) {
        return (a.stacked() - b.stacked()).lpNorm<Eigen::Infinity>();
    };
    rep.max_state_error = err(x, log.states.front());
    for (std::size_t k = 0; k < log.inputs.size(); ++k) {
        const Vec2& u = log.inputs[k];
        rep.max_violation = std::max(rep.max_violation, u.norm() - cfg.limits.a_max);
        x = step(model, x, u);
        rep.max_state_error = std::max(rep.max_state_error, err(x, log.states[k + 1]));
        rep.max_violation = std::max(rep.max_violation, x.velocity.norm() - cfg.limits.v_max);
        if (!(log.times[k + 1] > log.times[k])) fail("times not strictly increasing at " + std::to_string(k));
    }
    rep.max_violation = std::max(rep.max_violation, 0.0);
    if (rep.max_state_error > state_tol) fail("replayed states differ from the log");
    if (rep.max_violation > constraint_tol) fail("constraint violation exceeds tolerance");
    return rep;
}

}  // namespace searchmpc

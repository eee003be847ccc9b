#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "searchmpc/mission.hpp"
#include "searchmpc/scenario_io.hpp"

using namespace searchmpc;

namespace {

Scenario example1(double T = 30.0) {
    Scenario sc{UncertaintyMap({{1.0, Vec2(5, 5), 6.25 * Mat2::Identity()}}, true)};
    sc.x0 = {Vec2(1, 1), Vec2::Zero()};
    sc.mission_time = T;
    return sc;
}

const MissionLog& example1_log() {
    static const MissionLog log = run_mission(example1());
    return log;
}

}  // namespace

TEST(Mission, SingleStep) {
    auto sc = example1(0.1);
    const auto log = run_mission(sc);
    EXPECT_EQ(log.solve_stats.size(), 1u);
    EXPECT_EQ(log.inputs.size(), 1u);
    EXPECT_EQ(log.states.size(), 2u);
    EXPECT_EQ(log.coverage_series.size(), 2u);
}

TEST(Mission, StepCountIsCeilingOfDurationOverPeriod) {
    auto sc = example1(0.3);  // 0.3 / 0.1 = 2.9999999999999996
    EXPECT_EQ(sc.step_count(), 3);
    sc.mission_time = 0.35;
    EXPECT_EQ(sc.step_count(), 4);
}

TEST(Mission, HoverAtMaximumWithoutPenalty) {
    Scenario sc{UncertaintyMap({{1.0, Vec2(5, 5), 6.25 * Mat2::Identity()}}, true)};
    sc.x0 = {Vec2(5, 5), Vec2::Zero()};
    sc.mission_time = 5.0;
    sc.planner.lambda = 0.0;
    const auto log = run_mission(sc);
    for (const auto& s : log.states) EXPECT_LT((s.position - sc.x0.position).norm(), 1e-3);
}

TEST(Mission, ExampleOneLeavesStartAndKeepsCovering) {
    const auto& log = example1_log();
    ASSERT_EQ(log.inputs.size(), 300u);
    EXPECT_GT((log.states.back().position - Vec2(1, 1)).norm(), 1.0);
    int rising = 0;
    for (std::size_t k = 1; k < log.coverage_series.size(); ++k) {
        EXPECT_GE(log.coverage_series[k], log.coverage_series[k - 1]);
        rising += log.coverage_series[k] > log.coverage_series[k - 1] ? 1 : 0;
    }
    EXPECT_GE(rising, 0.9 * 300);
}

TEST(Mission, LogInvariants) {
    const auto& log = example1_log();
    const auto sc = example1();
    ASSERT_EQ(log.times.size(), log.states.size());
    for (std::size_t k = 1; k < log.times.size(); ++k) EXPECT_NEAR(log.times[k] - log.times[k - 1], 0.1, 1e-12);
    for (const auto& u : log.inputs) EXPECT_LE(u.norm(), sc.planner.limits.a_max + 1e-6);
    for (const auto& s : log.states) EXPECT_LE(s.velocity.norm(), sc.planner.limits.v_max + 1e-6);
    EXPECT_EQ(log.solve_stats.size(), 300u);
}

TEST(Replay, ReconstructsLoggedStates) {
    const auto rep = replay(example1_log(), example1());
    EXPECT_TRUE(rep.ok);
    EXPECT_LE(rep.max_state_error, 1e-9);
    EXPECT_LE(rep.max_violation, 1e-6);
}

TEST(Replay, DetectsTamperedInput) {
    auto log = example1_log();
    log.inputs[100].x() += 1e-6;
    const auto rep = replay(log, example1());
    EXPECT_FALSE(rep.ok);
    EXPECT_GT(rep.max_state_error, 1e-9);
}

TEST(Mission, IdenticalSeedsGiveIdenticalLogs) {
    const auto a = run_mission(example1(6.0)), b = run_mission(example1(6.0));
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.coverage_series, b.coverage_series);
    ASSERT_EQ(a.solve_stats.size(), b.solve_stats.size());
    for (std::size_t i = 0; i < a.solve_stats.size(); ++i) {
        EXPECT_EQ(a.solve_stats[i].iterations, b.solve_stats[i].iterations);
        EXPECT_EQ(a.solve_stats[i].kkt_residual, b.solve_stats[i].kkt_residual);
    }
}

TEST(Mission, WaypointSlicesSolveEveryNApplySteps) {
    auto sc = example1(3.0);
    sc.planner.n_apply = 5;
    const auto log = run_mission(sc);
    ASSERT_EQ(log.inputs.size(), 30u);
    ASSERT_EQ(log.solve_stats.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(log.solve_stats[i].step, static_cast<int>(5 * i));
    // Within a slice the applied inputs are the first five of one plan.
    HistoryBuffer hist;
    auto cfg = sc.planner;
    VehicleState x = sc.x0;
    hist.push(x.position);
    const auto sol = solve(sc.map, x, hist.window(), cfg);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(log.inputs[i], sol.u_seq[i]);
    EXPECT_TRUE(replay(log, sc).ok);
}

TEST(Mission, InvalidScenarioIsRejected) {
    auto sc = example1();
    sc.x0.velocity = Vec2(5, 0);
    EXPECT_THROW(run_mission(sc), std::invalid_argument);
    sc = example1(0.05);
    EXPECT_THROW(run_mission(sc), std::invalid_argument);
}

TEST(CoverageGrid, HalvingCellSizeChangesFinalValueLittleOnEveryShippedScenario) {
    for (const auto& e : std::filesystem::directory_iterator(SEARCHMPC_SCENARIO_DIR)) {
        if (e.path().extension() != ".json") continue;
        const auto sc = load_scenario(e.path().string());
        const auto log = run_mission(sc);
        const auto pos = log.positions();
        const double r = sc.planner.radius();
        const double c = sc.cell_size();
        const double coarse = coverage_series(pos, sc.map, covering_grid(sc.map, pos, r, c), r).back();
        const double fine = coverage_series(pos, sc.map, covering_grid(sc.map, pos, r, c / 2), r).back();
        EXPECT_LT(std::abs(fine - coarse) / fine, 0.005) << e.path().filename();
    }
}

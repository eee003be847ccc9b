// Relaxed receding-horizon coverage objective and its constrained solver.
//
// Decision variables are the N inputs only (single shooting). Both ball
// families are kept strictly feasible by a log barrier around Newton ascent.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "searchmpc/dynamics.hpp"
#include "searchmpc/gmm_map.hpp"
#include "searchmpc/penalty.hpp"
#include "searchmpc/types.hpp"

namespace searchmpc {

struct SolverSettings {
    int max_iterations{60};
    double kkt_tolerance{1e-6};
    double constraint_tolerance{1e-7};
    double symmetry_jitter{1e-6};
    std::uint64_t deterministic_seed{0};
};

inline constexpr double kColdBarrier = 1e-3;
inline constexpr double kWarmBarrier = 1e-5;
inline constexpr double kStageFactor = 10.0;

struct StageRewardMode {
    enum class Kind { approx, quadrature };
    Kind kind{Kind::approx};
    int order{kDefaultQuadratureOrder};

    static StageRewardMode approx() { return {}; }
    static StageRewardMode quadrature(int order = kDefaultQuadratureOrder) {
        return {Kind::quadrature, order};
    }
};

struct PlannerConfig {
    int horizon{15};
    std::optional<int> backward_horizon;  // nullopt: unbounded
    double lambda{1.0 / 7000.0};
    PenaltyParams penalty{};
    InputLimits limits{};
    double Ts{0.1};
    int n_apply{1};
    StageRewardMode stage_reward{};
    SolverSettings solver{};

    double radius() const { return penalty.radius; }

    /// Lists out-of-range tunables; empty when valid.
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (horizon < 2) v.emplace_back("planner.N: must be >= 2");
        if (backward_horizon && *backward_horizon < 0) v.emplace_back("planner.N_B: must be >= 0");
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) v.emplace_back("planner.lambda: must be >= 0");
        if (!(penalty.alpha > 0.0)) v.emplace_back("planner.alpha: must be > 0");
        if (!(penalty.radius > 0.0)) v.emplace_back("planner.radius: must be > 0");
        if (!(limits.v_max > 0.0)) v.emplace_back("planner.v_max: must be > 0");
        if (!(limits.a_max > 0.0)) v.emplace_back("planner.a_max: must be > 0");
        if (!(Ts > 0.0)) v.emplace_back("planner.Ts: must be > 0");
        if (n_apply < 1 || n_apply > horizon) v.emplace_back("planner.n_apply: must be in [1, N]");
        if (stage_reward.order < 1) v.emplace_back("planner.quadrature_order: must be >= 1");
        if (solver.max_iterations < 1) v.emplace_back("planner.solver.max_iterations: must be >= 1");
        if (!(solver.kkt_tolerance > 0.0)) v.emplace_back("planner.solver.kkt_tolerance: must be > 0");
        if (!(solver.constraint_tolerance > 0.0))
            v.emplace_back("planner.solver.constraint_tolerance: must be > 0");
        if (!(solver.symmetry_jitter >= 0.0))
            v.emplace_back("planner.solver.symmetry_jitter: must be >= 0");
        return v;
    }
};

/// Past vehicle positions, oldest first. A bounded buffer keeps only the last N_B.
class HistoryBuffer {
public:
    explicit HistoryBuffer(std::optional<int> capacity = std::nullopt) : capacity_(capacity) {}

    void push(const Vec2& p) {
        points_.push_back(p);
        if (capacity_ && points_.size() > static_cast<std::size_t>(*capacity_))
            points_.erase(points_.begin(),
                          points_.begin() + static_cast<std::ptrdiff_t>(points_.size() - *capacity_));
    }

    std::span<const Vec2> window() const { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    std::optional<int> capacity() const noexcept { return capacity_; }

private:
    std::optional<int> capacity_;
    Vec2Seq points_;
};

struct HorizonSolution {
    Vec2Seq u_seq;
    std::vector<VehicleState> x_seq;
    double objective{0.0};
    double stage_reward{0.0};
    double penalty_backward{0.0};
    double penalty_horizon{0.0};
    int iterations{0};
    double kkt_residual{0.0};
    double max_violation{0.0};
    std::chrono::duration<double> solve_time{0.0};
    bool converged{false};
    bool jittered{false};
    /// Multipliers of the N input balls followed by the N velocity balls.
    std::vector<double> multipliers;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Objective terms on predicted positions

struct ObjectiveBreakdown {
    double value{0.0};
    double stage{0.0};
    double backward{0.0};
    double horizon{0.0};
};

inline double disk_mass(const UncertaintyMap& map, const Vec2& c, double r,
                        const StageRewardMode& mode) {
    return mode.kind == StageRewardMode::Kind::approx ? disk_mass_approx(map, c, r)
                                                      : disk_mass_quadrature(map, c, r, mode.order);
}

/// Sum of predicted disk masses over positions[0..N] (the n = 0 term is constant
/// with respect to the inputs but kept so values match the full reward).
inline double stage_reward(const UncertaintyMap& map, std::span<const Vec2> positions,
                           const PlannerConfig& cfg) {
    double s = 0.0;
    for (const auto& p : positions) s += disk_mass(map, p, cfg.radius(), cfg.stage_reward);
    return s;
}

/// Penalties between predicted positions 1..N and every past position in the window.
inline double backward_penalty(std::span<const Vec2> predicted, std::span<const Vec2> history,
                               const PenaltyParams& params) {
    double s = 0.0;
    for (std::size_t n = 1; n < predicted.size(); ++n)
        for (const auto& h : history) s += pair_penalty(predicted[n], h, params);
    return s;
}

/// Penalties among predicted positions: n = 2..N, i = 1..n-1.
inline double horizon_penalty(std::span<const Vec2> predicted, const PenaltyParams& params) {
    double s = 0.0;
    for (std::size_t n = 2; n < predicted.size(); ++n)
        for (std::size_t i = 1; i < n; ++i) s += pair_penalty(predicted[n], predicted[i], params);
    return s;
}

/// Evaluates the objective on position sequences against a fixed history.
/// History is kept as coordinate arrays so the backward sum runs on packed exp().
class ObjectiveEvaluator {
public:
    ObjectiveEvaluator(const UncertaintyMap& map, std::span<const Vec2> history,
                       const PlannerConfig& cfg)
        : map_(map), cfg_(cfg), hx_(history.size()), hy_(history.size()),
          scratch_(history.size()) {
        for (std::size_t i = 0; i < history.size(); ++i) {
            hx_[static_cast<Eigen::Index>(i)] = history[i].x();
            hy_[static_cast<Eigen::Index>(i)] = history[i].y();
        }
    }

    /// Objective on positions[0..N]; optionally fills d(objective)/d(position[n]).
    ObjectiveBreakdown operator()(std::span<const Vec2> positions,
                                  Vec2Seq* position_grad = nullptr) const {
        const double r = cfg_.radius();
        const auto& mode = cfg_.stage_reward;
        const std::size_t count = positions.size();
        ObjectiveBreakdown out;
        if (position_grad) position_grad->assign(count, Vec2::Zero());

        const double area = std::numbers::pi * r * r;
        for (std::size_t n = 0; n < count; ++n) {
            if (!position_grad) {
                out.stage += disk_mass(map_, positions[n], r, mode);
            } else if (mode.kind == StageRewardMode::Kind::approx) {
                Vec2 g;
                out.stage += area * map_.eval_density_and_gradient(positions[n], g);
                (*position_grad)[n] += area * g;
            } else {
                out.stage += disk_mass_quadrature(map_, positions[n], r, mode.order);
                (*position_grad)[n] += disk_mass_quadrature_gradient(map_, positions[n], r, mode.order);
            }
        }

        const double lambda = cfg_.lambda;
        const double alpha = cfg_.penalty.alpha;
        const double four_r2 = 4.0 * r * r;
        const auto hist = static_cast<double>(hx_.size());
        if (hx_.size() > 0) {
            for (std::size_t n = 1; n < count; ++n) {
                const Vec2& p = positions[n];
                scratch_ = (alpha * (four_r2 - (hx_ - p.x()).square() - (hy_ - p.y()).square())).exp();
                out.backward += scratch_.sum() - hist;
                if (position_grad) {
                    // d/dp of exp(alpha(4r^2 - |p - h|^2)) = 2 alpha e (h - p)
                    const Vec2 g(((hx_ - p.x()) * scratch_).sum(), ((hy_ - p.y()) * scratch_).sum());
                    (*position_grad)[n] -= (lambda * 2.0 * alpha) * g;
                }
            }
        }
        for (std::size_t n = 2; n < count; ++n) {
            for (std::size_t i = 1; i < n; ++i) {
                if (position_grad) {
                    Vec2 g;
                    out.horizon += pair_penalty_with_grad(positions[n], positions[i], cfg_.penalty, g);
                    (*position_grad)[n] -= lambda * g;
                    (*position_grad)[i] += lambda * g;
                } else {
                    out.horizon += pair_penalty(positions[n], positions[i], cfg_.penalty);
                }
            }
        }
        out.value = out.stage - lambda * (out.backward + out.horizon);
        return out;
    }

    /// Objective with gradient and Hessian over the free positions 1..N,
    /// stacked as [x1, y1, x2, y2, ...].
    ObjectiveBreakdown second_order(std::span<const Vec2> positions, Eigen::VectorXd& grad,
                                    Eigen::MatrixXd& hess) const {
        const double r = cfg_.radius();
        const auto& mode = cfg_.stage_reward;
        const int N = static_cast<int>(positions.size()) - 1;
        grad.setZero(2 * N);
        hess.setZero(2 * N, 2 * N);
        ObjectiveBreakdown out;

        const double area = std::numbers::pi * r * r;
        out.stage += disk_mass(map_, positions[0], r, mode);
        for (int n = 1; n <= N; ++n) {
            const auto& p = positions[n];
            Vec2 g;
            Mat2 H;
            if (mode.kind == StageRewardMode::Kind::approx) {
                out.stage += area * map_.eval_derivatives(p, g, H);
                g *= area;
                H *= area;
            } else {
                out.stage += disk_mass_quadrature(map_, p, r, mode.order);
                g = disk_mass_quadrature_gradient(map_, p, r, mode.order);
                H = disk_mass_quadrature_hessian(map_, p, r, mode.order);
            }
            grad.segment<2>(2 * (n - 1)) += g;
            hess.block<2, 2>(2 * (n - 1), 2 * (n - 1)) += H;
        }

        const double lambda = cfg_.lambda;
        const double alpha = cfg_.penalty.alpha;
        const double four_r2 = 4.0 * r * r;
        const auto hist = static_cast<double>(hx_.size());
        if (hx_.size() > 0) {
            for (int n = 1; n <= N; ++n) {
                const Vec2& p = positions[n];
                dx_ = hx_ - p.x();
                dy_ = hy_ - p.y();
                scratch_ = (alpha * (four_r2 - dx_.square() - dy_.square())).exp();
                const double s0 = scratch_.sum();
                out.backward += s0 - hist;
                const double sx = (dx_ * scratch_).sum(), sy = (dy_ * scratch_).sum();
                const double sxx = (dx_.square() * scratch_).sum();
                const double syy = (dy_.square() * scratch_).sum();
                const double sxy = (dx_ * dy_ * scratch_).sum();
                grad.segment<2>(2 * (n - 1)) -= (lambda * 2.0 * alpha) * Vec2(sx, sy);
                Mat2 H;
                H << sxx, sxy, sxy, syy;
                H = 4.0 * alpha * alpha * H - 2.0 * alpha * s0 * Mat2::Identity();
                hess.block<2, 2>(2 * (n - 1), 2 * (n - 1)) -= lambda * H;
            }
        }
        for (int n = 2; n <= N; ++n) {
            for (int i = 1; i < n; ++i) {
                const Vec2 delta = positions[n] - positions[i];
                const double e = std::exp(alpha * (four_r2 - delta.squaredNorm()));
                out.horizon += e - 1.0;
                const Vec2 g = (-2.0 * alpha * e) * delta;
                const Mat2 K = e * (4.0 * alpha * alpha * delta * delta.transpose() -
                                    2.0 * alpha * Mat2::Identity());
                const int a = 2 * (n - 1), b = 2 * (i - 1);
                grad.segment<2>(a) -= lambda * g;
                grad.segment<2>(b) += lambda * g;
                hess.block<2, 2>(a, a) -= lambda * K;
                hess.block<2, 2>(b, b) -= lambda * K;
                hess.block<2, 2>(a, b) += lambda * K;
                hess.block<2, 2>(b, a) += lambda * K;
            }
        }
        out.value = out.stage - lambda * (out.backward + out.horizon);
        return out;
    }

private:
    const UncertaintyMap& map_;
    const PlannerConfig& cfg_;
    Eigen::ArrayXd hx_, hy_;
    mutable Eigen::ArrayXd scratch_, dx_, dy_;
};

/// Objective on a position sequence; optionally fills d(objective)/d(position[n]).
inline ObjectiveBreakdown evaluate_positions(const UncertaintyMap& map,
                                             std::span<const Vec2> positions,
                                             std::span<const Vec2> history,
                                             const PlannerConfig& cfg,
                                             Vec2Seq* position_grad = nullptr) {
    return ObjectiveEvaluator(map, history, cfg)(positions, position_grad);
}

namespace detail {

inline Vec2Seq predicted_positions(const DiscreteModel& model, const VehicleState& x0,
                                   std::span<const Vec2> u) {
    Vec2Seq pos;
    pos.reserve(u.size() + 1);
    VehicleState x = x0;
    pos.push_back(x.position);
    for (const auto& ui : u) {
        x = step(model, x, ui);
        pos.push_back(x.position);
    }
    return pos;
}

// Chain rule through the rollout: d/du[m] = sum_{n>m} gain(n,m) * d/dp[n].
inline Vec2Seq inputs_gradient(double Ts, const Vec2Seq& position_grad) {
    const int N = static_cast<int>(position_grad.size()) - 1;
    Vec2Seq g(N, Vec2::Zero());
    // Suffix sums: S = sum_{n>m} gp[n], W = sum_{n>m} (n-1-m) gp[n].
    Vec2 S = Vec2::Zero(), W = Vec2::Zero();
    for (int m = N - 1; m >= 0; --m) {
        W += S;  // shifts every (n-1-m) weight up by one
        S += position_grad[m + 1];
        g[m] = Ts * Ts * (0.5 * S + W);
    }
    return g;
}

}  // namespace detail

inline double objective(const UncertaintyMap& map, const VehicleState& x0, std::span<const Vec2> u,
                        std::span<const Vec2> history, const PlannerConfig& cfg) {
    const auto model = discretize(cfg.Ts);
    const auto pos = detail::predicted_positions(model, x0, u);
    return evaluate_positions(map, pos, history, cfg).value;
}

inline Vec2Seq objective_gradient(const UncertaintyMap& map, const VehicleState& x0,
                                  std::span<const Vec2> u, std::span<const Vec2> history,
                                  const PlannerConfig& cfg) {
    const auto model = discretize(cfg.Ts);
    const auto pos = detail::predicted_positions(model, x0, u);
    Vec2Seq gp;
    evaluate_positions(map, pos, history, cfg, &gp);
    return detail::inputs_gradient(cfg.Ts, gp);
}

// ---------------------------------------------------------------------------
// Feasibility helpers

inline Vec2 project_ball(const Vec2& v, double radius) {
    const double n = v.norm();
    return n > radius ? Vec2(v * (radius / n)) : v;
}

inline void project_inputs(Vec2Seq& u, double a_max) {
    for (auto& ui : u) ui = project_ball(ui, a_max);
}

/// Largest violation of either ball family along the rollout (0 when feasible).
inline double max_constraint_violation(const VehicleState& x0, std::span<const Vec2> u,
                                       const InputLimits& lim, double Ts) {
    double worst = std::max(0.0, x0.velocity.norm() - lim.v_max);
    Vec2 v = x0.velocity;
    for (const auto& ui : u) {
        worst = std::max(worst, ui.norm() - lim.a_max);
        v += Ts * ui;
        worst = std::max(worst, v.norm() - lim.v_max);
    }
    return worst;
}

/// Clips each step so the next velocity lies in the v_max ball. The clipped
/// input never grows (projection onto a ball containing the current velocity
/// is nonexpansive), so input feasibility is preserved.
inline void repair_velocity(const Vec2& v0, Vec2Seq& u, double Ts, double v_max) {
    Vec2 v = v0;
    for (auto& ui : u) {
        const Vec2 next = v + Ts * ui;
        if (next.norm() > v_max) {
            const Vec2 clipped = project_ball(next, v_max);
            ui = (clipped - v) / Ts;
            v = clipped;
        } else {
            v = next;
        }
    }
}

/// Drops the first n_shift inputs, repeats the last one, projects onto the a_max ball.
inline Vec2Seq shift_warm_start(std::span<const Vec2> prev, int n_shift, double a_max) {
    const int N = static_cast<int>(prev.size());
    if (n_shift < 1 || n_shift > N) throw std::invalid_argument("n_shift must be in [1, N]");
    Vec2Seq out(prev.begin() + n_shift, prev.end());
    out.resize(N, prev.back());
    project_inputs(out, a_max);
    return out;
}

inline Vec2Seq shift_warm_start(const HorizonSolution& prev, int n_shift, double a_max) {
    return shift_warm_start(prev.u_seq, n_shift, a_max);
}

// ---------------------------------------------------------------------------
// Solver

struct SolveOptions {
    std::optional<Vec2Seq> warm_start;
    std::optional<std::vector<double>> multipliers;  // layout as HorizonSolution::multipliers
    /// Mixed into the jitter seed so successive solves draw different jitter.
    std::uint64_t seed_salt{0};
};

namespace detail {

// One horizon problem in stacked input coordinates u = [ux0, uy0, ux1, ...].
// Positions and velocities are affine in u, so their Jacobians are fixed.
// Both ball families use the slack (z_max^2 - |z|^2) / (2 z_max), which
// behaves like z_max - |z| near the boundary.
class HorizonProblem {
public:
    HorizonProblem(const UncertaintyMap& map, const VehicleState& x0, std::span<const Vec2> history,
                   const PlannerConfig& cfg)
        : eval_(map, history, cfg), x0_(x0), cfg_(cfg), N_(cfg.horizon),
          pos_jac_(Eigen::MatrixXd::Zero(2 * N_, 2 * N_)),
          vel_jac_(Eigen::MatrixXd::Zero(2 * N_, 2 * N_)), pos_base_(2 * N_), vel_base_(2 * N_) {
        const double Ts = cfg.Ts;
        for (int n = 1; n <= N_; ++n) {
            pos_base_.segment<2>(2 * (n - 1)) = x0.position + (n * Ts) * x0.velocity;
            vel_base_.segment<2>(2 * (n - 1)) = x0.velocity;
            for (int m = 0; m < n; ++m) {
                const double g = position_gain(Ts, n, m);
                for (int k = 0; k < 2; ++k) {
                    pos_jac_(2 * (n - 1) + k, 2 * m + k) = g;
                    vel_jac_(2 * (n - 1) + k, 2 * m + k) = Ts;
                }
            }
        }
    }

    static Eigen::VectorXd stack(std::span<const Vec2> u) {
        Eigen::VectorXd z(2 * u.size());
        for (std::size_t i = 0; i < u.size(); ++i) z.segment<2>(2 * i) = u[i];
        return z;
    }
    static Vec2Seq unstack(const Eigen::VectorXd& z) {
        Vec2Seq u(z.size() / 2);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = z.segment<2>(2 * i);
        return u;
    }

    Vec2Seq positions(const Eigen::VectorXd& u) const {
        const Eigen::VectorXd p = pos_base_ + pos_jac_ * u;
        Vec2Seq out(N_ + 1);
        out[0] = x0_.position;
        for (int n = 1; n <= N_; ++n) out[n] = p.segment<2>(2 * (n - 1));
        return out;
    }

    Eigen::VectorXd velocities(const Eigen::VectorXd& u) const { return vel_base_ + vel_jac_ * u; }

    ObjectiveBreakdown terms(const Eigen::VectorXd& u) const { return eval_(positions(u)); }

    /// Slacks of the N input balls followed by the N velocity balls; positive inside.
    Eigen::VectorXd slacks(const Eigen::VectorXd& u) const {
        const Eigen::VectorXd v = velocities(u);
        Eigen::VectorXd s(2 * N_);
        for (int i = 0; i < N_; ++i) {
            s[i] = slack(u.segment<2>(2 * i), cfg_.limits.a_max);
            s[N_ + i] = slack(v.segment<2>(2 * i), cfg_.limits.v_max);
        }
        return s;
    }

    /// Objective plus mu * (sum of log slacks); -inf outside the open feasible set.
    double barrier(const Eigen::VectorXd& u, double mu) const {
        const Eigen::VectorXd s = slacks(u);
        if (!(s.minCoeff() > 0.0)) return -std::numeric_limits<double>::infinity();
        return terms(u).value + mu * s.array().log().sum();
    }

    /// Linearization at u for the multipliers z: barrier gradient (weight mu),
    /// primal-dual Hessian, Lagrangian gradient and slack gradients (2 x 2N, per
    /// constraint in its own input or velocity coordinates).
    struct Linearization {
        double barrier;
        Eigen::VectorXd grad_barrier;
        Eigen::VectorXd grad_lagrangian;
        Eigen::MatrixXd hess;
        Eigen::VectorXd slack;
    };

    Linearization linearize(const Eigen::VectorXd& u, const Eigen::VectorXd& z, double mu) const {
        Linearization lin;
        Eigen::VectorXd gp;
        Eigen::MatrixXd hp;
        const double f = eval_.second_order(positions(u), gp, hp).value;
        const Eigen::VectorXd gf = pos_jac_.transpose() * gp;
        lin.hess.noalias() = pos_jac_.transpose() * hp * pos_jac_;
        lin.slack = slacks(u);
        const Eigen::VectorXd v = velocities(u);

        // Constraint-side terms: input part directly, velocity part through vel_jac.
        Eigen::VectorXd gb_u = Eigen::VectorXd::Zero(2 * N_), gb_v = gb_u;
        Eigen::VectorXd gl_u = gb_u, gl_v = gb_u;
        Eigen::MatrixXd h_v = Eigen::MatrixXd::Zero(2 * N_, 2 * N_);
        const auto add = [&](const Vec2& zi, double zmax, double s, double zmul, int at,
                             Eigen::VectorXd& gb, Eigen::VectorXd& gl, Eigen::MatrixXd& H) {
            const Vec2 ds = -zi / zmax;
            gb.segment<2>(at) += (mu / s) * ds;
            gl.segment<2>(at) += zmul * ds;
            H.block<2, 2>(at, at) += -(zmul / zmax) * Mat2::Identity() - (zmul / s) * ds * ds.transpose();
        };
        for (int i = 0; i < N_; ++i) {
            add(u.segment<2>(2 * i), cfg_.limits.a_max, lin.slack[i], z[i], 2 * i, gb_u, gl_u, lin.hess);
            add(v.segment<2>(2 * i), cfg_.limits.v_max, lin.slack[N_ + i], z[N_ + i], 2 * i, gb_v, gl_v,
                h_v);
        }
        lin.hess.noalias() += vel_jac_.transpose() * h_v * vel_jac_;
        lin.grad_barrier = gf + gb_u + vel_jac_.transpose() * gb_v;
        lin.grad_lagrangian = gf + gl_u + vel_jac_.transpose() * gl_v;
        lin.barrier = f + mu * lin.slack.array().log().sum();
        return lin;
    }

    /// Change of every slack along d to first order.
    Eigen::VectorXd slack_derivative(const Eigen::VectorXd& u, const Eigen::VectorXd& d) const {
        const Eigen::VectorXd v = velocities(u);
        const Eigen::VectorXd dv = vel_jac_ * d;
        Eigen::VectorXd out(2 * N_);
        for (int i = 0; i < N_; ++i) {
            out[i] = -u.segment<2>(2 * i).dot(d.segment<2>(2 * i)) / cfg_.limits.a_max;
            out[N_ + i] = -v.segment<2>(2 * i).dot(dv.segment<2>(2 * i)) / cfg_.limits.v_max;
        }
        return out;
    }

    /// Unperturbed KKT error: Lagrangian gradient and complementarity z * s.
    double kkt_residual(const Eigen::VectorXd& u, const Eigen::VectorXd& z) const {
        const auto lin = linearize(u, z, 0.0);
        return std::max(lin.grad_lagrangian.lpNorm<Eigen::Infinity>(),
                        (z.array() * lin.slack.array()).abs().maxCoeff());
    }

private:
    static double slack(const Vec2& z, double zmax) {
        return (zmax * zmax - z.squaredNorm()) / (2.0 * zmax);
    }

    ObjectiveEvaluator eval_;
    VehicleState x0_;
    const PlannerConfig& cfg_;
    int N_;
    Eigen::MatrixXd pos_jac_, vel_jac_;
    Eigen::VectorXd pos_base_, vel_base_;
};

inline bool all_zero(std::span<const Vec2> a) {
    return std::all_of(a.begin(), a.end(), [](const Vec2& v) { return v.isZero(0.0); });
}

}  // namespace detail

/// Solves one horizon problem. The returned inputs satisfy both ball families
/// and never score below the repaired warm start.
///
/// Primal-dual log-barrier method. Newton steps use the Hessian eigenvalues
/// replaced by their magnitudes, so every step ascends the barrier function.
/// The barrier weight drops superlinearly and is raised again when the iterate
/// leaves the central path. At the final stage a first-order point with
/// positive curvature left is escaped along the top eigenvector. At the
/// iteration cap the best feasible iterate is returned unconverged.
inline HorizonSolution solve(const UncertaintyMap& map, const VehicleState& x0,
                             std::span<const Vec2> history, const PlannerConfig& cfg,
                             const SolveOptions& opts = {}) {
    const auto start_clock = std::chrono::steady_clock::now();
    const int N = cfg.horizon;
    const auto& lim = cfg.limits;
    const auto& st = cfg.solver;
    if (auto v = cfg.violations(); !v.empty()) throw std::invalid_argument(v.front());
    if (!x0.finite()) throw SolverError("initial state is not finite");
    if (x0.velocity.norm() > lim.v_max + st.constraint_tolerance)
        throw SolverError("initial velocity exceeds v_max (infeasible start)");
    if (opts.warm_start && static_cast<int>(opts.warm_start->size()) != N)
        throw std::invalid_argument("warm start length must equal the horizon");

    using detail::HorizonProblem;
    HorizonProblem prob(map, x0, history, cfg);
    auto check_finite = [&](double value, const char* where) {
        if (!std::isfinite(value))
            throw SolverError(std::string("non-finite objective during ") + where +
                              " (solver diverged)");
    };

    Vec2Seq start = opts.warm_start ? *opts.warm_start : Vec2Seq(N, Vec2::Zero());
    const bool zero_start = detail::all_zero(start);
    project_inputs(start, lim.a_max);
    repair_velocity(x0.velocity, start, cfg.Ts, lim.v_max);

    Vec2Seq best = start;
    double best_f = prob.terms(HorizonProblem::stack(start)).value;
    check_finite(best_f, "initial evaluation");

    // Strictly interior copy of the start. Shrinking the balls slightly keeps
    // the clipped inputs feasible; braking from x0 is the fallback.
    constexpr double kShrink = 1e-4;
    const double a_in = lim.a_max * (1.0 - kShrink);
    const double v_in = lim.v_max * (1.0 - std::min(kShrink, 0.5 * lim.a_max * cfg.Ts / lim.v_max));
    auto interior = [&](Vec2Seq w) {
        project_inputs(w, a_in);
        repair_velocity(x0.velocity, w, cfg.Ts, v_in);
        return HorizonProblem::stack(w);
    };
    Eigen::VectorXd u = interior(start);
    if (!std::isfinite(prob.barrier(u, 1.0))) u = interior(Vec2Seq(N, Vec2::Zero()));
    if (!std::isfinite(prob.barrier(u, 1.0)))
        throw SolverError("could not construct a strictly feasible starting point");

    HorizonSolution sol;
    if (st.symmetry_jitter > 0.0 && zero_start) {
        const auto plain = prob.linearize(u, Eigen::VectorXd::Zero(2 * N), 0.0);
        if (plain.grad_lagrangian.lpNorm<Eigen::Infinity>() < 1e-10) {
            // Exactly stationary zero start: perturb to escape symmetric saddles.
            std::mt19937_64 rng(st.deterministic_seed * 0x9E3779B97F4A7C15ULL + opts.seed_salt);
            std::uniform_real_distribution<double> dist(-st.symmetry_jitter, st.symmetry_jitter);
            Eigen::VectorXd j = u;
            for (Eigen::Index i = 0; i < j.size(); ++i) j[i] += dist(rng);
            j = interior(HorizonProblem::unstack(j));
            if (std::isfinite(prob.barrier(j, 1.0))) {
                u = j;
                sol.jittered = true;
            }
        }
    }

    constexpr double kArmijo = 1e-4;
    constexpr int kMaxAttempts = 60;
    constexpr int kMaxCurvatureSteps = 8;
    constexpr double kBoundaryFraction = 0.99;
    constexpr double kDualSpread = 1e2;
    constexpr double kReopenFactor = 1e3;
    constexpr int kMaxReopenings = 4;
    const double step_cap = lim.a_max;
    const double mu_final = 0.01 * st.kkt_tolerance;
    double mu = opts.warm_start ? kWarmBarrier : kColdBarrier;

    Eigen::VectorXd z = prob.slacks(u).cwiseInverse() * mu;
    if (opts.multipliers && static_cast<int>(opts.multipliers->size()) == 2 * N) {
        for (int i = 0; i < 2 * N; ++i) z[i] = std::max((*opts.multipliers)[i], z[i] / kDualSpread);
    }
    const auto next_mu = [&](double m) { return std::max(mu_final, std::min(0.2 * m, std::pow(m, 1.5))); };
    // Keeps z within a bounded factor of its primal estimate mu / s.
    const auto clamp_duals = [&](const Eigen::VectorXd& s) {
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z[i] = std::clamp(z[i], mu / (kDualSpread * s[i]), kDualSpread * mu / s[i]);
    };

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    Eigen::VectorXd trial;
    int iterations = 0;
    int curvature_steps = 0;
    int reopenings = 0;
    bool converged = false;

    auto lin = prob.linearize(u, z, mu);
    check_finite(lin.barrier, "initial evaluation");
    while (iterations < st.max_iterations) {
        const bool last_stage = mu <= mu_final;
        const double stage_tol = last_stage ? st.kkt_tolerance : kStageFactor * mu;
        const double error = std::max(lin.grad_lagrangian.lpNorm<Eigen::Infinity>(),
                                      (z.array() * lin.slack.array() - mu).abs().maxCoeff());
        if (error > kReopenFactor * std::max(stage_tol, mu) && reopenings < kMaxReopenings) {
            // Far off the central path (the active set is still moving): widen the barrier.
            mu = std::min(kColdBarrier, error / kReopenFactor);
            ++reopenings;
            lin = prob.linearize(u, z, mu);
            continue;
        }
        eig.compute(lin.hess);
        const Eigen::VectorXd& lam = eig.eigenvalues();
        const Eigen::MatrixXd& V = eig.eigenvectors();
        const double scale = lam.cwiseAbs().maxCoeff();

        if (error <= stage_tol) {
            const double top = lam[lam.size() - 1];
            const bool saddle = last_stage && top > std::max(1e-12, 1e-6 * scale);
            if (!saddle || curvature_steps >= kMaxCurvatureSteps) {
                if (last_stage) {
                    converged = true;
                    break;
                }
                mu = next_mu(mu);
                lin = prob.linearize(u, z, mu);
                continue;
            }
            // Positive curvature left: move along it, uphill in the gradient.
            Eigen::VectorXd dir = V.col(lam.size() - 1);
            if (dir.dot(lin.grad_barrier) < 0.0) dir = -dir;
            dir *= step_cap / dir.lpNorm<Eigen::Infinity>();
            ++curvature_steps;
            ++iterations;
            bool moved = false;
            for (double t = 1.0; t > 1e-12 && !moved; t *= 0.5) {
                trial = u + t * dir;
                moved = prob.barrier(trial, mu) > lin.barrier;
            }
            if (moved) {
                u = trial;
                const Eigen::VectorXd s = prob.slacks(u);
                z = s.cwiseInverse() * mu;
                lin = prob.linearize(u, z, mu);
                check_finite(lin.barrier, "derivative evaluation");
            }
            continue;
        }

        // Newton direction on eigenvalue magnitudes, capped in length, then
        // fraction-to-boundary and Armijo backtracking on the barrier function.
        const Eigen::VectorXd w = V.transpose() * lin.grad_barrier;
        const double floor = std::max(1e-14, 1e-10 * scale);
        Eigen::VectorXd dir = V * (w.array() / lam.array().abs().max(floor)).matrix();
        if (const double len = dir.lpNorm<Eigen::Infinity>(); len > step_cap) dir *= step_cap / len;
        const double slope = lin.grad_barrier.dot(dir);
        double t = 1.0;
        for (int i = 0; i < kMaxAttempts; ++i, t *= 0.5) {
            const Eigen::VectorXd st_trial = prob.slacks(u + t * dir);
            if (((st_trial.array() - (1.0 - kBoundaryFraction) * lin.slack.array()) > 0.0).all()) break;
        }
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt, t *= 0.5) {
            trial = u + t * dir;
            const double Bt = prob.barrier(trial, mu);
            accepted = Bt > lin.barrier && Bt >= lin.barrier + kArmijo * t * slope;
        }
        if (accepted) dir = trial - u;
        ++iterations;
        if (!accepted) {
            // No representable progress at this barrier weight.
            if (last_stage) break;
            mu = next_mu(mu);
            lin = prob.linearize(u, z, mu);
            continue;
        }
        // Dual step from the linearized complementarity, kept positive.
        const Eigen::VectorXd ds = prob.slack_derivative(u, dir);
        const Eigen::VectorXd dz =
            (mu - z.array() * lin.slack.array() - z.array() * ds.array()).matrix().cwiseQuotient(lin.slack);
        double alpha_z = 1.0;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (dz[i] < 0.0) alpha_z = std::min(alpha_z, -kBoundaryFraction * z[i] / dz[i]);
        u = trial;
        z += alpha_z * dz;
        clamp_duals(prob.slacks(u));
        lin = prob.linearize(u, z, mu);
        check_finite(lin.barrier, "derivative evaluation");
    }

    // The interior iterate is feasible by construction; keep it if it scores higher.
    {
        Vec2Seq cand = HorizonProblem::unstack(u);
        const double f = prob.terms(u).value;
        check_finite(f, "final evaluation");
        if (f > best_f && max_constraint_violation(x0, cand, lim, cfg.Ts) <= 0.0) {
            best = std::move(cand);
            best_f = f;
        }
    }

    const auto model = discretize(cfg.Ts);
    const Eigen::VectorXd zb = HorizonProblem::stack(best);
    sol.u_seq = best;
    sol.x_seq = rollout(model, x0, best);
    const auto terms = prob.terms(zb);
    sol.objective = terms.value;
    sol.stage_reward = terms.stage;
    sol.penalty_backward = terms.backward;
    sol.penalty_horizon = terms.horizon;
    sol.iterations = iterations;
    sol.kkt_residual = prob.kkt_residual(u, z);
    sol.max_violation = max_constraint_violation(x0, best, lim, cfg.Ts);
    sol.converged = converged;
    sol.multipliers.assign(z.data(), z.data() + z.size());
    sol.solve_time = std::chrono::steady_clock::now() - start_clock;
    return sol;
}

/// Owns the warm-start state for one mission.
class Planner {
public:
    Planner(const UncertaintyMap& map, PlannerConfig cfg) : map_(map), cfg_(std::move(cfg)) {
        if (auto v = cfg_.violations(); !v.empty()) throw std::invalid_argument(v.front());
    }

    const PlannerConfig& config() const noexcept { return cfg_; }

    HorizonSolution plan(const VehicleState& x0, const HistoryBuffer& history) {
        SolveOptions opts;
        opts.warm_start = warm_u_;
        opts.multipliers = warm_z_;
        opts.seed_salt = solves_++;
        auto sol = solve(map_, x0, history.window(), cfg_, opts);
        last_ = sol;
        return sol;
    }

    /// Shifts the stored solution forward for the next solve.
    void shift(int n_shift) {
        if (!last_) return;
        warm_u_ = shift_warm_start(*last_, n_shift, cfg_.limits.a_max);
        // Same shift for both multiplier blocks.
        const auto& z = last_->multipliers;
        const std::size_t N = z.size() / 2;
        std::vector<double> shifted(z.size());
        for (std::size_t block = 0; block < 2; ++block)
            for (std::size_t i = 0; i < N; ++i)
                shifted[block * N + i] = z[block * N + std::min(i + n_shift, N - 1)];
        warm_z_ = std::move(shifted);
    }

private:
    const UncertaintyMap& map_;
    PlannerConfig cfg_;
    std::optional<Vec2Seq> warm_u_;
    std::optional<std::vector<double>> warm_z_;
    std::optional<HorizonSolution> last_;
    std::uint64_t solves_{0};
};

}  // namespace searchmpc

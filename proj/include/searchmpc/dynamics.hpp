// Discrete double-integrator vehicle model (zero-order hold).
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "searchmpc/types.hpp"

namespace searchmpc {

struct VehicleState {
    Vec2 position{Vec2::Zero()};
    Vec2 velocity{Vec2::Zero()};

    Vec4 stacked() const {
        Vec4 x;
        x << position, velocity;
        return x;
    }
    static VehicleState from_stacked(const Vec4& x) { return {x.head<2>(), x.tail<2>()}; }
    bool finite() const { return position.allFinite() && velocity.allFinite(); }

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct InputLimits {
    double v_max{4.0};
    double a_max{4.0};
};

struct DiscreteModel {
    double Ts;
    Mat4 A;
    Mat42 B;
};

inline DiscreteModel discretize(double Ts) {
    if (!(Ts > 0.0) || !std::isfinite(Ts)) throw std::invalid_argument("sampling period must be > 0");
    DiscreteModel m{Ts, Mat4::Identity(), Mat42::Zero()};
    m.A.topRightCorner<2, 2>() = Ts * Mat2::Identity();
    m.B.topRows<2>() = 0.5 * Ts * Ts * Mat2::Identity();
    m.B.bottomRows<2>() = Ts * Mat2::Identity();
    return m;
}

/// A x + B u, written out blockwise so positions stay exact for zero inputs.
inline VehicleState step(const DiscreteModel& m, const VehicleState& x, const Vec2& u) {
    const double Ts = m.Ts;
    return {x.position + Ts * x.velocity + (0.5 * Ts * Ts) * u, x.velocity + Ts * u};
}

inline std::vector<VehicleState> rollout(const DiscreteModel& m, const VehicleState& x0,
                                         std::span<const Vec2> inputs) {
    if (inputs.empty()) throw std::invalid_argument("rollout needs at least one input");
    std::vector<VehicleState> states;
    states.reserve(inputs.size() + 1);
    states.push_back(x0);
    for (const auto& u : inputs) states.push_back(step(m, states.back(), u));
    return states;
}

/// Scalar gain g such that d position[n] / d input[m] = g * I.
inline double position_gain(double Ts, int n, int m) {
    if (m >= n) return 0.0;
    return Ts * Ts * (0.5 + static_cast<double>(n - 1 - m));
}

/// Position block of A^(n-1-m) B; zero for m >= n (causality).
inline Mat2 position_jacobian(const DiscreteModel& model, int n, int m) {
    if (n < 0 || m < 0) throw std::out_of_range("position_jacobian: negative index");
    return position_gain(model.Ts, n, m) * Mat2::Identity();
}

}  // namespace searchmpc

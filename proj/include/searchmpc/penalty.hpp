// Overlap penalties between equal-radius observation disks.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "searchmpc/types.hpp"

namespace searchmpc {

struct PenaltyParams {
    double alpha{0.4};   // 1/m^2
    double radius{1.0};  // m

    PenaltyParams() = default;
    PenaltyParams(double a, double r) : alpha(a), radius(r) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be > 0");
        if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("radius must be > 0");
    }
};

/// exp(alpha((2r)^2 - |c1 - c2|^2)) - 1. Zero at tangency, tends to -1 far apart.
/// Left unclamped: the negative tail still pushes disks apart.
inline double pair_penalty(const Vec2& c1, const Vec2& c2, const PenaltyParams& p) {
    const double four_r2 = 4.0 * p.radius * p.radius;
    return std::exp(p.alpha * (four_r2 - (c1 - c2).squaredNorm())) - 1.0;
}

/// Gradients with respect to c1 and c2 (they always sum to zero).
inline std::pair<Vec2, Vec2> pair_penalty_grad(const Vec2& c1, const Vec2& c2,
                                               const PenaltyParams& p) {
    const Vec2 diff = c1 - c2;
    const double four_r2 = 4.0 * p.radius * p.radius;
    const Vec2 g1 = (-2.0 * p.alpha * std::exp(p.alpha * (four_r2 - diff.squaredNorm()))) * diff;
    return {g1, -g1};
}

/// Penalty value plus its gradient with respect to c1, sharing one exp().
inline double pair_penalty_with_grad(const Vec2& c1, const Vec2& c2, const PenaltyParams& p,
                                     Vec2& grad_c1) {
    const Vec2 diff = c1 - c2;
    const double four_r2 = 4.0 * p.radius * p.radius;
    const double arg = p.alpha * (four_r2 - diff.squaredNorm());
    const double e = std::exp(arg);
    grad_c1 = (-2.0 * p.alpha * e) * diff;
    return e - 1.0;
}

/// Intersection area of two disks of radius r whose centers are d apart.
inline double lens_overlap_area(double d, double r) {
    if (d < 0.0) throw std::invalid_argument("distance must be nonnegative");
    if (!(r > 0.0)) throw std::invalid_argument("radius must be positive");
    if (d >= 2.0 * r) return 0.0;
    if (d == 0.0) return std::numbers::pi * r * r;
    return 2.0 * r * r * std::acos(d / (2.0 * r)) - 0.5 * d * std::sqrt(4.0 * r * r - d * d);
}

}  // namespace searchmpc

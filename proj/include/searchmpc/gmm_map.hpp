// Gaussian-mixture uncertainty map: density, gradient, and disk-mass integrals.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "searchmpc/types.hpp"

namespace searchmpc {

/// Thrown when a map fails validation. `violations()` lists every problem found.
class InvalidMap : public std::invalid_argument {
public:
    explicit InvalidMap(std::vector<std::string> violations)
        : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid uncertainty map:";
        for (const auto& s : v) out += " [" + s + "]";
        return out;
    }
    std::vector<std::string> violations_;
};

/// Raw component parameters as read from a scenario file.
struct GaussianComponent {
    double weight{1.0};
    Vec2 mean{Vec2::Zero()};
    Mat2 covariance{Mat2::Identity()};
};

inline constexpr double kMaxCovarianceCondition = 1e12;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-9;
inline constexpr int kDefaultQuadratureOrder = 8;

/// Reports every invariant violation of a component list; empty means valid.
inline std::vector<std::string> validate(const std::vector<GaussianComponent>& components,
                                         bool normalized_flag = false) {
    std::vector<std::string> out;
    if (components.empty()) out.emplace_back("components: at least one component is required");
    double total = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
        const auto& c = components[i];
        const std::string at = "components[" + std::to_string(i) + "]";
        if (!std::isfinite(c.weight) || !(c.weight > 0.0))
            out.push_back(at + ".weight: must be positive and finite");
        if (!c.mean.allFinite()) out.push_back(at + ".mean: must be finite");
        if (!c.covariance.allFinite()) {
            out.push_back(at + ".cov: must be finite");
            continue;
        }
        const double a = c.covariance(0, 0), b = c.covariance(0, 1), b2 = c.covariance(1, 0),
                     d = c.covariance(1, 1);
        const double scale = std::max({1.0, std::abs(a), std::abs(d), std::abs(b)});
        if (std::abs(b - b2) > kSymmetryTolerance * scale)
            out.push_back(at + ".cov: not symmetric");
        // Closed-form eigenvalues of the symmetric part.
        const double bs = 0.5 * (b + b2);
        const double mid = 0.5 * (a + d);
        const double rad = std::hypot(0.5 * (a - d), bs);
        const double lmax = mid + rad;
        const double lmin = mid - rad;
        if (!(lmin > 0.0)) {
            out.push_back(at + ".cov: not positive definite");
        } else if (lmax / lmin > kMaxCovarianceCondition) {
            out.push_back(at + ".cov: condition number exceeds 1e12");
        }
        total += c.weight;
    }
    if (normalized_flag && std::abs(total - 1.0) > kNormalizationTolerance)
        out.emplace_back("normalized map weights must sum to 1");
    return out;
}

/// Immutable weighted sum of 2-D Gaussians. Each component keeps its precision
/// matrix and normalizing constant so evaluation never inverts anything.
class UncertaintyMap {
public:
    struct Term {
        GaussianComponent source;
        Mat2 precision;
        double log_det;
        double scale;  // w / (2 pi sqrt|Sigma|)
    };

    explicit UncertaintyMap(std::vector<GaussianComponent> components, bool normalized_flag = false)
        : normalized_(normalized_flag) {
        auto problems = validate(components, normalized_flag);
        if (!problems.empty()) throw InvalidMap(std::move(problems));
        terms_.reserve(components.size());
        for (auto& c : components) {
            Mat2 sym = 0.5 * (c.covariance + c.covariance.transpose());
            c.covariance = sym;
            const double det = sym.determinant();
            terms_.push_back(Term{c, sym.inverse(), std::log(det),
                                  c.weight / (2.0 * std::numbers::pi * std::sqrt(det))});
        }
    }

    const std::vector<Term>& terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }
    bool normalized() const noexcept { return normalized_; }

    std::vector<GaussianComponent> components() const {
        std::vector<GaussianComponent> out;
        out.reserve(terms_.size());
        for (const auto& t : terms_) out.push_back(t.source);
        return out;
    }

    double total_weight() const noexcept {
        double s = 0.0;
        for (const auto& t : terms_) s += t.source.weight;
        return s;
    }

    /// New map with weights rescaled to sum to one.
    UncertaintyMap normalized_copy() const {
        const double total = total_weight();
        auto comps = components();
        for (auto& c : comps) c.weight /= total;
        return UncertaintyMap(std::move(comps), true);
    }

    /// New map with every weight multiplied by `factor`.
    UncertaintyMap scaled(double factor) const {
        auto comps = components();
        for (auto& c : comps) c.weight *= factor;
        return UncertaintyMap(std::move(comps), false);
    }

    /// Largest standard deviation over all components (sqrt of the largest eigenvalue).
    double max_sigma() const {
        double s = 0.0;
        for (const auto& t : terms_) {
            const Mat2& c = t.source.covariance;
            const double mid = 0.5 * (c(0, 0) + c(1, 1));
            const double rad = std::hypot(0.5 * (c(0, 0) - c(1, 1)), c(0, 1));
            s = std::max(s, std::sqrt(mid + rad));
        }
        return s;
    }

    double eval_density(const Vec2& p) const {
        double h = 0.0;
        for (const auto& t : terms_) {
            const Vec2 e = p - t.source.mean;
            h += t.scale * std::exp(-0.5 * e.dot(t.precision * e));
        }
        return h;
    }

    Vec2 eval_gradient(const Vec2& p) const {
        Vec2 g = Vec2::Zero();
        for (const auto& t : terms_) {
            const Vec2 e = t.source.mean - p;
            const Vec2 pe = t.precision * e;
            g += t.scale * std::exp(-0.5 * e.dot(pe)) * pe;
        }
        return g;
    }

    /// Density and gradient in one pass.
    double eval_density_and_gradient(const Vec2& p, Vec2& grad) const {
        double h = 0.0;
        grad.setZero();
        for (const auto& t : terms_) {
            const Vec2 e = t.source.mean - p;
            const Vec2 pe = t.precision * e;
            const double v = t.scale * std::exp(-0.5 * e.dot(pe));
            h += v;
            grad += v * pe;
        }
        return h;
    }

    /// Density, gradient and Hessian in one pass.
    double eval_derivatives(const Vec2& p, Vec2& grad, Mat2& hess) const {
        double h = 0.0;
        grad.setZero();
        hess.setZero();
        for (const auto& t : terms_) {
            const Vec2 e = t.source.mean - p;
            const Vec2 pe = t.precision * e;
            const double v = t.scale * std::exp(-0.5 * e.dot(pe));
            h += v;
            grad += v * pe;
            hess += v * (pe * pe.transpose() - t.precision);
        }
        return h;
    }

private:
    std::vector<Term> terms_;
    bool normalized_;
};

namespace detail {

// erf(x1) - erf(x0) without cancellation in either tail.
inline double erf_diff(double x0, double x1) {
    if (x0 >= 0.0 && x1 >= 0.0) return std::erfc(x0) - std::erfc(x1);
    if (x0 <= 0.0 && x1 <= 0.0) return std::erfc(-x1) - std::erfc(-x0);
    return std::erf(x1) - std::erf(x0);
}

// Int_0^r rho * exp(-(A rho^2 + 2 B rho + C) / 2) d rho, for A > 0.
inline double ray_moment(double A, double B, double C, double r) {
    const double beta = B / A;
    const double residual = std::max(0.0, C - B * beta);
    const double a = std::sqrt(0.5 * A);
    const double s0 = beta;
    const double s1 = r + beta;
    const double t0 = std::exp(-0.5 * (residual + A * s0 * s0));
    const double t1 = std::exp(-0.5 * (residual + A * s1 * s1));
    const double gauss = std::exp(-0.5 * residual) * std::sqrt(std::numbers::pi) / (2.0 * a) *
                         erf_diff(a * s0, a * s1);
    return (t0 - t1) / A - beta * gauss;
}

}  // namespace detail

/// Small-radius disk mass: pi r^2 h(center).
inline double disk_mass_approx(const UncertaintyMap& map, const Vec2& center, double r) {
    return std::numbers::pi * r * r * map.eval_density(center);
}

/// Mass of h over the open disk B_r(center).
///
/// Polar rule about the disk center with 4*order equally spaced rays. Along each
/// ray the radial integral of every Gaussian component is evaluated in closed
/// form, so the only discretization is the periodic trapezoid rule in angle,
/// which converges geometrically for smooth integrands.
inline double disk_mass_quadrature(const UncertaintyMap& map, const Vec2& center, double r,
                                   int order = kDefaultQuadratureOrder) {
    if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
    if (!(r > 0.0)) throw std::invalid_argument("disk radius must be positive");
    const int rays = 4 * order;
    const double dtheta = 2.0 * std::numbers::pi / rays;
    double total = 0.0;
    for (const auto& t : map.terms()) {
        const Vec2 offset = center - t.source.mean;
        const Vec2 p_off = t.precision * offset;
        const double C = offset.dot(p_off);
        double sum = 0.0;
        for (int j = 0; j < rays; ++j) {
            const double theta = (j + 0.5) * dtheta;
            const Vec2 e(std::cos(theta), std::sin(theta));
            sum += detail::ray_moment(e.dot(t.precision * e), e.dot(p_off), C, r);
        }
        total += t.scale * sum * dtheta;
    }
    return total;
}

/// Gradient of the disk mass with respect to the disk center, computed as the
/// boundary flux r * Int h(c + r e(theta)) e(theta) d theta on the same rays.
inline Vec2 disk_mass_quadrature_gradient(const UncertaintyMap& map, const Vec2& center, double r,
                                          int order = kDefaultQuadratureOrder) {
    const int rays = 4 * order;
    const double dtheta = 2.0 * std::numbers::pi / rays;
    Vec2 g = Vec2::Zero();
    for (int j = 0; j < rays; ++j) {
        const double theta = (j + 0.5) * dtheta;
        const Vec2 e(std::cos(theta), std::sin(theta));
        g += map.eval_density(center + r * e) * e;
    }
    return g * (r * dtheta);
}

/// Hessian of the disk mass: r * Int e(theta) grad h(c + r e(theta))^T d theta, symmetrized.
inline Mat2 disk_mass_quadrature_hessian(const UncertaintyMap& map, const Vec2& center, double r,
                                         int order = kDefaultQuadratureOrder) {
    const int rays = 4 * order;
    const double dtheta = 2.0 * std::numbers::pi / rays;
    Mat2 H = Mat2::Zero();
    for (int j = 0; j < rays; ++j) {
        const double theta = (j + 0.5) * dtheta;
        const Vec2 e(std::cos(theta), std::sin(theta));
        H += e * map.eval_gradient(center + r * e).transpose();
    }
    H *= r * dtheta;
    return 0.5 * (H + H.transpose());
}

}  // namespace searchmpc

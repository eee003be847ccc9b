// Shared generators and numerical oracles for the test suites.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "searchmpc/gmm_map.hpp"
#include "searchmpc/types.hpp"

namespace testutil {

using searchmpc::GaussianComponent;
using searchmpc::Mat2;
using searchmpc::UncertaintyMap;
using searchmpc::Vec2;

inline Mat2 random_cov(std::mt19937_64& rng, double smin, double smax) {
    std::uniform_real_distribution<double> s(smin, smax), ang(0.0, std::numbers::pi);
    const double a = ang(rng);
    Mat2 R;
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Vec2 sig(s(rng), s(rng));
    Mat2 C = R * sig.array().square().matrix().asDiagonal() * R.transpose();
    return 0.5 * (C + C.transpose());
}

/// M components with means in [lo, hi]^2 and standard deviations in [smin, smax].
inline UncertaintyMap random_map(std::mt19937_64& rng, int M, double lo = 0.0, double hi = 10.0,
                                 double smin = 1.0, double smax = 3.0) {
    std::uniform_real_distribution<double> pos(lo, hi), w(0.2, 1.0);
    std::vector<GaussianComponent> comps;
    for (int i = 0; i < M; ++i) comps.push_back({w(rng), Vec2(pos(rng), pos(rng)), random_cov(rng, smin, smax)});
    return UncertaintyMap(std::move(comps));
}

inline Vec2 random_point(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return {d(rng), d(rng)};
}

/// Central difference gradient of a scalar field on R^2.
inline Vec2 fd_gradient(const std::function<double(const Vec2&)>& f, const Vec2& p, double h = 1e-6) {
    Vec2 g;
    for (int i = 0; i < 2; ++i) {
        Vec2 e = Vec2::Zero();
        e[i] = h;
        g[i] = (f(p + e) - f(p - e)) / (2.0 * h);
    }
    return g;
}

/// Relative error with an absolute floor so tiny references do not blow up.
inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// Composite Simpson rule in polar coordinates over the disk B_r(c).
inline double simpson_disk(const std::function<double(const Vec2&)>& f, const Vec2& c, double r,
                           int nr = 400, int nt = 400) {
    auto w = [](int i, int n) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
    const double hr = r / nr, ht = 2.0 * std::numbers::pi / nt;
    double s = 0.0;
    for (int i = 0; i <= nr; ++i) {
        const double rho = i * hr;
        double ring = 0.0;
        for (int j = 0; j < nt; ++j) {  // periodic: plain sum is exact-order in angle
            const double t = j * ht;
            ring += f(c + rho * Vec2(std::cos(t), std::sin(t)));
        }
        s += w(i, nr) * rho * ring * ht;
    }
    return s * hr / 3.0;
}

}  // namespace testutil

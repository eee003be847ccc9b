#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "searchmpc/penalty.hpp"
#include "test_util.hpp"

using namespace searchmpc;

namespace {

// Monte-Carlo area of the intersection of two radius-r disks d apart, sampled
// over the bounding box of the first disk.
double mc_lens_area(double d, double r, std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-r, r);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = u(rng), y = u(rng);
        if (x * x + y * y < r * r && (x - d) * (x - d) + y * y < r * r) ++hits;
    }
    return 4.0 * r * r * static_cast<double>(hits) / static_cast<double>(samples);
}

}  // namespace

TEST(PairPenalty, ZeroAtTangency) {
    for (double r : {0.5, 1.0, 2.0})
        for (double a : {0.4, 1.0}) {
            const PenaltyParams p(a, r);
            EXPECT_NEAR(pair_penalty(Vec2(1, 2), Vec2(1 + 2 * r, 2), p), 0.0, 1e-12);
        }
}

TEST(PairPenalty, CoincidentCenters) {
    EXPECT_NEAR(pair_penalty(Vec2(3, 3), Vec2(3, 3), PenaltyParams(0.4, 0.5)), 0.4918246976412703, 1e-15);
}

TEST(PairPenalty, FarApartTendsToMinusOne) {
    const double v = pair_penalty(Vec2::Zero(), Vec2(1e3, 0), PenaltyParams(0.4, 1.0));
    EXPECT_GT(v, -1.0 - 1e-15);
    EXPECT_NEAR(v, -1.0, 1e-15);
    EXPECT_GT(pair_penalty(Vec2::Zero(), Vec2(2.1, 0), PenaltyParams(0.4, 1.0)), -1.0);
    EXPECT_LT(pair_penalty(Vec2::Zero(), Vec2(2.1, 0), PenaltyParams(0.4, 1.0)), 0.0);
}

TEST(PairPenalty, StrictlyDecreasingOnDistanceLadder) {
    const PenaltyParams p(0.4, 0.5);
    double prev = pair_penalty(Vec2::Zero(), Vec2::Zero(), p);
    for (int i = 1; i < 1000; ++i) {
        const double d = 4.0 * i / 999.0;
        const double v = pair_penalty(Vec2::Zero(), Vec2(d, 0), p);
        ASSERT_LT(v, prev) << "d=" << d;
        prev = v;
    }
}

TEST(PairPenalty, DependsOnlyOnDistance) {
    std::mt19937_64 rng(1);
    const PenaltyParams p(0.8, 0.7);
    for (int t = 0; t < 100; ++t) {
        const Vec2 a = testutil::random_point(rng, -5, 5), b = testutil::random_point(rng, -5, 5);
        const Vec2 shift = testutil::random_point(rng, -50, 50);
        const double ang = std::uniform_real_distribution<double>(0, 6.28)(rng);
        Mat2 R;
        R << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
        const double ref = pair_penalty(a, b, p);
        EXPECT_NEAR(pair_penalty(R * a + shift, R * b + shift, p), ref, 1e-12 * std::max(1.0, std::abs(ref)));
        EXPECT_EQ(pair_penalty(b, a, p), ref);
    }
}

TEST(PairPenalty, AlphaOrdersValuesInsideAndOutsideTangency) {
    const double r = 0.5;
    for (double d : {0.0, 0.3, 0.9, 1.1, 1.5, 3.0}) {
        const double lo = pair_penalty(Vec2::Zero(), Vec2(d, 0), PenaltyParams(0.4, r));
        const double hi = pair_penalty(Vec2::Zero(), Vec2(d, 0), PenaltyParams(0.8, r));
        if (d < 2 * r)
            EXPECT_GT(hi, lo) << d;
        else
            EXPECT_LT(hi, lo) << d;
    }
}

TEST(PairPenaltyGrad, ZeroForCoincidentCenters) {
    const auto [g1, g2] = pair_penalty_grad(Vec2(1, 1), Vec2(1, 1), PenaltyParams());
    EXPECT_EQ(g1, Vec2::Zero());
    EXPECT_EQ(g2, Vec2::Zero());
}

namespace {

// Complex-step derivative of the penalty in the first center; exact to rounding.
Vec2 complex_step(const Vec2& a, const Vec2& b, const PenaltyParams& p) {
    const double h = 1e-30;
    Vec2 g;
    for (int k = 0; k < 2; ++k) {
        std::complex<double> dx(a.x() - b.x(), k == 0 ? h : 0.0), dy(a.y() - b.y(), k == 1 ? h : 0.0);
        const double r = p.radius;
        g[k] = std::exp(p.alpha * (4.0 * r * r - dx * dx - dy * dy)).imag() / h;
    }
    return g;
}

}  // namespace

TEST(PairPenaltyGrad, MatchesFiniteDifferencesAndSumsToZero) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        const PenaltyParams p(t % 2 ? 0.4 : 1.0, 0.5 + (t % 3) * 0.25);
        const Vec2 a = testutil::random_point(rng, -2, 2), b = testutil::random_point(rng, -2, 2);
        const auto [g1, g2] = pair_penalty_grad(a, b, p);
        EXPECT_EQ(g1 + g2, Vec2::Zero());
        const Vec2 cs1 = complex_step(a, b, p), cs2 = complex_step(b, a, p);
        EXPECT_LT((g1 - cs1).norm() / std::max(cs1.norm(), 1e-300), 1e-12);
        EXPECT_LT((g2 - cs2).norm() / std::max(cs2.norm(), 1e-300), 1e-12);
        // Central differences lose digits in proportion to |p|; scale by it in the tail.
        const Vec2 fd1 = testutil::fd_gradient([&](const Vec2& q) { return pair_penalty(q, b, p); }, a);
        const double scale = std::max(fd1.norm(), std::abs(pair_penalty(a, b, p)));
        EXPECT_LT((g1 - fd1).norm() / scale, 1e-5);
        Vec2 fused;
        EXPECT_EQ(pair_penalty_with_grad(a, b, p, fused), pair_penalty(a, b, p));
        EXPECT_EQ(fused, g1);
    }
}

TEST(PenaltyParams, RejectsNonPositive) {
    EXPECT_THROW(PenaltyParams(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(PenaltyParams(0.4, -1.0), std::invalid_argument);
}

TEST(LensArea, Endpoints) {
    for (double r : {0.5, 1.0, 3.0}) {
        EXPECT_EQ(lens_overlap_area(0.0, r), std::numbers::pi * r * r);
        EXPECT_EQ(lens_overlap_area(2.0 * r, r), 0.0);
        EXPECT_EQ(lens_overlap_area(5.0 * r, r), 0.0);
    }
}

TEST(LensArea, UnitRadiusAtUnitDistanceMatchesMonteCarlo) {
    const double exact = 2.0 * std::acos(0.5) - 0.5 * std::sqrt(3.0);
    EXPECT_NEAR(lens_overlap_area(1.0, 1.0), exact, 1e-15);
    EXPECT_NEAR(exact, 1.2283697, 1e-7);
    EXPECT_NEAR(lens_overlap_area(1.0, 1.0), mc_lens_area(1.0, 1.0, 10'000'000, 42), 1e-3);
}

TEST(LensArea, MatchesMonteCarloAcrossDistances) {
    for (double d : {0.2, 0.7, 1.4, 1.9})
        EXPECT_NEAR(lens_overlap_area(d, 1.0), mc_lens_area(d, 1.0, 2'000'000, 7), 5e-3) << d;
}

TEST(LensArea, ContinuousAtTangencyAndNonIncreasing) {
    const double r = 0.8;
    EXPECT_LT(lens_overlap_area(2 * r - 1e-9, r), 1e-12);
    double prev = lens_overlap_area(0.0, r);
    for (int i = 1; i <= 500; ++i) {
        const double v = lens_overlap_area(3.0 * r * i / 500.0, r);
        ASSERT_LE(v, prev);
        prev = v;
    }
}

TEST(LensArea, RejectsBadArguments) {
    EXPECT_THROW(lens_overlap_area(-1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(lens_overlap_area(1.0, 0.0), std::invalid_argument);
}

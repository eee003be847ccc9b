#include <gtest/gtest.h>

#include <random>

#include "searchmpc/dynamics.hpp"
#include "test_util.hpp"

using namespace searchmpc;

namespace {

Vec2Seq random_inputs(std::mt19937_64& rng, int n) {
    Vec2Seq u;
    for (int i = 0; i < n; ++i) u.push_back(testutil::random_point(rng, -4, 4));
    return u;
}

}  // namespace

TEST(Discretize, ClosedFormZeroOrderHold) {
    const auto m = discretize(0.1);
    Mat4 A = Mat4::Identity();
    A(0, 2) = A(1, 3) = 0.1;
    Mat42 B = Mat42::Zero();
    B(0, 0) = B(1, 1) = 0.005;
    B(2, 0) = B(3, 1) = 0.1;
    EXPECT_EQ(m.A, A);
    EXPECT_LT((m.B - B).lpNorm<Eigen::Infinity>(), 1e-17);  // Ts^2 / 2 rounds one ulp off 0.005
    EXPECT_THROW(discretize(0.0), std::invalid_argument);
}

TEST(Step, MatchesMatrixForm) {
    std::mt19937_64 rng(1);
    const auto m = discretize(0.07);
    for (int t = 0; t < 50; ++t) {
        const VehicleState x{testutil::random_point(rng, -5, 5), testutil::random_point(rng, -3, 3)};
        const Vec2 u = testutil::random_point(rng, -4, 4);
        const Vec4 ref = m.A * x.stacked() + m.B * u;
        EXPECT_LT((step(m, x, u).stacked() - ref).lpNorm<Eigen::Infinity>(), 1e-14);
    }
}

TEST(Rollout, ZeroInputsFromRestStayPut) {
    const auto m = discretize(0.1);
    const VehicleState x0{Vec2(1.5, -2.0), Vec2::Zero()};
    for (const auto& s : rollout(m, x0, Vec2Seq(20, Vec2::Zero()))) EXPECT_EQ(s, x0);
}

TEST(Rollout, VelocityUnchangedAfterZeroInputs) {
    const auto m = discretize(0.1);
    const VehicleState x0{Vec2(0, 0), Vec2(0.3, -1.7)};
    const auto xs = rollout(m, x0, Vec2Seq(30, Vec2::Zero()));
    for (const auto& s : xs) EXPECT_EQ(s.velocity, x0.velocity);
}

TEST(Rollout, ComposesSteps) {
    std::mt19937_64 rng(2);
    const auto m = discretize(0.1);
    const auto u = random_inputs(rng, 15);
    const VehicleState x0{Vec2(1, 1), Vec2(0.5, 0)};
    const auto xs = rollout(m, x0, u);
    ASSERT_EQ(xs.size(), 16u);
    EXPECT_EQ(xs[0], x0);
    VehicleState x = x0;
    for (int n = 0; n < 15; ++n) {
        x = step(m, x, u[n]);
        EXPECT_EQ(xs[n + 1], x);
    }
    EXPECT_THROW(rollout(m, x0, Vec2Seq{}), std::invalid_argument);
}

TEST(Rollout, ReversedNegatedInputsMirrorVelocities) {
    // From rest, v[n] = Ts * sum_{m<n} u[m]. Reversing and negating u turns the
    // velocity profile into its time mirror shifted by the final velocity.
    std::mt19937_64 rng(3);
    const auto m = discretize(0.1);
    const auto u = random_inputs(rng, 12);
    Vec2Seq w(u.rbegin(), u.rend());
    for (auto& x : w) x = -x;
    const VehicleState rest{Vec2::Zero(), Vec2::Zero()};
    const auto a = rollout(m, rest, u), b = rollout(m, rest, w);
    const Vec2 vN = a.back().velocity;
    for (int n = 0; n <= 12; ++n) EXPECT_LT((b[n].velocity - (a[12 - n].velocity - vN)).norm(), 1e-13);
}

TEST(Rollout, SuperpositionIndependentOfInitialState) {
    std::mt19937_64 rng(4);
    const auto m = discretize(0.1);
    const auto u = random_inputs(rng, 10), v = random_inputs(rng, 10);
    Vec2Seq uv(10);
    for (int i = 0; i < 10; ++i) uv[i] = u[i] + v[i];
    for (int t = 0; t < 5; ++t) {
        const VehicleState x0{testutil::random_point(rng, -9, 9), testutil::random_point(rng, -2, 2)};
        const VehicleState z0{Vec2::Zero(), Vec2::Zero()};
        const auto a = rollout(m, x0, uv), b = rollout(m, x0, u), c = rollout(m, z0, uv), d = rollout(m, z0, u);
        for (int n = 0; n <= 10; ++n)
            EXPECT_LT(((a[n].stacked() - b[n].stacked()) - (c[n].stacked() - d[n].stacked())).norm(), 1e-12);
    }
}

TEST(PositionJacobian, OneStepAndTwoStepValues) {
    const auto m = discretize(0.1);
    EXPECT_LT((position_jacobian(m, 4, 3) - 0.005 * Mat2::Identity()).lpNorm<Eigen::Infinity>(), 1e-17);
    EXPECT_NEAR(position_jacobian(m, 5, 3)(0, 0), 0.015, 1e-17);
    // A * B multiplied out numerically.
    const Vec4 AB = (m.A * m.B).col(0);
    EXPECT_NEAR(AB[0], 0.015, 1e-17);
    EXPECT_EQ(position_jacobian(m, 3, 3), Mat2::Zero());
    EXPECT_EQ(position_jacobian(m, 2, 7), Mat2::Zero());
    EXPECT_THROW(position_jacobian(m, -1, 0), std::out_of_range);
}

TEST(PositionJacobian, MatchesMatrixPowersAndFiniteDifferences) {
    const auto m = discretize(0.13);
    std::mt19937_64 rng(5);
    const auto u = random_inputs(rng, 8);
    const VehicleState x0{Vec2(1, 2), Vec2(-0.5, 0.2)};
    const auto base = rollout(m, x0, u);
    for (int n = 1; n <= 8; ++n) {
        Mat4 Ak = Mat4::Identity();
        for (int mm = n - 1; mm >= 0; --mm) {
            const Mat42 blk = Ak * m.B;  // A^(n-1-mm) B
            EXPECT_LT((position_jacobian(m, n, mm) - blk.topRows<2>()).norm(), 1e-15);
            Ak = Ak * m.A;
            for (int axis = 0; axis < 2; ++axis) {
                auto up = u;
                up[mm][axis] += 1.0;  // linear in u, so a unit step is exact
                const Vec2 fd = (rollout(m, x0, up)[n].position - base[n].position);
                const Vec2 jac = position_jacobian(m, n, mm).col(axis);
                EXPECT_LT((fd - jac).norm() / jac.norm(), 1e-10);
            }
        }
    }
}

#include "latflow/nondivergence.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace latflow;

namespace {

std::vector<ScalarField> veronese_fields(int n) {
    std::vector<ScalarField> f;
    for (int i = 1; i <= n; ++i) {
        std::vector<double> c(static_cast<std::size_t>(i + 1), 0);
        c.back() = 1;
        f.push_back(ScalarField::from_polynomial(Polynomial::univariate(c)));
    }
    return f;
}

RealMatrix nilpotent_shift(int k) {
    RealMatrix m = RealMatrix::Zero(k, k);
    for (int i = 0; i + 1 < k; ++i)
        m(i, i + 1) = 1;
    return m;
}

} // namespace

TEST(Nondivergence, NondivergenceRhs) {
    EXPECT_NEAR(nondivergence_rhs(2, 1, 4, 1, 0.5, 0.5, 2), 2 * 4 * 36.0, 1e-12);
    const double c = 4 * std::sqrt(3.0);
    // 2 * 4 sqrt3 * (3 * 2)^2 * (1e-4)^{1/2}
    EXPECT_NEAR(nondivergence_rhs(2, 1, c, 0.5, 0.5, 0.5e-4, 2), 2 * c * 36 * 1e-2, 1e-12);
    const double a = nondivergence_rhs(3, 1, 5, 0.25, 1.0 / 3, 0.01, 2);
    const double b = nondivergence_rhs(3, 1, 5, 0.25, 1.0 / 3, 0.005, 2);
    EXPECT_NEAR(b / a, std::pow(2.0, -0.25), 1e-12);
    EXPECT_THROW(nondivergence_rhs(2, 1, 4, 1, 0.5, 0.6, 2), std::invalid_argument);
    EXPECT_THROW(nondivergence_rhs(2, 1, 4, 1, 0.6, 0.1, 2), std::invalid_argument);
}

TEST(Nondivergence, UnipotentBoundAtEpsEqualsRho) {
    EXPECT_NEAR(unipotent_bound(2, 0.3, 0.3), 2 * 8 * 36 * std::pow(5.0, 0.25), 1e-9);
}

TEST(Nondivergence, EpsilonGridExtendsBelowVacuousRange) {
    const auto g = epsilon_grid(0.5, 288, 1);
    EXPECT_DOUBLE_EQ(g.front(), 0.5);
    // 288 * 1e-4 < 1, so no extension is needed
    EXPECT_EQ(g.size(), 12u);
    const auto deep = epsilon_grid(0.5, 1e4, 0.5);
    EXPECT_EQ(deep.size(), 15u);
    EXPECT_NEAR(1e4 * std::sqrt(deep.back() / 0.5), 0.02, 1e-12);
}

TEST(Nondivergence, ComputeRho) {
    EXPECT_DOUBLE_EQ(compute_rho(RealMatrix::Identity(2, 2)), 0.5);
    RealMatrix g = RealMatrix::Zero(2, 2);
    g(0, 0) = 0.125L;
    g(1, 1) = 8;
    EXPECT_DOUBLE_EQ(compute_rho(g), 0.125);
    // rank-one terms: rho never exceeds the shortest vector when that is <= 1/k
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 40; ++i) {
        RealMatrix m(3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                m(r, c) = u(rng);
        m *= 1 / std::cbrt(std::abs(m.determinant()));
        const double rho = compute_rho(m);
        const double d = static_cast<double>(delta(Lattice(m)).value);
        EXPECT_LE(rho, 1.0 / 3 + 1e-15);
        if (d <= 1.0 / 3) {
            EXPECT_LE(rho, d + 1e-12);
        }
    }
}

TEST(Nondivergence, ClosedFormTrivialCases) {
    const std::vector<Real> zero(2, 0);
    const FlowVector t0(std::vector<Real>{0, 0});
    MultiVector w(3, {0, 1, -2, 3, 5, -7, 11, 13});
    const auto same = flowed_coordinates(w, zero, t0);
    for (Mask m = 0; m < 8; ++m)
        EXPECT_EQ(same[m], w[m]);

    // n = 1, w = e_1: g_t u_y e_1 = (e^s y, e^{-s})
    const Real s = 0.7L, y = -1.3L;
    const std::vector<Real> yv{y};
    const auto img = flowed_coordinates(MultiVector::basis(2, 0b10), yv, FlowVector(std::vector<Real>{s}));
    EXPECT_NEAR(static_cast<double>(img[0b01]), static_cast<double>(std::exp(s) * y), 1e-15);
    EXPECT_NEAR(static_cast<double>(img[0b10]), static_cast<double>(std::exp(-s)), 1e-15);
}

TEST(Nondivergence, ClosedFormMatchesExteriorAction) {
    std::mt19937_64 rng(54);
    std::uniform_real_distribution<double> u(-2, 2), ut(0, 1.5);
    std::uniform_int_distribution<int> un(1, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = un(rng);
        std::vector<Real> coeffs(std::size_t{1} << (n + 1));
        for (auto& c : coeffs)
            c = u(rng);
        const MultiVector w(n + 1, coeffs);
        std::vector<Real> y(static_cast<std::size_t>(n)), tv(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[static_cast<std::size_t>(i)] = u(rng);
            tv[static_cast<std::size_t>(i)] = ut(rng);
        }
        const FlowVector t(tv);
        const auto closed = flowed_coordinates(w, y, t);
        const auto direct = exterior_action(flowed_matrix(y, t), w);
        for (Mask m = 0; m < w.size(); ++m)
            EXPECT_NEAR(static_cast<double>(closed[m]), static_cast<double>(direct[m]), 1e-10)
                << "trial " << trial << " mask " << m;
    }
}

TEST(Nondivergence, RhoForMap) {
    // f = x on (-1/2, 1/2): min over ||c|| = 1 of sup |c0 + c1 x| is 1/2
    const auto r = rho_for_map(veronese_fields(1), Ball::interval(-0.5, 0.5));
    EXPECT_LE(r.rho, 0.5);
    EXPECT_GT(r.rho, 0.49);
    EXPECT_NEAR(r.grid_min, 0.5, 1e-9);
    // Veronese n = 2 on (-1/2, 1/2): capped at 1/3 or below
    const auto r2 = rho_for_map(veronese_fields(2), Ball::interval(-0.5, 0.5));
    EXPECT_GT(r2.rho, 0);
    EXPECT_LE(r2.rho, 1.0 / 3);
    // dependent components are rejected
    std::vector<ScalarField> dep{ScalarField::from_polynomial(Polynomial::univariate({1.0, 0.0}))};
    EXPECT_THROW(rho_for_map(dep, Ball::interval(0, 1)), std::invalid_argument);
}

TEST(Nondivergence, LinearCombination) {
    const auto f = veronese_fields(2);
    const double c[3] = {1, -2, 3};
    const auto lc = linear_combination(c, f);
    ASSERT_TRUE(lc.is_polynomial());
    EXPECT_DOUBLE_EQ(lc(0.5), 1 - 1 + 0.75);
    std::vector<ScalarField> bb{ScalarField::black_box(1, [](std::span<const double> x) { return std::sin(x[0]); })};
    const double c2[2] = {0.5, 2};
    EXPECT_DOUBLE_EQ(linear_combination(c2, bb)(1.0), 0.5 + 2 * std::sin(1.0));
}

TEST(Nondivergence, UnipotentIdentityOrbit) {
    // u_x g with N = 0 is constant; eps <= rho <= delta gives no events.
    const auto s = unipotent_experiment(RealMatrix::Identity(2, 2), RealMatrix::Zero(2, 2), 100, {}, 500, 1);
    EXPECT_DOUBLE_EQ(s.rho, 0.5);
    for (const auto& r : s.rows) {
        EXPECT_EQ(r.events, 0u);
        EXPECT_NE(r.status, RowStatus::fail);
    }
}

TEST(Nondivergence, UnipotentShearOracle) {
    // u_x (a, b) = (a + x b, b): either b = 0 and |a| >= 1, or |b| >= 1, so
    // delta(u_x Z^2) = 1 for every x and no eps < 1 has events.
    const auto s = unipotent_experiment(RealMatrix::Identity(2, 2), nilpotent_shift(2), 100, {0.5, 0.1, 0.01}, 2000,
                                        2);
    ASSERT_EQ(s.rows.size(), 3u);
    EXPECT_NEAR(s.min_delta, 1.0, 1e-12);
    for (const auto& r : s.rows) {
        EXPECT_EQ(r.events, 0u);
        EXPECT_NE(r.status, RowStatus::fail);
    }
    EXPECT_EQ(s.det_failures, 0u);
}

TEST(Nondivergence, UnipotentRandomK3) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    RealMatrix g(3, 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            g(r, c) = u(rng);
    g *= 1 / std::cbrt(std::abs(g.determinant()));
    RealMatrix n = RealMatrix::Zero(3, 3);
    n(0, 1) = 0.6L;
    n(1, 2) = -0.4L;
    n(0, 2) = 0.3L;
    const auto s = unipotent_experiment(g, n, 100, {}, 3000, 6);
    EXPECT_GE(s.rows.size(), 12u);
    EXPECT_FALSE(s.any_fail());
    EXPECT_EQ(s.det_failures, 0u);
}

TEST(Nondivergence, CurveSweepPasses) {
    MapInstance inst;
    inst.f = veronese_fields(1);
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.t = FlowVector(std::vector<Real>{3});
    inst.C = 4;
    inst.alpha = 1;
    const auto s = curve_experiment(inst, {}, 4000, 7);
    EXPECT_TRUE(s.hypotheses.applicable) << s.hypotheses.note;
    EXPECT_FALSE(s.any_fail());
    EXPECT_EQ(s.det_failures, 0u);
    int nonvacuous = 0;
    for (const auto& r : s.rows)
        nonvacuous += r.status == RowStatus::pass;
    EXPECT_GT(nonvacuous, 3);
}

TEST(Nondivergence, CurveVeroneseHypotheses) {
    MapInstance inst;
    inst.f = veronese_fields(2);
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.t = FlowVector(std::vector<Real>{2, 1});
    const auto gc = good_constants_polynomial(2);
    inst.C = gc.C;
    inst.alpha = gc.alpha;
    const auto s = curve_experiment(inst, {}, 2000, 8);
    EXPECT_TRUE(s.hypotheses.applicable) << s.hypotheses.note;
    EXPECT_FALSE(s.any_fail());
}

TEST(Nondivergence, FlowLatticePoints) {
    const auto p = flow_lattice_points(2, 3);
    EXPECT_EQ(p.size(), 2u + 3u + 4u);
    EXPECT_EQ(p.front(), (std::vector<int>{1, 0}));
    EXPECT_EQ(p.back(), (std::vector<int>{0, 3}));
    EXPECT_EQ(flow_lattice_points(1, 5).size(), 5u);
}

TEST(Nondivergence, SeriesVeronese) {
    const auto f = veronese_fields(2);
    const Point x0{0.0};
    const auto rep = series_experiment(f, x0, 0.5, 2, 0.1, 12, 600, 9);
    EXPECT_EQ(rep.order, 2);
    EXPECT_EQ(rep.constant_label, "polynomial degree l");
    EXPECT_NEAR(rep.D, 3 * 4 * std::sqrt(3.0) * 216, 1e-9);
    EXPECT_EQ(rep.rows.size(), 2u + 3u + 4u + 5u + 6u + 7u + 8u + 9u + 10u + 11u + 12u + 13u);
    EXPECT_FALSE(rep.any_fail());
    EXPECT_EQ(rep.consistency_failures, 0u);
    EXPECT_EQ(rep.partial_sums.size(), 12u);
    for (std::size_t i = 1; i < rep.partial_sums.size(); ++i)
        EXPECT_GE(rep.partial_sums[i], rep.partial_sums[i - 1]);
}

TEST(Nondivergence, SeriesRejectsDegenerate) {
    std::vector<ScalarField> f{ScalarField::from_polynomial(Polynomial::univariate({0.0, 1.0})),
                               ScalarField::from_polynomial(Polynomial::univariate({0.0, 2.0}))};
    const Point x0{0.0};
    EXPECT_THROW(series_experiment(f, x0, 0.5, 2, 0.1, 3, 10, 1), std::invalid_argument);
    EXPECT_THROW(series_experiment(veronese_fields(2), x0, 0.5, 2, 0.0, 3, 10, 1), std::invalid_argument);
}

TEST(Nondivergence, WorkerCountInvariance) {
    MapInstance inst;
    inst.f = veronese_fields(1);
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.t = FlowVector(std::vector<Real>{2});
    inst.C = 4;
    const auto a = curve_experiment(inst, {}, 500, 4, 1, false);
    const auto b = curve_experiment(inst, {}, 500, 4, 3, false);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i)
        EXPECT_EQ(a.rows[i].events, b.rows[i].events);
}

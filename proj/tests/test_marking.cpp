#include "latflow/marking.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace latflow;

namespace {

MarkingInstance constant_instance(RealMatrix m, double rho, int k = 2) {
    MarkingInstance inst;
    inst.k = k;
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.h = [m](std::span<const double>) { return m; };
    inst.C = 4;
    inst.alpha = 1;
    inst.rho = rho;
    return inst;
}

RealMatrix diag2(Real a, Real b) {
    RealMatrix m = RealMatrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// x -> diag(e^t, e^-t) [[1, x], [0, 1]]
MarkingInstance flow_instance(double t, double rho = 0.5) {
    MarkingInstance inst;
    inst.k = 2;
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.h = [t](std::span<const double> x) {
        RealMatrix u = RealMatrix::Identity(2, 2);
        u(0, 1) = x[0];
        return RealMatrix(diag2(std::exp(Real(t)), std::exp(Real(-t))) * u);
    };
    inst.C = 4;
    inst.alpha = 1;
    inst.rho = rho;
    return inst;
}

// k = 3 version with two flow exponents and shear by (x, x^2).
MarkingInstance flow_instance3(double t1, double t2, double rho = 1.0 / 3) {
    MarkingInstance inst;
    inst.k = 3;
    inst.ball = Ball::interval(-0.5, 0.5);
    inst.h = [t1, t2](std::span<const double> x) {
        RealMatrix u = RealMatrix::Identity(3, 3);
        u(0, 1) = x[0];
        u(0, 2) = x[0] * x[0];
        RealMatrix g = RealMatrix::Zero(3, 3);
        g(0, 0) = std::exp(Real(t1 + t2));
        g(1, 1) = std::exp(Real(-t1));
        g(2, 2) = std::exp(Real(-t2));
        return RealMatrix(g * u);
    };
    inst.C = 24;
    inst.alpha = 0.5;
    inst.rho = rho;
    return inst;
}

} // namespace

TEST(Marking, IdentityHasEmptyH) {
    const auto inst = constant_instance(RealMatrix::Identity(2, 2), 0.5);
    const double x[1] = {0};
    EXPECT_TRUE(h_set(inst, x).empty());
    const auto r = is_marked(inst, x, 0.1);
    EXPECT_EQ(r.status, MarkStatus::marked);
    EXPECT_TRUE(r.chain.empty());
}

TEST(Marking, DiagonalHSet) {
    const auto inst = constant_instance(diag2(0.25L, 4), 0.5);
    const double x[1] = {0};
    const auto h = h_set(inst, x);
    ASSERT_EQ(h.size(), 1u);
    IntMatrix e1(1, 2);
    e1 << 1, 0;
    EXPECT_EQ(h[0].subgroup, PrimitiveSubgroup::from_basis(e1));
    EXPECT_NEAR(static_cast<double>(h[0].norm), 0.25, 1e-15);

    EnumerationOptions big;
    big.budget = 2 * kDefaultEnumerationBudget;
    const auto h2 = h_set(inst, x, big);
    ASSERT_EQ(h2.size(), h.size());
    EXPECT_EQ(h2[0].subgroup, h[0].subgroup);
}

TEST(Marking, SingletonChain) {
    const auto inst = constant_instance(diag2(0.4L, 2.5L), 0.5);
    const double x[1] = {0};
    const auto r = is_marked(inst, x, 0.3);
    ASSERT_EQ(r.status, MarkStatus::marked);
    ASSERT_EQ(r.chain.size(), 1u);
    EXPECT_EQ(r.chain[0].rank(), 1);
    EXPECT_TRUE(verify_chain(inst, x, 0.3, r.chain));
}

TEST(Marking, UnmarkedWhenShortSubgroupBelowEps) {
    const auto inst = constant_instance(diag2(0.25L, 4), 0.5);
    const double x[1] = {0};
    EXPECT_EQ(is_marked(inst, x, 0.3).status, MarkStatus::unmarked);
    EXPECT_FALSE(verify_chain(inst, x, 0.3, {}));
    // and marked once eps drops below 1/4
    EXPECT_EQ(is_marked(inst, x, 0.2).status, MarkStatus::marked);
}

TEST(Marking, BoundaryStatus) {
    const auto inst = constant_instance(diag2(0.25L, 4), 0.5);
    const double x[1] = {0};
    EXPECT_EQ(is_marked(inst, x, 0.25).status, MarkStatus::boundary);
    const auto at_rho = constant_instance(diag2(0.5L, 2), 0.5);
    EXPECT_EQ(is_marked(at_rho, x, 0.1).status, MarkStatus::boundary);
}

TEST(Marking, RejectsBadArguments) {
    auto inst = constant_instance(RealMatrix::Identity(2, 2), 0.5);
    const double x[1] = {0};
    EXPECT_THROW(is_marked(inst, x, 0.6), std::invalid_argument);
    EXPECT_THROW(is_marked(inst, x, 0), std::invalid_argument);
    inst.rho = 0.6;
    EXPECT_THROW(inst.validate(), std::invalid_argument);
}

// For k = 2 at most one rank-one subgroup has norm below 1/2 (two independent
// vectors satisfy |v| |w| >= 1/2 in the sup norm), so x is marked exactly when
// delta >= eps.
TEST(Marking, RankTwoAgreesWithDelta) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ut(0, 4), ux(-0.5, 0.5), ue(0.001, 0.5);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const auto inst = flow_instance(ut(rng));
        const double x[1] = {ux(rng)};
        const double eps = ue(rng);
        const auto r = is_marked(inst, x, eps);
        if (r.status == MarkStatus::boundary)
            continue;
        const double d = static_cast<double>(delta(Lattice(inst.at(x))).value);
        EXPECT_EQ(r.status == MarkStatus::marked, d >= eps) << "x=" << x[0] << " eps=" << eps;
        ++checked;
    }
    EXPECT_GT(checked, 390);
}

TEST(Marking, MonotoneInEpsAndChainsVerify) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ut(0, 3), ux(-0.5, 0.5);
    const double grid[] = {0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.003, 0.001};
    for (int i = 0; i < 60; ++i) {
        const auto inst = flow_instance3(ut(rng), ut(rng));
        const double x[1] = {ux(rng)};
        bool was_marked = false;
        for (double eps : grid) {
            const auto r = is_marked(inst, x, eps);
            if (r.status == MarkStatus::boundary)
                continue;
            if (was_marked) {
                EXPECT_EQ(r.status, MarkStatus::marked) << "eps=" << eps;
            }
            if (r.status == MarkStatus::marked) {
                was_marked = true;
                EXPECT_LE(static_cast<int>(r.chain.size()), inst.k);
                EXPECT_TRUE(verify_chain(inst, x, eps, r.chain));
            }
        }
    }
}

// Exhaustive oracle: enumerate all subsets of the candidate set, keep the
// chains, test the norm window and the outsider condition directly.
TEST(Marking, AgreesWithSubsetEnumeration) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ut(1.0, 5.0), ux(-0.5, 0.5), ue(0.001, 0.3);
    int nontrivial = 0, multi = 0, marked_nonempty = 0;
    for (int i = 0; i < 600; ++i) {
        const auto inst = flow_instance3(ut(rng), ut(rng));
        const double x[1] = {ux(rng)};
        const double eps = ue(rng);
        const auto r = is_marked(inst, x, eps);
        if (r.status == MarkStatus::boundary)
            continue;
        const auto hx = inst.at(x);
        const auto all = enumerate_primitive_subgroups_with_norms(3, inst.rho, hx);
        std::vector<PrimitiveSubgroup> cand, h;
        for (const auto& e : all) {
            if (e.norm < inst.rho)
                h.push_back(e.subgroup);
            if (e.norm >= eps)
                cand.push_back(e.subgroup);
        }
        nontrivial += !h.empty();
        multi += h.size() >= 2;
        marked_nonempty += r.status == MarkStatus::marked && !r.chain.empty();
        // Sigma has at most k = 3 elements: try every subset of that size.
        const int n = static_cast<int>(cand.size());
        auto works = [&](const std::vector<PrimitiveSubgroup>& s) {
            for (std::size_t a = 0; a < s.size(); ++a)
                for (std::size_t b = a + 1; b < s.size(); ++b)
                    if (!s[a].comparable_with(s[b]) || s[a] == s[b])
                        return false;
            for (const auto& g : h) {
                if (std::find(s.begin(), s.end(), g) != s.end())
                    continue;
                if (std::all_of(s.begin(), s.end(), [&](const auto& c) { return c.comparable_with(g); }))
                    return false;
            }
            return true;
        };
        bool found = works({});
        for (int a = 0; a < n && !found; ++a) {
            found = works({cand[a]});
            for (int b = a + 1; b < n && !found; ++b) {
                found = works({cand[a], cand[b]});
                for (int c = b + 1; c < n && !found; ++c)
                    found = works({cand[a], cand[b], cand[c]});
            }
        }
        EXPECT_EQ(r.status == MarkStatus::marked, found) << "i=" << i;
    }
    EXPECT_GT(nontrivial, 100);
    EXPECT_GT(multi, 20);
    EXPECT_GT(marked_nonempty, 20);
}

TEST(Marking, DegenerateKZero) {
    MarkingInstance inst;
    inst.k = 0;
    inst.ball = Ball::interval(0, 1);
    const auto e = unmarked_measure_experiment(inst, 0.1, 1000, 1);
    EXPECT_EQ(e.unmarked, 0u);
    EXPECT_EQ(e.row.measured, 0.0);
}

TEST(Marking, EpsEqualsRhoIsVacuous) {
    const auto inst = flow_instance(1.0);
    const auto e = unmarked_measure_experiment(inst, inst.rho * (1 - 1e-6), 200, 3, 1, false);
    EXPECT_EQ(e.row.status, RowStatus::vacuous);
}

TEST(Marking, FlowSweepPassesWithMargin) {
    const auto inst = flow_instance(2.0);
    const auto e = unmarked_measure_experiment(inst, inst.rho * 1e-3, 4000, 5, 1);
    EXPECT_TRUE(e.hypotheses.applicable) << e.hypotheses.note;
    EXPECT_GT(e.hypotheses.subgroups_checked, 0);
    EXPECT_EQ(e.row.status, RowStatus::pass);
    EXPECT_LE(e.row.upper, e.row.bound);
}

TEST(Marking, UnmarkedFractionMonotoneWithCoupledSamples) {
    const auto inst = flow_instance(3.0);
    std::uint64_t prev = ~0ULL;
    for (double eps : {0.3, 0.1, 0.03, 0.01}) {
        const auto e = unmarked_measure_experiment(inst, eps, 1500, 9, 1, false);
        EXPECT_LE(e.unmarked + e.boundary, prev);
        prev = e.unmarked + e.boundary;
    }
}

TEST(Marking, HypothesisFailureIsInapplicable) {
    // C far too small for the sup of linear forms to be good.
    auto inst = flow_instance(2.0);
    inst.C = 0.01;
    const auto e = unmarked_measure_experiment(inst, 0.01, 200, 5, 1);
    EXPECT_FALSE(e.hypotheses.applicable);
    EXPECT_EQ(e.row.status, RowStatus::inapplicable);
}

TEST(Marking, MarkedImpliesDelta) {
    const auto id = constant_instance(RealMatrix::Identity(2, 2), 0.5);
    const auto a = marked_implies_delta_check(id, 0.4, 50, 1);
    EXPECT_EQ(a.marked, 50u);
    EXPECT_EQ(a.violations, 0u);
    EXPECT_NEAR(a.min_marked_delta, 1.0, 1e-12);

    for (double t : {1.0, 2.5}) {
        const auto inst = flow_instance(t);
        const auto r = marked_implies_delta_check(inst, 0.05, 1500, 7, 1);
        EXPECT_EQ(r.violations, 0u);
        EXPECT_EQ(r.small_delta_marked, 0u);
        EXPECT_GT(r.marked, 0u);
    }
    const auto inst3 = flow_instance3(1.5, 1.0);
    const auto r3 = marked_implies_delta_check(inst3, 0.02, 800, 8, 1);
    EXPECT_EQ(r3.violations, 0u);
    EXPECT_EQ(r3.small_delta_marked, 0u);
}

TEST(Marking, WorkerCountDoesNotChangeResults) {
    const auto inst = flow_instance(2.5);
    const auto a = unmarked_measure_experiment(inst, 0.05, 600, 21, 1, false);
    const auto b = unmarked_measure_experiment(inst, 0.05, 600, 21, 3, false);
    EXPECT_EQ(a.unmarked, b.unmarked);
    EXPECT_EQ(a.boundary, b.boundary);
}

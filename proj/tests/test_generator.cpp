#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dualdiv/generator.hpp"
#include "test_support.hpp"

using namespace dualdiv;
using testing_support::kQ;
using testing_support::reference;

namespace {

PiecewiseExpFunction identity_function() {
    PiecewiseExpFunction f;
    f.barrier = 0.0;
    f.above.c1 = -1.0;
    return f;
}

double harmonic_residual(const LevyModel& m, const PiecewiseExpFunction& f, double x, GeneratorOptions o = {}) {
    return apply_generator(m, f, x, o) - kQ * f.value(x);
}

}  // namespace

TEST(ApplyGenerator, IdentityGivesDrift) {
    const auto f = identity_function();
    for (double d : {2.0, 3.0})
        for (double sigma : {0.0, 1.0}) {
            const LevyModel m = reference(d, sigma);
            for (double x : {0.5, 2.0, 10.0}) {
                EXPECT_NEAR(apply_generator(m, f, x), drift_mu(m), 1e-12);
                EXPECT_NEAR(apply_generator(m, f, x, {GeneratorForm::Compensated}), drift_mu(m), 1e-12);
            }
        }
}

TEST(ApplyGenerator, KnotRequiresSide) {
    const auto sol = optimal_barrier_a(reference(2.33, 0.0), kQ);
    const auto f = dividend_function(sol, sol.a_star);
    EXPECT_THROW(apply_generator(sol.sf.model(), f, sol.a_star), KnotEvaluation);
    EXPECT_NO_THROW(apply_generator(sol.sf.model(), f, sol.a_star, {GeneratorForm::Drift,
                                                                    JumpIntegral::ClosedForm, KnotSide::Left}));
}

TEST(PiecewiseFunction, MatchesSolversAndIsContinuous) {
    for (double sigma : {0.0, 1.0}) {
        const auto div = optimal_barrier_a(reference(2.33, sigma), kQ);
        const auto inj = optimal_barrier_b(div.sf, 2.0);
        for (double barrier : {div.a_star, 0.5 * div.a_star}) {
            const auto f = dividend_function(div, barrier);
            EXPECT_NEAR(f.below.value(0.0), f.above.value(0.0), 1e-10);
            for (double x : testing_support::linspace(0.0, 2.0 * barrier + 1.0, 41)) {
                EXPECT_NEAR(f.value(x), value_dividend(div, barrier, x), 1e-10) << x;
                if (x > barrier) EXPECT_EQ(f.deriv(x), 1.0);
            }
            EXPECT_EQ(f.value(-1.0), 0.0);
        }
        for (double barrier : {inj.b_star, 2.0 * inj.b_star}) {
            const auto f = injection_function(inj, barrier);
            EXPECT_NEAR(f.below.value(0.0), f.above.value(0.0), 1e-10);
            for (double x : testing_support::linspace(0.0, 2.0 * barrier + 1.0, 41))
                EXPECT_NEAR(f.value(x), value_injection(inj, barrier, x), 1e-10) << x;
            EXPECT_NEAR(f.value(-0.5), value_injection(inj, barrier, -0.5), 1e-10);
            EXPECT_EQ(f.deriv(-0.5), 2.0);
        }
    }
}

TEST(Harmonicity, BelowOptimalBarriers) {
    for (double sigma : {0.0, 1.0}) {
        const auto div = optimal_barrier_a(reference(2.33, sigma), kQ);
        const auto fd = dividend_function(div, div.a_star);
        for (double x : testing_support::linspace(0.05, div.a_star - 0.05, 25))
            EXPECT_NEAR(harmonic_residual(div.sf.model(), fd, x), 0.0, 1e-7) << x;
        const auto inj = optimal_barrier_b(div.sf, 1.5);
        const auto fi = injection_function(inj, inj.b_star);
        for (double x : testing_support::linspace(0.05, inj.b_star - 0.05, 25))
            EXPECT_NEAR(harmonic_residual(div.sf.model(), fi, x), 0.0, 1e-7) << x;
    }
}

TEST(Harmonicity, SubharmonicAboveBarrier) {
    for (double sigma : {0.0, 1.0}) {
        const auto div = optimal_barrier_a(reference(2.0, sigma), kQ);
        const auto f = dividend_function(div, div.a_star);
        double previous = INFINITY;
        for (double x : testing_support::linspace(div.a_star + 0.01, div.a_star + 20.0, 40)) {
            const double g = harmonic_residual(div.sf.model(), f, x);
            EXPECT_LE(g, 1e-7) << x;
            EXPECT_LE(g, previous + 1e-12) << x;
            previous = g;
        }
        const auto inj = optimal_barrier_b(div.sf, 5.0);
        const auto fi = injection_function(inj, inj.b_star);
        for (double x : testing_support::linspace(inj.b_star + 0.01, inj.b_star + 20.0, 40))
            EXPECT_LE(harmonic_residual(div.sf.model(), fi, x), 1e-7) << x;
    }
}

TEST(JumpIntegral, ClosedFormMatchesQuadrature) {
    for (double sigma : {0.0, 1.0}) {
        const auto div = optimal_barrier_a(reference(2.33, sigma), kQ);
        const auto f = dividend_function(div, div.a_star);
        for (double x : {0.3, 0.5 * div.a_star, div.a_star + 0.5, div.a_star + 8.0}) {
            const double closed = detail::expected_after_jump(div.sf.model(), f, x);
            const double quad = detail::expected_after_jump_quadrature(div.sf.model(), f, x);
            EXPECT_NEAR(closed, quad, 1e-8) << x;
        }
    }
}

TEST(JumpIntegral, ScalarModelClosedForm) {
    // E[f(x + Z)] with f(y) = y and Z ~ Exp(1) is x + 1
    const LevyModel m = testing_support::scalar_model();
    EXPECT_NEAR(detail::expected_after_jump(m, identity_function(), 2.0), 3.0, 1e-14);
}

TEST(GeneratorForms, DriftAndCompensatedAgree) {
    for (double sigma : {0.0, 1.0}) {
        const auto div = optimal_barrier_a(reference(2.33, sigma), kQ);
        const auto f = dividend_function(div, div.a_star);
        for (double x : {0.4, 1.5, div.a_star + 1.0}) {
            const double drift = apply_generator(div.sf.model(), f, x);
            const double comp = apply_generator(div.sf.model(), f, x, {GeneratorForm::Compensated});
            EXPECT_NEAR(drift, comp, 1e-12 * (1.0 + std::abs(drift)));
        }
    }
}

TEST(GeneratorForms, VanishingSigmaMatchesBoundedForm) {
    const LevyModel bv = reference(2.33, 0.0);
    const auto div = optimal_barrier_a(bv, kQ);
    const auto f = dividend_function(div, div.a_star);
    const LevyModel tiny = with_sigma(bv, 1e-200);
    for (double x : {0.4, 1.5, div.a_star + 1.0})
        EXPECT_NEAR(apply_generator(bv, f, x), apply_generator(tiny, f, x), 1e-12);
}

TEST(CheckVIDividend, PassesAtOptimum) {
    for (double d : {2.0, 2.33, 2.67, 3.0})
        for (double sigma : {0.0, 1.0}) {
            const auto sol = optimal_barrier_a(reference(d, sigma), kQ);
            const auto report = check_vi_dividend(sol);
            EXPECT_TRUE(report.pass) << d << " " << sigma << " " << report.max_violation;
            EXPECT_EQ(report.tolerance, 1e-6);
            EXPECT_EQ(report.rows.size(), 200u);
        }
}

TEST(CheckVIDividend, WrongBarrierFails) {
    for (double sigma : {0.0, 1.0}) {
        const auto sol = optimal_barrier_a(reference(2.33, sigma), kQ);
        EXPECT_FALSE(check_vi_dividend(sol, {}, 2.0 * sol.a_star).pass);
        EXPECT_FALSE(check_vi_dividend(sol, {}, 0.5 * sol.a_star).pass);
    }
}

TEST(CheckVIDividend, NonPositiveDriftUsesIdentity) {
    const auto sol = optimal_barrier_a(reference(3.0, 1.0), kQ);
    const auto report = check_vi_dividend(sol);
    EXPECT_TRUE(report.pass);
    for (const auto& row : report.rows) {
        EXPECT_EQ(row.deriv_value, 1.0);
        EXPECT_NEAR(row.gen_value, sol.mu - kQ * row.x, 1e-12);
    }
}

TEST(CheckVIInjection, PassesAndEnforcesNegativeSlope) {
    for (double sigma : {0.0, 1.0})
        for (double c : {1.001, 1.5, 2.0, 5.0}) {
            const auto sol = optimal_barrier_b(build_scale(reference(2.33, sigma), kQ), c);
            GridSpec grid;
            grid.negative_points = 10;
            const auto report = check_vi_injection(sol, grid);
            EXPECT_TRUE(report.pass) << sigma << " " << c << " " << report.max_violation;
            int negatives = 0;
            for (const auto& row : report.rows)
                if (row.x < 0.0) {
                    ++negatives;
                    EXPECT_EQ(row.deriv_value, c);
                }
            EXPECT_EQ(negatives, 10);
        }
}

TEST(CheckVIInjection, WrongBarrierFails) {
    for (double sigma : {0.0, 1.0}) {
        const auto sol = optimal_barrier_b(build_scale(reference(2.33, sigma), kQ), 2.0);
        EXPECT_FALSE(check_vi_injection(sol, {}, 0.5 * sol.b_star).pass);
        EXPECT_FALSE(check_vi_injection(sol, {}, 2.0 * sol.b_star).pass);
    }
}

TEST(CheckVI, QuadratureCrossCheck) {
    const auto sol = optimal_barrier_a(reference(2.33, 1.0), kQ);
    GridSpec grid;
    grid.points = 20;
    grid.cross_check = true;
    const auto report = check_vi_dividend(sol, grid);
    ASSERT_TRUE(report.route_discrepancy.has_value());
    EXPECT_LT(*report.route_discrepancy, 1e-8);
    EXPECT_FALSE(check_vi_dividend(sol).route_discrepancy.has_value());
}

TEST(CheckVI, VerdictMatchesTolerance) {
    const auto sol = optimal_barrier_a(reference(2.33, 0.0), kQ);
    GridSpec strict;
    strict.tolerance = 1e-300;
    const auto report = check_vi_dividend(sol, strict);
    EXPECT_EQ(report.pass, report.max_violation <= 1e-300);
    GridSpec grid;
    grid.knot_exclusion = 1e-6;
    for (const double x : detail::vi_grid(grid, sol.a_star)) EXPECT_GE(std::abs(x - sol.a_star), 1e-6);
}

TEST(VIReport, CsvRows) {
    const auto sol = optimal_barrier_a(reference(2.33, 0.0), kQ);
    GridSpec grid;
    grid.points = 5;
    std::ostringstream os;
    check_vi_dividend(sol, grid).write_csv(os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "x,gen_value,deriv_value,margin");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5);
}

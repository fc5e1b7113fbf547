#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dualdiv/dividend.hpp"
#include "dualdiv/injection.hpp"
#include "dualdiv/montecarlo.hpp"
#include "test_support.hpp"

using namespace dualdiv;
using testing_support::kQ;
using testing_support::reference;

namespace {

SimConfig small(long paths, std::uint64_t seed = 7) {
    SimConfig cfg;
    cfg.n_paths = paths;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
    EXPECT_EQ(Philox4x32::apply({0, 0, 0, 0}, {0, 0}),
              (Philox4x32::ctr_type{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (Philox4x32::ctr_type{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (Philox4x32::ctr_type{0xd16cfe09u, 0x94fdcceb, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathRng, UniformRangeAndAntitheticFlip) {
    PathRng plain(11, 3, 0);
    PathRng flipped(11, 3, 0, true);
    for (int i = 0; i < 10000; ++i) {
        const double u = plain.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        EXPECT_EQ(flipped.uniform(), 1.0 - u);
    }
    PathRng a(11, 3, 1), b(11, 3, 1, true);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(b.normal(), -a.normal());
}

TEST(PathRng, StreamsAreReplayable) {
    PathRng a(5, 100, 2), b(5, 100, 2), c(5, 101, 2);
    int same = 0;
    for (int i = 0; i < 100; ++i) {
        const double ua = a.uniform();
        EXPECT_EQ(ua, b.uniform());
        same += ua == c.uniform();
    }
    EXPECT_EQ(same, 0);
}

TEST(PathRng, NormalMoments) {
    PathRng rng(3, 0, 0);
    detail::RunningStats s;
    const int n = 400000;
    double fourth = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s.add(z);
        fourth += z * z * z * z;
    }
    EXPECT_NEAR(s.mean, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s.variance(), 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(fourth / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(JumpSampler, MatchesPhaseTypeMoments) {
    const LevyModel m = reference(2.33, 0.0);
    const detail::JumpSampler sampler(m.jumps());
    PathRng rng(9, 0, 1);
    detail::RunningStats s;
    const int n = 200000;
    int below_one = 0;
    for (int i = 0; i < n; ++i) {
        const double z = sampler(rng);
        s.add(z);
        below_one += z < 1.0;
    }
    EXPECT_NEAR(s.mean, m.jumps().mean(), 4.0 * std::sqrt(s.variance() / n));
    const double cdf1 = testing_support::integrate([&](double z) { return jump_density(m, z); }, 0.0, 1.0) /
                        m.lambda();
    EXPECT_NEAR(static_cast<double>(below_one) / n, cdf1, 4.0 * std::sqrt(cdf1 * (1 - cdf1) / n));
}

TEST(RunningStats, MergeMatchesSequential) {
    detail::RunningStats all, left, right;
    for (int i = 0; i < 1000; ++i) {
        const double v = std::sin(i * 0.37) * 10 + i * 0.01;
        all.add(v);
        (i < 300 ? left : right).add(v);
    }
    left.merge(right);
    EXPECT_EQ(left.n, all.n);
    EXPECT_NEAR(left.mean, all.mean, 1e-12);
    EXPECT_NEAR(left.variance(), all.variance(), 1e-10);
}

TEST(SimConfigValidation, Errors) {
    const LevyModel bv = reference(2.33, 0.0);
    const LevyModel uv = reference(2.33, 1.0);
    EXPECT_THROW(simulate_dividend(bv, 0.0, 1.0, 1.0, small(100)), ConfigError);
    auto cfg = small(100);
    cfg.t_max = 100.0;
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, cfg), ConfigError);
    cfg = small(100);
    cfg.dt = 0.0;
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, cfg), ConfigError);
    cfg = small(100);
    cfg.dt = 1e-2;
    EXPECT_THROW(simulate_dividend(uv, kQ, 1.0, 1.0, cfg), ConfigError);
    EXPECT_NO_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, cfg));
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, small(1)), ConfigError);
    cfg = small(101);
    cfg.antithetic = true;
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, cfg), ConfigError);
    cfg = small(100);
    cfg.threads = 0;
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, 1.0, cfg), ConfigError);
    EXPECT_THROW(simulate_dividend(bv, kQ, -1.0, 1.0, small(100)), ConfigError);
    EXPECT_THROW(simulate_dividend(bv, kQ, 1.0, -1.0, small(100)), ConfigError);
    EXPECT_THROW(simulate_injection(bv, kQ, 1.0, 1.0, 1.0, small(100)), InvalidCost);
    EXPECT_THROW(simulate_injection(bv, kQ, 0.0, 2.0, 1.0, small(100)), ConfigError);
}

TEST(Simulation, DeterministicAndThreadIndependent) {
    const LevyModel m = reference(2.33, 0.0);
    auto cfg = small(10000);
    const auto a = simulate_injection(m, kQ, 3.0, 2.0, 1.0, cfg);
    const auto b = simulate_injection(m, kQ, 3.0, 2.0, 1.0, cfg);
    cfg.threads = 4;
    const auto c = simulate_injection(m, kQ, 3.0, 2.0, 1.0, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.std_error, c.std_error);
    cfg.seed = 8;
    EXPECT_NE(simulate_injection(m, kQ, 3.0, 2.0, 1.0, cfg).mean, a.mean);
}

TEST(Simulation, BoundedVariationIgnoresTimeStep) {
    const LevyModel m = reference(2.33, 0.0);
    auto cfg = small(5000);
    const auto a = simulate_dividend(m, kQ, 4.0, 1.0, cfg);
    cfg.dt = 0.5;
    const auto b = simulate_dividend(m, kQ, 4.0, 1.0, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Simulation, BoundaryStarts) {
    const LevyModel m = reference(2.33, 0.0);
    const auto sol = optimal_barrier_a(m, kQ);
    const auto ruined = simulate_dividend(m, kQ, sol.a_star, 0.0, small(1000));
    EXPECT_EQ(ruined.mean, 0.0);
    EXPECT_EQ(ruined.std_error, 0.0);

    // start above the barrier: immediate lump of x0 - a
    const auto cfg = small(40000);
    const auto above = simulate_dividend(m, kQ, sol.a_star, sol.a_star + 2.0, cfg);
    const auto at = simulate_dividend(m, kQ, sol.a_star, sol.a_star, cfg);
    EXPECT_NEAR(above.mean - at.mean, 2.0, 1e-9);
    EXPECT_LT(std::abs(above.z_score(value_dividend_opt(sol, sol.a_star + 2.0))), 4.0);
}

TEST(Simulation, TruncationBoundIsNegligible) {
    const LevyModel m = reference(2.33, 0.0);
    const auto est = simulate_dividend(m, kQ, 4.0, 1.0, small(100));
    EXPECT_GT(est.truncation_bound, 0.0);
    EXPECT_LT(est.truncation_bound, 1e-3);
    EXPECT_EQ(est.n_paths, 100);
    EXPECT_DOUBLE_EQ(est.ci95.second - est.ci95.first, 2 * 1.96 * est.std_error);
}

TEST(Simulation, CoverageOverFiftyConfigurations) {
    // 25 dividend and 25 injection settings for sigma = 0, each with its own seed
    int covered = 0, total = 0;
    for (int i = 0; i < 25; ++i) {
        const double d = i % 2 == 0 ? 2.0 : 2.33;
        const auto div = optimal_barrier_a(reference(d, 0.0), kQ);
        const double a = div.a_star * (0.5 + 0.1 * (i % 5));
        const double x0 = a * 0.2 * (i % 4);
        const auto est = simulate_dividend(div.sf.model(), kQ, a, x0, small(4000, 100 + i));
        const double truth = value_dividend(div, a, x0);
        covered += est.ci95.first <= truth && truth <= est.ci95.second;
        ++total;

        const double phi_cost = 1.5 + 0.5 * (i % 3);
        const auto inj = optimal_barrier_b(div.sf, phi_cost);
        const double b = inj.b_star * (0.75 + 0.25 * (i % 3));
        const auto est2 = simulate_injection(div.sf.model(), kQ, b, phi_cost, x0, small(4000, 200 + i));
        const double truth2 = value_injection(inj, b, x0);
        covered += est2.ci95.first <= truth2 && truth2 <= est2.ci95.second;
        ++total;
    }
    EXPECT_EQ(total, 50);
    EXPECT_GE(covered, 44);
}

TEST(Simulation, AntitheticAgreesWithPlain) {
    const LevyModel m = reference(2.33, 0.0);
    const auto sol = optimal_barrier_a(m, kQ);
    auto cfg = small(20000, 31);
    const auto plain = simulate_dividend(m, kQ, sol.a_star, 1.0, cfg);
    cfg.antithetic = true;
    cfg.seed = 32;
    const auto anti = simulate_dividend(m, kQ, sol.a_star, 1.0, cfg);
    const double joint = std::hypot(plain.std_error, anti.std_error);
    EXPECT_LT(std::abs(plain.mean - anti.mean), 4.0 * joint);
    EXPECT_LT(std::abs(anti.z_score(value_dividend_opt(sol, 1.0))), 4.0);
}

TEST(Simulation, DiscountedHorizonMatchesClosedForm) {
    const LevyModel m = reference(2.33, 0.0);
    const auto sol = optimal_barrier_a(m, kQ);
    auto cfg = small(4000, 41);
    cfg.horizon = Horizon::Discounted;
    const auto est = simulate_dividend(m, kQ, sol.a_star, 2.0, cfg);
    EXPECT_LT(std::abs(est.z_score(value_dividend_opt(sol, 2.0))), 4.0);
}

TEST(Simulation, UnboundedVariationWithinBiasAllowance) {
    const LevyModel m = reference(2.33, 1.0);
    const auto sol = optimal_barrier_a(m, kQ);
    auto cfg = small(2000, 51);
    cfg.threads = 4;
    const auto est = simulate_dividend(m, kQ, sol.a_star, 2.0, cfg);
    const double truth = value_dividend_opt(sol, 2.0);
    EXPECT_LE(std::abs(est.mean - truth), 4.0 * est.std_error + 0.005 * std::abs(truth));
}

TEST(Simulation, DecompositionOfInjectionPayoff) {
    const LevyModel m = reference(2.33, 0.0);
    const auto sf = build_scale(m, kQ);
    const double b = 3.0, x0 = 1.0;
    const auto est = simulate_injection(m, kQ, b, 2.0, x0, small(20000, 61));
    EXPECT_NEAR(est.mean, est.mean_dividends - 2.0 * est.mean_injections, 1e-9);
    EXPECT_GT(est.mean_injections, 0.0);
    const double div_truth = expected_dividends_reflected(sf, b, x0);
    const double inj_truth = expected_injections_reflected(sf, b, x0);
    EXPECT_NEAR(est.mean_dividends, div_truth, 0.03 * div_truth);
    EXPECT_NEAR(est.mean_injections, inj_truth, 0.05 * inj_truth);
}

TEST(Simulation, DominanceWithinPooledError) {
    const LevyModel m = reference(2.0, 0.0);
    const auto sol = optimal_barrier_a(m, kQ);
    const auto cfg = small(20000, 71);
    const double x0 = 0.5 * sol.a_star;
    const auto best = simulate_dividend(m, kQ, sol.a_star, x0, cfg);
    for (double f : {0.5, 2.0}) {
        const auto other = simulate_dividend(m, kQ, f * sol.a_star, x0, cfg);
        EXPECT_LE(other.mean, best.mean + 3.0 * std::hypot(best.std_error, other.std_error)) << f;
    }
}

TEST(Simulation, TraceRows) {
    const LevyModel m = reference(2.33, 0.0);
    std::ostringstream os;
    auto cfg = small(6);
    cfg.trace = &os;
    simulate_dividend(m, kQ, 3.0, 1.0, cfg);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "path_id,ruin_time,discounted_dividends,discounted_injections");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
        ++rows;
    }
    EXPECT_EQ(rows, 6);
}

#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <ostream>
#include <vector>

#include "dualdiv/csv.hpp"
#include "dualdiv/dividend.hpp"
#include "dualdiv/errors.hpp"
#include "dualdiv/injection.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

/// c0 + c1 y + sum_k w_k exp(s_k y), written in the distance y = barrier - x.
struct ExpSegment {
    double c0 = 0.0;
    double c1 = 0.0;
    std::vector<cplx> rates;
    std::vector<cplx> weights;

    double value(double y) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < rates.size(); ++k) acc += weights[k] * std::exp(rates[k] * y);
        return c0 + c1 * y + acc.real();
    }
    double dy(double y) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < rates.size(); ++k)
            acc += weights[k] * rates[k] * std::exp(rates[k] * y);
        return c1 + acc.real();
    }
    double dyy(double y) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < rates.size(); ++k)
            acc += weights[k] * rates[k] * rates[k] * std::exp(rates[k] * y);
        return acc.real();
    }
};

enum class LeftExtension { Zero, Linear };
enum class KnotSide { None, Left, Right };

/// Value function with one knot at `barrier`: `below` holds on [0, barrier],
/// `above` (no exponential terms, slope 1 in x) on (barrier, inf). Below 0 the
/// function is either 0 (ruin) or linear with slope `left_slope`.
struct PiecewiseExpFunction {
    double barrier = 0.0;
    ExpSegment below;
    ExpSegment above;
    LeftExtension left_extension = LeftExtension::Zero;
    double left_slope = 0.0;

    const ExpSegment& segment(double x, KnotSide side = KnotSide::None) const {
        if (x == barrier && side != KnotSide::None) return side == KnotSide::Left ? below : above;
        return x <= barrier ? below : above;
    }
    double value(double x) const {
        if (x < 0.0)
            return left_extension == LeftExtension::Zero ? 0.0 : left_slope * x + value(0.0);
        return segment(x).value(barrier - x);
    }
    double deriv(double x, KnotSide side = KnotSide::Left) const {
        if (x < 0.0) return left_extension == LeftExtension::Zero ? 0.0 : left_slope;
        return -segment(x, side).dy(barrier - x);
    }
    double second(double x, KnotSide side = KnotSide::Left) const {
        if (x < 0.0) return 0.0;
        return segment(x, side).dyy(barrier - x);
    }
};

namespace detail {

struct ResidueSums {
    double s1;  // sum r_k / s_k
    double s2;  // sum r_k / s_k^2
};

inline ResidueSums residue_sums(const ScaleFunction& sf) {
    cplx s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < sf.roots().size(); ++k) {
        s1 += sf.coeffs()[k] / sf.roots()[k];
        s2 += sf.coeffs()[k] / (sf.roots()[k] * sf.roots()[k]);
    }
    return {s1.real(), s2.real()};
}

}  // namespace detail

/// v_a from the dividend problem in exponential-polynomial form.
inline PiecewiseExpFunction dividend_function(const DividendSolution& sol, double a) {
    const auto& sf = sol.sf;
    const double q = sf.q();
    const double phi = sf.phi();
    const auto [s1, s2] = detail::residue_sums(sf);
    const double kappa = k_fn(sf, sol.mu, a) / sf.Z(a);

    PiecewiseExpFunction f;
    f.barrier = a;
    f.left_extension = LeftExtension::Zero;
    const double z0 = 1.0 - q * s1;
    const double k_const = -q * s2 - z0 / phi - sol.mu / q;
    f.below.c0 = -k_const + kappa * z0;
    f.below.c1 = -z0;
    for (std::size_t k = 0; k < sf.roots().size(); ++k) {
        const cplx s = sf.roots()[k];
        const cplx r = sf.coeffs()[k];
        const cplx k_exp = q * r / (s * s) - q * r / (s * phi);
        f.below.rates.push_back(s);
        f.below.weights.push_back(-k_exp + kappa * q * r / s);
    }
    f.above.c0 = 1.0 / phi + sol.mu / q + kappa;
    f.above.c1 = -1.0;
    return f;
}

/// bar v_b from the injection problem in exponential-polynomial form.
inline PiecewiseExpFunction injection_function(const InjectionSolution& sol, double b) {
    const auto& sf = sol.sf;
    const double q = sf.q();
    const auto [s1, s2] = detail::residue_sums(sf);
    const double gamma = (sf.Z(b) - sol.phi_cost) / (q * sf.W(b));

    PiecewiseExpFunction f;
    f.barrier = b;
    f.left_extension = LeftExtension::Linear;
    f.left_slope = sol.phi_cost;
    const double z0 = 1.0 - q * s1;
    f.below.c0 = q * s2 + sol.mu / q + gamma * z0;
    f.below.c1 = -z0;
    for (std::size_t k = 0; k < sf.roots().size(); ++k) {
        const cplx s = sf.roots()[k];
        const cplx r = sf.coeffs()[k];
        f.below.rates.push_back(s);
        f.below.weights.push_back(-q * r / (s * s) + gamma * q * r / s);
    }
    f.above.c0 = sol.mu / q + gamma;
    f.above.c1 = -1.0;
    return f;
}

/// Drift form -d f' (+ sigma^2 f''/2) + int [f(x+z) - f(x)] nu(dz), or the
/// compensated form -c f' + ... + int [f(x+z) - f(x) - f'(x) z 1{z<1}] nu(dz).
enum class GeneratorForm { Drift, Compensated };
enum class JumpIntegral { ClosedForm, Quadrature };

struct GeneratorOptions {
    GeneratorForm form = GeneratorForm::Drift;
    JumpIntegral route = JumpIntegral::ClosedForm;
    KnotSide side = KnotSide::None;
};

namespace detail {

/// Tail quantities of the jump law at level y >= 0: P(Z > y) and E[Z; Z > y].
struct JumpTail {
    double survival;
    double tail_mean;
};

inline JumpTail jump_tail(const PhaseType& pt, const Eigen::MatrixXd& E, double y) {
    const auto m = pt.T().rows();
    const Eigen::VectorXd e1 = E * Eigen::VectorXd::Ones(m);
    const Eigen::VectorXd minus_T_inv_e1 = pt.T().partialPivLu().solve(-e1);
    return {(pt.alpha() * e1)(0), (pt.alpha() * (y * e1 + minus_T_inv_e1))(0)};
}

/// E[f(x + Z)] for a single jump Z, in closed form.
inline double expected_after_jump(const LevyModel& model, const PiecewiseExpFunction& f, double x) {
    const auto& pt = model.jumps();
    const double y = f.barrier - x;
    const double mean = pt.mean();
    const auto& up = f.above;
    if (y <= 0.0) return up.c0 + up.c1 * (y - mean);

    const Eigen::MatrixXd E = (pt.T() * y).exp();
    const auto tail = jump_tail(pt, E, y);
    const double cdf = 1.0 - tail.survival;
    const auto& lo = f.below;
    double acc = lo.c0 * cdf + lo.c1 * (y * cdf - (mean - tail.tail_mean));

    const Eigen::VectorXcd Et = (E * pt.exit_vector()).cast<cplx>();
    const Eigen::VectorXcd t = pt.exit_vector().cast<cplx>();
    const Eigen::RowVectorXcd alpha = pt.alpha().cast<cplx>();
    cplx exp_part = 0.0;
    for (std::size_t k = 0; k < lo.rates.size(); ++k) {
        const cplx s = lo.rates[k];
        Eigen::MatrixXcd A = pt.T().cast<cplx>();
        A.diagonal().array() -= s;
        const Eigen::VectorXcd rhs = Et - std::exp(s * y) * t;
        exp_part += lo.weights[k] * (alpha * A.partialPivLu().solve(rhs))(0);
    }
    acc += exp_part.real();
    acc += up.c0 * tail.survival + up.c1 * (y * tail.survival - tail.tail_mean);
    return acc;
}

/// Jump density alpha exp(T z) t through the spectral decomposition of T,
/// with a Pade fallback when the eigenvectors are ill-conditioned.
class SpectralDensity {
public:
    explicit SpectralDensity(const PhaseType& pt) : pt_(pt) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(pt.T());
        const Eigen::MatrixXcd V = es.eigenvectors();
        const auto lu = V.fullPivLu();
        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
        const auto sv = svd.singularValues();
        spectral_ = lu.isInvertible() && sv(sv.size() - 1) > 0.0 &&
                    sv(0) / sv(sv.size() - 1) < 1e8;
        if (spectral_) {
            rates_ = es.eigenvalues();
            const Eigen::RowVectorXcd left = pt.alpha().cast<cplx>() * V;
            const Eigen::VectorXcd right = lu.solve(pt.exit_vector().cast<cplx>());
            weights_ = left.transpose().cwiseProduct(right);
        }
    }
    double operator()(double z) const {
        if (!spectral_) {
            const Eigen::MatrixXd E = (pt_.T() * z).exp();
            return (pt_.alpha() * E * pt_.exit_vector())(0);
        }
        cplx acc = 0.0;
        for (Eigen::Index j = 0; j < rates_.size(); ++j) acc += weights_(j) * std::exp(rates_(j) * z);
        return acc.real();
    }

private:
    const PhaseType& pt_;
    bool spectral_ = false;
    Eigen::VectorXcd rates_;
    Eigen::VectorXcd weights_;
};

/// Same expectation by adaptive Gauss-Kronrod on [0, y] and [y, y + 40],
/// with the exact linear tail beyond.
inline double expected_after_jump_quadrature(const LevyModel& model, const PiecewiseExpFunction& f,
                                             double x) {
    using boost::math::quadrature::gauss_kronrod;
    const auto& pt = model.jumps();
    const double y = f.barrier - x;
    const SpectralDensity density(pt);
    auto integrand = [&](double z) { return f.value(x + z) * density(z); };
    double acc = 0.0;
    const double knot = std::max(y, 0.0);
    if (knot > 0.0) acc += gauss_kronrod<double, 31>::integrate(integrand, 0.0, knot, 10, 1e-11);
    const double cut = knot + 40.0;
    acc += gauss_kronrod<double, 31>::integrate(integrand, knot, cut, 10, 1e-11);
    const Eigen::MatrixXd E = (pt.T() * cut).exp();
    const auto tail = jump_tail(pt, E, cut);
    acc += f.above.c0 * tail.survival + f.above.c1 * (y * tail.survival - tail.tail_mean);
    return acc;
}

}  // namespace detail

/// (L f)(x) for the generator of X acting on a piecewise exponential function.
inline double apply_generator(const LevyModel& model, const PiecewiseExpFunction& f, double x,
                              GeneratorOptions opts = {}) {
    if (std::abs(x - f.barrier) <= 1e-12 * (1.0 + f.barrier) && opts.side == KnotSide::None)
        throw KnotEvaluation("generator requested at the knot without a one-sided mode");
    const KnotSide side = opts.side == KnotSide::None ? KnotSide::Left : opts.side;
    const double fx = f.value(x);
    const double d1 = f.deriv(x, side);
    const double after = opts.route == JumpIntegral::ClosedForm
                             ? detail::expected_after_jump(model, f, x)
                             : detail::expected_after_jump_quadrature(model, f, x);
    double out = model.lambda() * (after - fx);
    if (model.sigma() > 0.0) out += 0.5 * model.sigma() * model.sigma() * f.second(x, side);
    if (opts.form == GeneratorForm::Drift) {
        out -= model.drift_d() * d1;
    } else {
        out -= triplet_drift_c(model) * d1;
        out -= d1 * small_jump_mean(model);
    }
    return out;
}

struct GridSpec {
    double x_min = 0.0;
    double x_max = 0.0;  // 0 selects 3 x barrier (or 10 when the barrier is 0)
    int points = 200;
    double knot_exclusion = 1e-6;
    int negative_points = 0;  // extra points on [-1, 0) for the injection slope check
    double tolerance = 1e-6;
    bool cross_check = false;  // also evaluate the jump integral by quadrature
};

struct VIRow {
    double x;
    double gen_value;    // (L - q) f(x); 0 for x < 0
    double deriv_value;  // f'(x)
    double margin;       // violation at this point (0 when satisfied exactly)
};

struct VIReport {
    std::vector<VIRow> rows;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    /// max |closed form - quadrature| of (L - q) f over the grid, when requested
    std::optional<double> route_discrepancy;

    void write_csv(std::ostream& os) const;
};

namespace detail {

inline std::vector<double> vi_grid(const GridSpec& g, double barrier) {
    const double x_max = g.x_max > 0.0 ? g.x_max : (barrier > 0.0 ? 3.0 * barrier : 10.0);
    std::vector<double> xs;
    for (int i = 0; i < g.negative_points; ++i)
        xs.push_back(-1.0 + static_cast<double>(i) / static_cast<double>(g.negative_points));
    for (int i = 1; i <= g.points; ++i) {
        const double x = g.x_min + (x_max - g.x_min) * (static_cast<double>(i) - 0.5) / g.points;
        if (std::abs(x - barrier) < g.knot_exclusion || x <= 0.0) continue;
        xs.push_back(x);
    }
    return xs;
}

enum class Problem { Dividend, Injection };

inline VIReport check_vi(const LevyModel& model, double q, const PiecewiseExpFunction& f,
                         const GridSpec& grid, Problem problem, double phi_cost) {
    VIReport report;
    report.tolerance = grid.tolerance;
    double discrepancy = 0.0;
    for (const double x : vi_grid(grid, f.barrier)) {
        VIRow row{x, 0.0, f.deriv(x), 0.0};
        if (x < 0.0) {
            row.margin = std::abs(row.deriv_value - phi_cost);
        } else {
            row.gen_value = apply_generator(model, f, x) - q * f.value(x);
            if (grid.cross_check) {
                const double alt = apply_generator(model, f, x, {GeneratorForm::Drift,
                                                                 JumpIntegral::Quadrature}) -
                                   q * f.value(x);
                discrepancy = std::max(discrepancy, std::abs(alt - row.gen_value));
            }
            const double slack = 1.0 - row.deriv_value;
            if (x < f.barrier)
                row.margin = std::max(std::abs(row.gen_value), std::max(slack, 0.0));
            else
                row.margin = std::max(std::max(row.gen_value, 0.0), std::abs(slack));
            if (problem == Problem::Injection)
                row.margin = std::max(row.margin, row.deriv_value - phi_cost);
        }
        report.max_violation = std::max(report.max_violation, row.margin);
        report.rows.push_back(row);
    }
    if (grid.cross_check) report.route_discrepancy = discrepancy;
    report.pass = report.max_violation <= report.tolerance;
    return report;
}

}  // namespace detail

inline void VIReport::write_csv(std::ostream& os) const {
    os << "x,gen_value,deriv_value,margin\n";
    for (const auto& r : rows)
        os << fmt17(r.x) << ',' << fmt17(r.gen_value) << ',' << fmt17(r.deriv_value) << ','
           << fmt17(r.margin) << '\n';
}

/// Checks max{(L - q) v(x), 1 - v'(x)} = 0 on x > 0 for the barrier strategy at
/// `barrier` (default a*). Failures are reported, never thrown.
inline VIReport check_vi_dividend(const DividendSolution& sol, const GridSpec& grid = {},
                                  std::optional<double> barrier = std::nullopt) {
    const double a = barrier.value_or(sol.a_star);
    return detail::check_vi(sol.sf.model(), sol.q, dividend_function(sol, a), grid,
                            detail::Problem::Dividend, 0.0);
}

/// Adds the slope bounds v' <= phi on x > 0 and v' = phi on x < 0.
inline VIReport check_vi_injection(const InjectionSolution& sol, const GridSpec& grid = {},
                                   std::optional<double> barrier = std::nullopt) {
    const double b = barrier.value_or(sol.b_star);
    return detail::check_vi(sol.sf.model(), sol.q, injection_function(sol, b), grid,
                            detail::Problem::Injection, sol.phi_cost);
}

}  // namespace dualdiv

#pragma once

#include <optional>

#include "dualdiv/barrier_kernel.hpp"
#include "dualdiv/dividend.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

/// Optimal upper barrier b* = Z^{-1}(phi) for dividends with capital
/// injections at unit cost phi > 1 (reflection at 0 and at b*).
struct InjectionSolution {
    double q;
    double phi_cost;
    double b_star;
    double mu;
    ScaleFunction sf;
};

inline InjectionSolution optimal_barrier_b(const ScaleFunction& sf, double phi_cost) {
    if (!(phi_cost > 1.0)) throw InvalidCost("injection cost phi must exceed 1");
    const double q = sf.q();
    const double b_star = detail::monotone_inverse([&](double b) { return sf.Z(b); },
                                                   [&](double b) { return q * sf.W(b); }, phi_cost,
                                                   1e-12 * phi_cost);
    return {q, phi_cost, b_star, drift_mu(sf.model()), sf};
}

/// E_x[int e^{-qt} dL^b] for the process reflected at 0 and b.
inline double expected_dividends_reflected(const ScaleFunction& sf, double b, double x) {
    const double q = sf.q();
    const double mu = drift_mu(sf.model());
    return -sf.Zbar(b - x) + mu / q + sf.Z(b) / (q * sf.W(b)) * sf.Z(b - x);
}

/// E_x[int e^{-qt} dR^0] for the process reflected at 0 and b.
inline double expected_injections_reflected(const ScaleFunction& sf, double b, double x) {
    return sf.Z(b - x) / (sf.q() * sf.W(b));
}

/// bar v_b(x); for x < 0 the value is phi x + bar v_b(0) (inject -x at once).
inline double value_injection(const InjectionSolution& sol, double b, double x) {
    const auto& sf = sol.sf;
    if (x < 0.0) return sol.phi_cost * x + value_injection(sol, b, 0.0);
    const double q = sf.q();
    return -sf.Zbar(b - x) + sol.mu / q +
           (sf.Z(b) - sol.phi_cost) / (q * sf.W(b)) * sf.Z(b - x);
}

inline double value_injection_opt(const InjectionSolution& sol, double x) {
    if (x < 0.0) return sol.phi_cost * x + value_injection_opt(sol, 0.0);
    return reflected_value(sol.sf, sol.mu, sol.b_star, x);
}

/// bar v_b'(x) = Z(b-x) - W(b-x)/W(b) (Z(b) - phi); second derivative only for
/// unbounded variation. Left limit at x = b; slope phi below 0.
inline ValueDerivatives injection_derivatives(const InjectionSolution& sol, double b, double x) {
    const auto& sf = sol.sf;
    const bool unbounded = path_variation(sf.model()) == PathVariation::Unbounded;
    const auto second = [&](double v) { return unbounded ? std::optional<double>(v) : std::nullopt; };
    if (x < 0.0) return {sol.phi_cost, second(0.0)};
    const double y = b - x;
    const double excess = (sf.Z(b) - sol.phi_cost) / sf.W(b);
    const double first = sf.Z(y) - sf.W(y) * excess;
    return {first, second(-sf.q() * sf.W(y) + sf.W_prime(y) * excess)};
}

}  // namespace dualdiv

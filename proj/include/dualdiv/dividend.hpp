#pragma once

#include <optional>

#include "dualdiv/barrier_kernel.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

/// First and (for unbounded variation only) second derivative in x.
struct ValueDerivatives {
    double first;
    std::optional<double> second;
};

/// Optimal barrier a* for dividends paid until ruin, and the scale function
/// every evaluator below is expressed with.
struct DividendSolution {
    double q;
    double a_star;
    double mu;
    ScaleFunction sf;
    double value_at_barrier;
};

/// k(y) = Zbar(y) - Z(y)/Phi(q) - mu/q; linear for y <= 0.
inline double k_fn(const ScaleFunction& sf, double mu, double y) {
    return sf.Zbar(y) - sf.Z(y) / sf.phi() - mu / sf.q();
}

/// Lambda(a) = 1/Phi(q) + k(a)/Z(a); vanishes exactly where Zbar(a) = mu/q.
inline double lambda_fn(const ScaleFunction& sf, double mu, double a) {
    return 1.0 / sf.phi() + k_fn(sf, mu, a) / sf.Z(a);
}

/// v_a(x) for the barrier strategy at level a, valid on both sides of a.
inline double value_dividend(const DividendSolution& sol, double a, double x) {
    const auto& sf = sol.sf;
    return -k_fn(sf, sol.mu, a - x) + sf.Z(a - x) / sf.Z(a) * k_fn(sf, sol.mu, a);
}

/// v_{a*}(x): mu/q - Zbar(a* - x) when mu > 0, and x otherwise.
inline double value_dividend_opt(const DividendSolution& sol, double x) {
    if (sol.mu <= 0.0) return x;
    return reflected_value(sol.sf, sol.mu, sol.a_star, x);
}

inline DividendSolution optimal_barrier_a(const ScaleFunction& sf) {
    const double mu = drift_mu(sf.model());
    const double q = sf.q();
    double a_star = 0.0;
    if (mu > 0.0) {
        a_star = detail::monotone_inverse([&](double a) { return sf.Zbar(a); },
                                          [&](double a) { return sf.Z(a); }, mu / q,
                                          1e-12 * (1.0 + mu / q));
    }
    DividendSolution sol{q, a_star, mu, sf, 0.0};
    sol.value_at_barrier = value_dividend_opt(sol, a_star);
    return sol;
}

inline DividendSolution optimal_barrier_a(const LevyModel& model, double q) {
    return optimal_barrier_a(build_scale(model, q));
}

/// v_a'(x) = Z(a-x) - q W(a-x) Lambda(a) and, for unbounded variation,
/// v_a''(x) = -q W(a-x) + q W'(a-x) Lambda(a). At x = a the left limit is used.
/// For a = 0 there is no continuation region and v_0(x) = x.
inline ValueDerivatives value_derivatives(const DividendSolution& sol, double a, double x) {
    const auto& sf = sol.sf;
    const bool unbounded = path_variation(sf.model()) == PathVariation::Unbounded;
    if (a <= 0.0) return {1.0, unbounded ? std::optional<double>(0.0) : std::nullopt};
    const double y = a - x;
    const double lam = lambda_fn(sf, sol.mu, a);
    const double q = sf.q();
    if (y < 0.0) return {1.0, unbounded ? std::optional<double>(0.0) : std::nullopt};
    const double first = sf.Z(y) - q * sf.W(y) * lam;
    if (!unbounded) return {first, std::nullopt};
    return {first, -q * sf.W(y) + q * sf.W_prime(y) * lam};
}

}  // namespace dualdiv

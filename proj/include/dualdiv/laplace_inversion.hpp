#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "dualdiv/errors.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

struct InversionOptions {
    int terms = 21;                // Euler parameter M; 2M + 1 transform evaluations
    std::optional<double> shift;   // explicit shift c; chosen automatically when absent
    double margin = 0.5;           // required distance of the contour to the right of Phi(q)
};

namespace detail {

/// Euler-summation weights xi_k for k = 0..2M.
inline std::vector<double> euler_weights(int M) {
    std::vector<double> xi(2 * M + 1, 1.0);
    xi[0] = 0.5;
    xi[2 * M] = std::ldexp(1.0, -M);
    double binom = 1.0;
    for (int k = 1; k < M; ++k) {
        binom *= static_cast<double>(M - k + 1) / k;
        xi[2 * M - k] = xi[2 * M - k + 1] + std::ldexp(binom, -M);
    }
    return xi;
}

}  // namespace detail

/// W^(q)(x) by Abate-Whitt Euler inversion of 1/(psi(s) - q). The transform is
/// shifted by c so the contour abscissa c + M ln(10)/(3x) clears Phi(q) + margin.
inline double laplace_inversion_oracle(const LevyModel& model, double q, double x,
                                       const InversionOptions& opts = {}) {
    if (!(x > 0.0)) throw ConfigError("laplace inversion requires x > 0");
    if (opts.terms < 2) throw ConfigError("laplace inversion requires at least 2 terms");
    const int M = opts.terms;
    const double beta0 = M * std::log(10.0) / 3.0;
    const double floor = phi(model, q) + opts.margin;
    double c = std::max(0.0, floor - beta0 / x);
    if (opts.shift) {
        if (*opts.shift + beta0 / x < floor)
            throw ContourTooClose("inversion contour does not clear Phi(q) + margin");
        c = *opts.shift;
    }
    const auto xi = detail::euler_weights(M);
    double acc = 0.0;
    for (int k = 0; k <= 2 * M; ++k) {
        const cplx s = cplx(beta0, M_PI * k) / x + c;
        const double term = (1.0 / (laplace_exponent(model, s) - q)).real();
        acc += (k % 2 == 0 ? xi[k] : -xi[k]) * term;
    }
    return std::exp(c * x) * std::pow(10.0, M / 3.0) / x * acc;
}

}  // namespace dualdiv

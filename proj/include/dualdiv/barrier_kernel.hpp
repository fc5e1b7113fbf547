#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "dualdiv/errors.hpp"
#include "dualdiv/scale_function.hpp"

namespace dualdiv {

/// mu/q - Zbar(barrier - x): the common closed form of both optimal value
/// functions (dividends until ruin, and dividends with capital injection).
inline double reflected_value(const ScaleFunction& sf, double mu, double barrier, double x) {
    return mu / sf.q() - sf.Zbar(barrier - x);
}

namespace detail {

/// Root of an increasing function f with derivative df on (0, inf), given
/// f(0+) < target. Bracket [lo, 1] is doubled until it straddles the target,
/// then Newton steps are taken, falling back to bisection whenever a step
/// leaves the bracket.
inline double monotone_inverse(const std::function<double(double)>& f,
                               const std::function<double(double)>& df, double target,
                               double residual_tol) {
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw BracketFailure("monotone inverse: target not bracketed below 1e8");
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = f(x) - target;
        if (std::abs(fx) <= residual_tol) break;
        (fx > 0.0 ? hi : lo) = x;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        const double slope = df(x);
        double next = slope > 0.0 ? x - fx / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    return x;
}

}  // namespace detail

}  // namespace dualdiv

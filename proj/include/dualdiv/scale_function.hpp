#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "dualdiv/errors.hpp"
#include "dualdiv/levy_model.hpp"
#include "dualdiv/polynomial.hpp"

namespace dualdiv {

namespace detail {

// (e^z - 1) / z and (e^z - 1 - z) / z^2 without cancellation near z = 0.
inline cplx exp_rel1(cplx z) {
    if (std::abs(z) < 0.5) {
        cplx term = 1.0, sum = 1.0;
        for (int n = 1; n < 30; ++n) {
            term *= z / static_cast<double>(n + 1);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

inline cplx exp_rel2(cplx z) {
    if (std::abs(z) < 0.5) {
        cplx term = 0.5, sum = 0.5;
        for (int n = 1; n < 30; ++n) {
            term *= z / static_cast<double>(n + 2);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return (std::exp(z) - 1.0 - z) / (z * z);
}

inline bool close_roots(cplx a, cplx b) {
    return std::abs(a - b) < 1e-7 * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

/// Phi(q): the unique root of psi(s) = q on (0, inf), by bracketed bisection
/// followed by a guarded Newton polish.
inline double phi(const LevyModel& model, double q) {
    if (!(q > 0.0)) throw ValidationError("q must be positive");
    auto f = [&](double s) { return laplace_exponent(model, s) - q; };
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw BracketFailure("no sign change of psi(s) - q below s = 1e6");
    }
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
        const double step = f(s) / laplace_exponent_deriv(model, s);
        const double next = s - step;
        if (!(next > 0.0) || std::abs(f(next)) > std::abs(f(s))) break;
        s = next;
    }
    return s;
}

/// All roots of psi(s) = q: the zeros of
///   P(s) = (d s + sigma^2 s^2 / 2 - lambda - q) det(sI - T) + lambda alpha adj(sI - T) t,
/// from the companion matrix, each polished by Newton on psi(s) - q. Candidates
/// that are not roots of psi itself (cancellation against eigenvalues of T) are
/// dropped. The positive root is replaced by phi(model, q).
inline std::vector<cplx> find_roots(const LevyModel& model, double q) {
    if (!(q > 0.0)) throw ValidationError("q must be positive");
    const auto& pt = model.jumps();
    const auto expansion = poly::faddeev_leverrier(pt.T());
    const double lam = model.lambda();

    poly::Poly outer = {-lam - q, model.drift_d(), 0.5 * model.sigma() * model.sigma()};
    poly::Poly P = poly::multiply(outer, expansion.charpoly);
    const auto m = expansion.adjugate.size();
    poly::Poly inner(m, 0.0);
    for (std::size_t k = 1; k <= m; ++k)
        inner[m - k] = lam * (pt.alpha() * expansion.adjugate[k - 1] * pt.exit_vector())(0);
    P = poly::add(P, inner);

    const double tol = 1e-8 * (1.0 + q);
    struct Candidate {
        cplx start;
        cplx root;
        bool near_pole;
    };
    std::vector<Candidate> found;
    const double T_norm = pt.T().norm();
    for (const cplx start : poly::companion_roots(P)) {
        bool near_pole = false;
        for (Eigen::Index i = 0; i < pt.eigenvalues().size(); ++i)
            if (std::abs(start - pt.eigenvalues()(i)) < 1e-6 * (1.0 + T_norm)) near_pole = true;
        cplx s = start;
        try {
            for (int it = 0; it < 30; ++it) {
                const cplx step = (laplace_exponent(model, s) - q) / laplace_exponent_deriv(model, s);
                s -= step;
                if (std::abs(step) < 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(s)))
                    break;
            }
            // snap numerically real roots onto the axis
            if (std::abs(s.imag()) < 1e-10 * (1.0 + std::abs(s))) {
                double x = s.real();
                for (int it = 0; it < 3; ++it)
                    x -= (laplace_exponent(model, x) - q) / laplace_exponent_deriv(model, x);
                s = cplx(x, 0.0);
            }
            if (!(std::abs(laplace_exponent(model, s) - q) < tol)) continue;
        } catch (const SingularResolvent&) {
            continue;
        }
        found.push_back({start, s, near_pole});
    }

    // Collapse duplicates produced by spurious candidates next to a pole.
    std::vector<Candidate> kept;
    for (const auto& c : found) {
        auto dup = std::find_if(kept.begin(), kept.end(),
                                [&](const Candidate& k) { return detail::close_roots(k.root, c.root); });
        if (dup == kept.end()) {
            kept.push_back(c);
            continue;
        }
        if (detail::close_roots(dup->start, c.start) || (!dup->near_pole && !c.near_pole))
            throw MultipleRootDetected("psi(s) = q has (numerically) repeated roots");
        if (dup->near_pole) *dup = c;
    }

    std::vector<cplx> roots;
    for (const auto& k : kept) roots.push_back(k.root);

    // Enforce exact conjugate pairing.
    std::vector<cplx> upper, lower, real_roots;
    for (const cplx s : roots) {
        if (s.imag() > 0.0) upper.push_back(s);
        else if (s.imag() < 0.0) lower.push_back(s);
        else real_roots.push_back(s);
    }
    std::vector<cplx> out = real_roots;
    if (upper.size() == lower.size()) {
        for (const cplx u : upper) {
            out.push_back(u);
            out.push_back(std::conj(u));
        }
    } else {
        out = roots;
    }

    const double root_phi = phi(model, q);
    auto nearest = std::min_element(out.begin(), out.end(), [&](cplx a, cplx b) {
        return std::abs(a - root_phi) < std::abs(b - root_phi);
    });
    if (nearest == out.end() || std::abs(*nearest - root_phi) > 1e-6 * (1.0 + root_phi))
        throw BracketFailure("companion roots do not contain Phi(q)");
    *nearest = cplx(root_phi, 0.0);

    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = i + 1; j < out.size(); ++j)
            if (detail::close_roots(out[i], out[j]))
                throw MultipleRootDetected("psi(s) = q has (numerically) repeated roots");

    std::stable_sort(out.begin(), out.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return out;
}

/// q-scale function W^(q) in residue form W(x) = sum_k r_k exp(s_k x), where
/// s_k runs over all roots of psi(s) = q and r_k = 1 / psi'(s_k).
class ScaleFunction {
public:
    double q() const { return q_; }
    double phi() const { return phi_; }
    const LevyModel& model() const { return model_; }
    const std::vector<cplx>& roots() const { return roots_; }
    const std::vector<cplx>& coeffs() const { return coeffs_; }

    /// Complex partial sums; the imaginary parts are round-off.
    cplx W_sum(double x) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k) acc += coeffs_[k] * std::exp(roots_[k] * x);
        return acc;
    }
    cplx W_prime_sum(double x) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k)
            acc += coeffs_[k] * roots_[k] * std::exp(roots_[k] * x);
        return acc;
    }
    cplx Z_sum(double x) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k)
            acc += coeffs_[k] * detail::exp_rel1(roots_[k] * x);
        return 1.0 + q_ * x * acc;
    }
    cplx Zbar_sum(double x) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k)
            acc += coeffs_[k] * detail::exp_rel2(roots_[k] * x);
        return x + q_ * x * x * acc;
    }

    /// Zero on (-inf, 0).
    double W(double x) const { return x < 0.0 ? 0.0 : W_sum(x).real(); }
    /// At x = 0 this is the right limit W'(0+).
    double W_prime(double x) const { return x < 0.0 ? 0.0 : W_prime_sum(x).real(); }
    /// Z(x) = 1 + q int_0^x W, equal to 1 for x <= 0.
    double Z(double x) const { return x <= 0.0 ? 1.0 : Z_sum(x).real(); }
    /// Zbar(x) = int_0^x Z, equal to x for x <= 0.
    double Zbar(double x) const { return x <= 0.0 ? x : Zbar_sum(x).real(); }

    /// int_0^inf exp(-s x) W(x) dx = sum_k r_k / (s - s_k), for Re s > Phi(q).
    cplx laplace_transform(cplx s) const {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < roots_.size(); ++k) acc += coeffs_[k] / (s - roots_[k]);
        return acc;
    }

    friend ScaleFunction build_scale(const LevyModel& model, double q);

private:
    ScaleFunction(LevyModel model, double q) : model_(std::move(model)), q_(q) {}

    LevyModel model_;
    double q_;
    double phi_ = 0.0;
    std::vector<cplx> roots_;
    std::vector<cplx> coeffs_;
};

inline ScaleFunction build_scale(const LevyModel& model, double q) {
    ScaleFunction sf(model, q);
    sf.roots_ = find_roots(model, q);
    sf.coeffs_.reserve(sf.roots_.size());
    for (std::size_t k = 0; k < sf.roots_.size(); ++k) {
        const cplx s = sf.roots_[k];
        if (s.imag() < 0.0 && k > 0 && sf.roots_[k - 1] == std::conj(s)) {
            sf.coeffs_.push_back(std::conj(sf.coeffs_.back()));
            continue;
        }
        cplx r = 1.0 / laplace_exponent_deriv(model, s);
        if (s.imag() == 0.0) r = cplx(r.real(), 0.0);
        sf.coeffs_.push_back(r);
    }
    sf.phi_ = sf.roots_.front().real();
    return sf;
}

}  // namespace dualdiv

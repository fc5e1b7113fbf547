#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "dualdiv/levy_model.hpp"

namespace dualdiv::poly {

/// Real polynomial, coefficients in ascending powers.
using Poly = std::vector<double>;

inline Poly multiply(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline Poly add(Poly a, const Poly& b) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

inline void trim(Poly& p) {
    while (!p.empty() && p.back() == 0.0) p.pop_back();
}

inline cplx evaluate(const Poly& p, cplx s) {
    cplx acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * s + *it;
    return acc;
}

/// Characteristic polynomial det(sI - A) and the adjugate coefficients
/// adj(sI - A) = sum_{k=1}^{n} M_k s^{n-k}, via Faddeev-LeVerrier.
struct CharacteristicExpansion {
    Poly charpoly;
    std::vector<Eigen::MatrixXd> adjugate;  // adjugate[k-1] = M_k
};

inline CharacteristicExpansion faddeev_leverrier(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    CharacteristicExpansion out;
    out.charpoly.assign(static_cast<std::size_t>(n) + 1, 0.0);
    out.charpoly[static_cast<std::size_t>(n)] = 1.0;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    double c_prev = 1.0;
    for (Eigen::Index k = 1; k <= n; ++k) {
        M = A * M;
        M.diagonal().array() += c_prev;
        out.adjugate.push_back(M);
        const double c = -(A * M).trace() / static_cast<double>(k);
        out.charpoly[static_cast<std::size_t>(n - k)] = c;
        c_prev = c;
    }
    return out;
}

/// All complex roots as eigenvalues of the companion matrix.
inline std::vector<cplx> companion_roots(Poly p) {
    trim(p);
    if (p.size() < 2) return {};
    const auto deg = static_cast<Eigen::Index>(p.size() - 1);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(deg, deg);
    const double lead = p.back();
    for (Eigen::Index i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < deg; ++i) C(i, deg - 1) = -p[static_cast<std::size_t>(i)] / lead;
    const Eigen::VectorXcd ev = C.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

}  // namespace dualdiv::poly

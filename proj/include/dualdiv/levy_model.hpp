#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dualdiv/errors.hpp"

namespace dualdiv {

using cplx = std::complex<double>;

/// Unvalidated model parameters as read from a file or the command line.
struct ModelSpec {
    double drift_d = 0.0;
    double sigma = 0.0;
    double lambda = 0.0;
    std::vector<double> alpha;
    std::vector<std::vector<double>> T;
};

enum class PathVariation { Bounded, Unbounded };

/// Phase-type law (m, alpha, T) of the upward jumps. Only built through
/// make_phase_type, so every instance is a proper subgenerator.
class PhaseType {
public:
    int phases() const { return static_cast<int>(alpha_.size()); }
    const Eigen::RowVectorXd& alpha() const { return alpha_; }
    const Eigen::MatrixXd& T() const { return T_; }
    /// t = -T 1
    const Eigen::VectorXd& exit_vector() const { return exit_; }
    const Eigen::VectorXcd& eigenvalues() const { return eig_; }
    double mean() const { return mean_; }

    friend PhaseType make_phase_type(const std::vector<double>& alpha,
                                     const std::vector<std::vector<double>>& T);

private:
    Eigen::RowVectorXd alpha_;
    Eigen::MatrixXd T_;
    Eigen::VectorXd exit_;
    Eigen::VectorXcd eig_;
    double mean_ = 0.0;
};

inline PhaseType make_phase_type(const std::vector<double>& alpha,
                                 const std::vector<std::vector<double>>& T) {
    const auto m = alpha.size();
    if (m == 0) throw DimensionMismatch("phase-type needs at least one phase");
    if (T.size() != m) throw DimensionMismatch("T must have as many rows as alpha has entries");
    for (const auto& row : T)
        if (row.size() != m) throw DimensionMismatch("T must be square");

    PhaseType pt;
    pt.alpha_.resize(static_cast<Eigen::Index>(m));
    pt.T_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (!(alpha[i] >= 0.0)) throw InvalidPhaseType("alpha has a negative entry");
        pt.alpha_(static_cast<Eigen::Index>(i)) = alpha[i];
        total += alpha[i];
        for (std::size_t j = 0; j < m; ++j)
            pt.T_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = T[i][j];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidPhaseType("alpha must sum to 1 (got " + std::to_string(total) + ")");

    const auto n = static_cast<Eigen::Index>(m);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        double scale = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = pt.T_(i, j);
            if (!std::isfinite(v)) throw InvalidPhaseType("T has a non-finite entry");
            if (i == j && !(v < 0.0)) throw InvalidPhaseType("T diagonal must be strictly negative");
            if (i != j && v < 0.0) throw InvalidPhaseType("T off-diagonal entries must be nonnegative");
            row += v;
            scale += std::abs(v);
        }
        if (row > 1e-12 * scale) throw InvalidPhaseType("T row sums must be nonpositive");
    }

    pt.eig_ = pt.T_.eigenvalues();
    for (Eigen::Index i = 0; i < pt.eig_.size(); ++i)
        if (!(pt.eig_(i).real() < 0.0))
            throw InvalidPhaseType("T is not a proper subgenerator (eigenvalue with Re >= 0)");

    pt.exit_ = (-pt.T_ * Eigen::VectorXd::Ones(n)).cwiseMax(0.0);
    pt.mean_ = pt.alpha_ * pt.T_.partialPivLu().solve(-Eigen::VectorXd::Ones(n));
    return pt;
}

/// Spectrally positive Levy process X_t = x - d t + sigma B_t + compound
/// Poisson(lambda) sum of phase-type jumps. Immutable once validated.
class LevyModel {
public:
    double drift_d() const { return drift_d_; }
    double sigma() const { return sigma_; }
    double lambda() const { return lambda_; }
    const PhaseType& jumps() const { return jumps_; }
    int phases() const { return jumps_.phases(); }

    /// Throws SingularResolvent when s is within 1e-10 ||T|| of the spectrum of T.
    void check_resolvent(cplx s) const {
        const auto& eig = jumps_.eigenvalues();
        for (Eigen::Index i = 0; i < eig.size(); ++i)
            if (std::abs(s - eig(i)) < 1e-10 * T_norm_)
                throw SingularResolvent("s is too close to an eigenvalue of T");
    }

    friend LevyModel validate_model(const ModelSpec& raw);

private:
    double drift_d_ = 0.0;
    double sigma_ = 0.0;
    double lambda_ = 0.0;
    PhaseType jumps_;
    double T_norm_ = 0.0;
};

inline LevyModel validate_model(const ModelSpec& raw) {
    if (!std::isfinite(raw.drift_d) || !std::isfinite(raw.sigma) || !std::isfinite(raw.lambda))
        throw ValidationError("model parameters must be finite");
    if (raw.sigma < 0.0) throw ValidationError("sigma must be nonnegative");
    if (!(raw.lambda > 0.0)) throw ValidationError("lambda must be positive");
    if (raw.sigma == 0.0 && !(raw.drift_d > 0.0))
        throw NotSubordinatorViolation(
            "with sigma = 0 the drift d must be positive, otherwise X is a subordinator");

    LevyModel model;
    model.drift_d_ = raw.drift_d;
    model.sigma_ = raw.sigma;
    model.lambda_ = raw.lambda;
    model.jumps_ = make_phase_type(raw.alpha, raw.T);
    model.T_norm_ = model.jumps_.T().norm();
    return model;
}

namespace detail {

inline Eigen::MatrixXcd shifted(const LevyModel& model, cplx s) {
    Eigen::MatrixXcd A = -model.jumps().T().cast<cplx>();
    A.diagonal().array() += s;
    return A;
}

}  // namespace detail

/// psi(s) = log E[exp(-s X_1)] = d s + sigma^2 s^2 / 2 + lambda (alpha (sI - T)^{-1} t - 1).
///
/// Evaluated as s (d + sigma^2 s / 2 - lambda alpha (sI - T)^{-1} 1), which uses
/// alpha 1 = 1 and makes psi(0) = 0 exact.
inline cplx laplace_exponent(const LevyModel& model, cplx s) {
    model.check_resolvent(s);
    const auto m = static_cast<Eigen::Index>(model.phases());
    const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(m);
    const Eigen::VectorXcd r = detail::shifted(model, s).partialPivLu().solve(ones);
    const cplx a_r = (model.jumps().alpha().cast<cplx>() * r)(0);
    const double sig2 = model.sigma() * model.sigma();
    return s * (model.drift_d() + 0.5 * sig2 * s - model.lambda() * a_r);
}

inline double laplace_exponent(const LevyModel& model, double s) {
    return laplace_exponent(model, cplx(s, 0.0)).real();
}

/// psi'(s) = d + sigma^2 s - lambda alpha (sI - T)^{-2} t.
inline cplx laplace_exponent_deriv(const LevyModel& model, cplx s) {
    model.check_resolvent(s);
    const auto lu = detail::shifted(model, s).partialPivLu();
    const Eigen::VectorXcd r1 = lu.solve(model.jumps().exit_vector().cast<cplx>());
    const Eigen::VectorXcd r2 = lu.solve(r1);
    const cplx a_r2 = (model.jumps().alpha().cast<cplx>() * r2)(0);
    return model.drift_d() + model.sigma() * model.sigma() * s - model.lambda() * a_r2;
}

inline double laplace_exponent_deriv(const LevyModel& model, double s) {
    return laplace_exponent_deriv(model, cplx(s, 0.0)).real();
}

/// mu = E[X_1] = -d + lambda E[Z].
inline double drift_mu(const LevyModel& model) {
    return -model.drift_d() + model.lambda() * model.jumps().mean();
}

/// Levy density lambda alpha exp(T z) t of the jump measure.
inline double jump_density(const LevyModel& model, double z) {
    const Eigen::MatrixXd E = (model.jumps().T() * z).exp();
    return model.lambda() * (model.jumps().alpha() * E * model.jumps().exit_vector())(0);
}

/// int_0^1 z nu(dz), finite for phase-type jumps.
inline double small_jump_mean(const LevyModel& model) {
    const auto& T = model.jumps().T();
    const auto m = T.rows();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    const Eigen::MatrixXd E = T.exp();
    const Eigen::VectorXd e1 = E * ones;
    const Eigen::VectorXd tail = T.partialPivLu().solve(e1 - ones);
    return model.lambda() * (model.jumps().alpha() * (tail - e1))(0);
}

/// Drift c of the compensated triplet: d = c + int_0^1 z nu(dz).
inline double triplet_drift_c(const LevyModel& model) {
    return model.drift_d() - small_jump_mean(model);
}

inline PathVariation path_variation(const LevyModel& model) {
    return model.sigma() > 0.0 ? PathVariation::Unbounded : PathVariation::Bounded;
}

inline ModelSpec to_spec(const LevyModel& model) {
    ModelSpec spec;
    spec.drift_d = model.drift_d();
    spec.sigma = model.sigma();
    spec.lambda = model.lambda();
    const auto m = model.phases();
    spec.alpha.resize(static_cast<std::size_t>(m));
    spec.T.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m)));
    for (int i = 0; i < m; ++i) {
        spec.alpha[static_cast<std::size_t>(i)] = model.jumps().alpha()(i);
        for (int j = 0; j < m; ++j)
            spec.T[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = model.jumps().T()(i, j);
    }
    return spec;
}

/// Copy of the model with a different drift d (revalidated).
inline LevyModel with_drift(const LevyModel& model, double drift_d) {
    auto spec = to_spec(model);
    spec.drift_d = drift_d;
    return validate_model(spec);
}

inline LevyModel with_sigma(const LevyModel& model, double sigma) {
    auto spec = to_spec(model);
    spec.sigma = sigma;
    return validate_model(spec);
}

}  // namespace dualdiv

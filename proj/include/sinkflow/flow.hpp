#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sinkflow/errors.hpp"
#include "sinkflow/gaussian_eot.hpp"
#include "sinkflow/symmetric.hpp"

namespace sinkflow {

enum class Integrator { EulerCongruence, FactorLift, EigenAxis };

struct FlowConfig {
    Epsilon eps;
    double tau;
    double t_end;
    Integrator integrator = Integrator::EulerCongruence;
    long record_every = 1;

    void validate() const {
        if (!(tau > 0.0)) throw InvalidInput("FlowConfig: tau must be positive");
        if (!(t_end > 0.0) || tau > t_end)
            throw InvalidInput("FlowConfig: need 0 < tau <= t_end");
        if (record_every < 1) throw InvalidInput("FlowConfig: record_every must be >= 1");
    }
};

struct FlowState {
    double t;
    Gaussian state;
};

struct Trajectory {
    std::vector<FlowState> steps;
    std::vector<double> divergence;     // S_eps(mu_t, target)
    std::vector<double> dissipation;    // tr(G S G)
    std::vector<double> w2_to_target;   // Bures-Wasserstein distance
};

// Shared eigenbasis state for the commuting case.
struct EigenFlowState {
    Eigen::MatrixXd basis;
    Eigen::VectorXd lambdas;
    Eigen::VectorXd lambdas_star;
};

// Lifted square-root factor; x^T x tracks the covariance.
struct FactorState {
    Eigen::MatrixXd x;
};

// m_t = m* + e^{-2t} (m0 - m*): the mean flow decouples and is exact.
inline Eigen::VectorXd mean_at(const Eigen::VectorXd& m0, const Eigen::VectorXd& m_star,
                               double t) {
    if (m0.size() != m_star.size())
        throw DimensionMismatch("mean_at: dimensions differ");
    if (!(t >= 0.0)) throw InvalidInput("mean_at: t must be nonnegative");
    return m_star + std::exp(-2.0 * t) * (m0 - m_star);
}

// Keeps (I - tau G) well-conditioned: eigenvalues of G lie in
// [-lambda_max(target)/e~, 2].
inline double default_tau(const Epsilon& eps, const SymmetricMatrix& target) {
    const double lam_max = std::max(sym_eig(target).eigenvalues[0], 0.0);
    if (lam_max <= 0.0) return 0.01;
    return std::min(0.01, eps.tilde() / (2.0 * lam_max));
}

// One congruence step S' = (I - tau G) S (I - tau G). PSD up to rounding;
// stray negative eigenvalues are clamped away. A vanishing field returns the
// input unchanged, so critical points are exact fixed points.
inline SymmetricMatrix euler_step(const SymmetricMatrix& sigma, const SymmetricMatrix& target,
                                  const Epsilon& eps, double tau) {
    if (!(tau > 0.0)) throw InvalidInput("euler_step: tau must be positive");
    const SymmetricMatrix g = g_matrix(sigma, target, eps);
    if (g.mat().isZero(0.0)) return sigma;

    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(sigma.dim(), sigma.dim()) - tau * g.mat();
    SymmetricMatrix next(a * sigma.mat() * a);

    const SpectralDecomp eig = sym_eig(next);
    detail::require_near_psd(eig, kPsdClampTol, "euler_step");
    if (eig.eigenvalues[eig.eigenvalues.size() - 1] < 0.0)
        next = SymmetricMatrix(eig.map([](double l) { return std::max(l, 0.0); }));
    return next;
}

// Continuous-time right-hand side -(G S + S G); zero exactly at critical points.
inline SymmetricMatrix rhs(const SymmetricMatrix& sigma, const SymmetricMatrix& target,
                           const Epsilon& eps) {
    const SymmetricMatrix g = g_matrix(sigma, target, eps);
    return SymmetricMatrix(-(g.mat() * sigma.mat() + sigma.mat() * g.mat()));
}

// Explicit Euler on the lifted flow X' = -X G_{X^T X}.
inline FactorState factor_step(const FactorState& state, const SymmetricMatrix& target,
                               const Epsilon& eps, double tau) {
    if (!(tau > 0.0)) throw InvalidInput("factor_step: tau must be positive");
    const SymmetricMatrix sigma(state.x.transpose() * state.x);
    const SymmetricMatrix g = g_matrix(sigma, target, eps);
    return FactorState{state.x - tau * state.x * g.mat()};
}

// Scalar rate of the decoupled eigenvalue flow:
// dl/dt = 4 l (l* / (sqrt(l* l + e~^2) + e~) - l / (sqrt(l^2 + e~^2) + e~)).
inline double eigenvalue_rate(double lam, double lam_star, double eps_tilde) {
    const double et2 = eps_tilde * eps_tilde;
    return 4.0 * lam *
           (lam_star / (std::sqrt(lam_star * lam + et2) + eps_tilde) -
            lam / (std::sqrt(lam * lam + et2) + eps_tilde));
}

// Diagonal entry of G_S^{S*} on a shared axis; the rate above is -2 g l.
inline double scalar_gain(double lam, double lam_star, double eps_tilde) {
    const double et2 = eps_tilde * eps_tilde;
    return 2.0 * lam / (std::sqrt(lam * lam + et2) + eps_tilde) -
           2.0 * lam_star / (std::sqrt(lam_star * lam + et2) + eps_tilde);
}

// Axis-wise form of one congruence step: l <- (1 - tau g)^2 l. First-order
// consistent with the eigenvalue ODE and identical to what the matrix scheme
// does on each shared axis, so commuting matrix and axis trajectories agree
// to rounding.
inline double eigen_axis_step(double lam, double lam_star, double eps_tilde, double tau) {
    const double factor = 1.0 - tau * scalar_gain(lam, lam_star, eps_tilde);
    return factor * factor * lam;
}

// Per-axis explicit stepping of the eigenvalue ODE. The continuous flow is
// monotone between l0 and l*, so any discrete overshoot is clamped back into
// [min(l0, l*), max(l0, l*)].
inline std::vector<std::pair<double, Eigen::VectorXd>> eigen_flow_integrate(
    const Eigen::VectorXd& lam0, const Eigen::VectorXd& lam_star, const Epsilon& eps,
    double tau, double t_end) {
    if (lam0.size() != lam_star.size())
        throw DimensionMismatch("eigen_flow_integrate: lengths differ");
    if ((lam0.array() < 0.0).any() || (lam_star.array() < 0.0).any())
        throw NegativeEigenvalue("eigen_flow_integrate: eigenvalues must be nonnegative");
    if (!(tau > 0.0) || !(t_end > 0.0))
        throw InvalidInput("eigen_flow_integrate: need tau > 0 and t_end > 0");

    const Eigen::VectorXd lo = lam0.cwiseMin(lam_star);
    const Eigen::VectorXd hi = lam0.cwiseMax(lam_star);
    const long n_steps = static_cast<long>(std::floor(t_end / tau + 1e-9));

    std::vector<std::pair<double, Eigen::VectorXd>> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    Eigen::VectorXd lam = lam0;
    out.emplace_back(0.0, lam);
    const double et = eps.tilde();
    for (long k = 1; k <= n_steps; ++k) {
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            const double next = eigen_axis_step(lam[i], lam_star[i], et, tau);
            lam[i] = std::min(std::max(next, lo[i]), hi[i]);
        }
        out.emplace_back(static_cast<double>(k) * tau, lam);
    }
    return out;
}

// Full trajectory: closed-form means, configured covariance integrator, and
// per-record diagnostics. Runs exactly floor(t_end/tau) steps; the initial and
// final states are always recorded.
inline Trajectory integrate(const Gaussian& mu0, const Gaussian& target,
                            const FlowConfig& cfg) {
    if (mu0.dim() != target.dim())
        throw DimensionMismatch("integrate: source and target dimensions differ");
    cfg.validate();

    const double tau = cfg.tau;
    const long n_steps = static_cast<long>(std::floor(cfg.t_end / tau + 1e-9));
    const double diverge_cap = 1e8 * (1.0 + mu0.cov.norm());

    SymmetricMatrix sigma = mu0.cov;
    FactorState factor{Eigen::MatrixXd()};
    std::optional<EigenFlowState> axes;
    Eigen::VectorXd lam_lo, lam_hi;

    if (cfg.integrator == Integrator::FactorLift) {
        factor.x = psd_sqrt(mu0.cov).mat();
    } else if (cfg.integrator == Integrator::EigenAxis) {
        JointDecomp jd = joint_eig(mu0.cov, target.cov);
        EigenFlowState st;
        st.basis = jd.basis;
        st.lambdas = jd.a_eigenvalues.cwiseMax(0.0);
        st.lambdas_star = jd.b_eigenvalues.cwiseMax(0.0);
        lam_lo = st.lambdas.cwiseMin(st.lambdas_star);
        lam_hi = st.lambdas.cwiseMax(st.lambdas_star);
        axes = std::move(st);
    }

    Trajectory traj;
    auto record = [&](long k) {
        const double t = static_cast<double>(k) * tau;
        if (sigma.norm() > diverge_cap)
            throw StepDiverged("integrate: covariance norm " + std::to_string(sigma.norm()) +
                               " exceeds cap at step " + std::to_string(k));
        Gaussian state(mean_at(mu0.mean, target.mean, t), sigma);
        const SymmetricMatrix g = g_matrix(sigma, target.cov, cfg.eps);
        traj.divergence.push_back(sinkhorn_divergence(state, target, cfg.eps));
        traj.dissipation.push_back((g.mat() * sigma.mat() * g.mat()).trace());
        traj.w2_to_target.push_back(w2_gaussian(state, target));
        traj.steps.push_back(FlowState{t, std::move(state)});
    };

    record(0);
    for (long k = 1; k <= n_steps; ++k) {
        try {
            switch (cfg.integrator) {
                case Integrator::EulerCongruence:
                    sigma = euler_step(sigma, target.cov, cfg.eps, tau);
                    break;
                case Integrator::FactorLift:
                    factor = factor_step(factor, target.cov, cfg.eps, tau);
                    sigma = SymmetricMatrix(factor.x.transpose() * factor.x);
                    break;
                case Integrator::EigenAxis: {
                    Eigen::VectorXd& lam = axes->lambdas;
                    const double et = cfg.eps.tilde();
                    for (Eigen::Index i = 0; i < lam.size(); ++i) {
                        const double next =
                            eigen_axis_step(lam[i], axes->lambdas_star[i], et, tau);
                        lam[i] = std::min(std::max(next, lam_lo[i]), lam_hi[i]);
                    }
                    sigma = SymmetricMatrix(axes->basis * lam.asDiagonal() *
                                            axes->basis.transpose());
                    break;
                }
            }
        } catch (const NotPSD& e) {
            throw NotPSD(std::string(e.what()) + " (flow step " + std::to_string(k) + ")");
        }
        if (k % cfg.record_every == 0 || k == n_steps) record(k);
    }
    return traj;
}

}  // namespace sinkflow

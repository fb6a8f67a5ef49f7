#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "sinkflow/errors.hpp"
#include "sinkflow/gaussian_eot.hpp"
#include "sinkflow/symmetric.hpp"

namespace sinkflow {

// Per-axis convergence-rate constants for the commuting case.
//   c_a: exponential rate when l* > 0 (zero when an axis starts or ends at 0)
//   c_b: sublinear rate when l* = 0
//   l:   Lipschitz constant 2 (1 + l*/e~) of the functional in each eigenvalue
struct RateConstants {
    Eigen::VectorXd c_a;
    Eigen::VectorXd c_b;
    Eigen::VectorXd l;
};

namespace detail {

inline void require_nonnegative(const Eigen::VectorXd& v, const char* who) {
    if ((v.array() < 0.0).any())
        throw NegativeEigenvalue(std::string(who) + ": eigenvalues must be nonnegative");
}

}  // namespace detail

inline RateConstants rate_constants(const Eigen::VectorXd& lam0,
                                    const Eigen::VectorXd& lam_star, const Epsilon& eps) {
    if (lam0.size() != lam_star.size())
        throw DimensionMismatch("rate_constants: lengths differ");
    detail::require_nonnegative(lam0, "rate_constants");
    detail::require_nonnegative(lam_star, "rate_constants");

    const double et = eps.tilde();
    const double et2 = et * et;
    const Eigen::Index d = lam0.size();
    RateConstants rc{Eigen::VectorXd(d), Eigen::VectorXd(d), Eigen::VectorXd(d)};
    for (Eigen::Index i = 0; i < d; ++i) {
        const double mn = std::min(lam_star[i], lam0[i]);
        const double mx = std::max(lam0[i], lam_star[i]);
        rc.c_a[i] = 4.0 * et * mn /
                    ((std::sqrt(lam_star[i] * mx + et2) + et) * (std::sqrt(mx * mx + et2) + et));
        rc.c_b[i] = 4.0 / (std::sqrt(lam0[i] * lam0[i] + et2) + et);
        rc.l[i] = 2.0 * (1.0 + lam_star[i] / et);
    }
    return rc;
}

// Upper bound on S_eps(mu_t, target) for commuting, centered instances:
//   sum_{l*>0} L e^{-c_a t} |l0 - l*| + sum_{l*=0} L l0 / (1 + l0 c_b t).
inline double functional_bound(double t, const Eigen::VectorXd& lam0,
                               const Eigen::VectorXd& lam_star, const Epsilon& eps) {
    const RateConstants rc = rate_constants(lam0, lam_star, eps);
    double bound = 0.0;
    for (Eigen::Index i = 0; i < lam0.size(); ++i) {
        if (lam_star[i] > 0.0)
            bound += rc.l[i] * std::exp(-rc.c_a[i] * t) * std::abs(lam0[i] - lam_star[i]);
        else
            bound += rc.l[i] * lam0[i] / (1.0 + lam0[i] * rc.c_b[i] * t);
    }
    return bound;
}

// Critical points satisfy G S = 0 (equivalent to G S G = 0).
inline bool is_critical(const SymmetricMatrix& sigma, const SymmetricMatrix& target,
                        const Epsilon& eps, double tol) {
    const SymmetricMatrix g = g_matrix(sigma, target, eps);
    return (g.mat() * sigma.mat()).norm() <= tol * (1.0 + sigma.norm());
}

// tr(G S G) >= 0; the instantaneous decay rate of the covariance part of the
// divergence along the flow.
inline double dissipation(const SymmetricMatrix& sigma, const SymmetricMatrix& target,
                          const Epsilon& eps) {
    const SymmetricMatrix g = g_matrix(sigma, target, eps);
    return (g.mat() * sigma.mat() * g.mat()).trace();
}

inline bool commute_check(const SymmetricMatrix& a, const SymmetricMatrix& b, double tol) {
    if (a.dim() != b.dim()) throw DimensionMismatch("commute_check: dimensions differ");
    return (a.mat() * b.mat() - b.mat() * a.mat()).norm() <= tol * (1.0 + a.norm() * b.norm());
}

enum class LimitClass { NonsingularSource, CommutingCase, Undetermined };

inline const char* to_string(LimitClass c) {
    switch (c) {
        case LimitClass::NonsingularSource: return "nonsingular_source";
        case LimitClass::CommutingCase: return "commuting_case";
        case LimitClass::Undetermined: return "undetermined";
    }
    return "undetermined";
}

struct LimitReport {
    std::optional<SymmetricMatrix> limit_cov;
    bool converges_to_target = false;
    LimitClass classification = LimitClass::Undetermined;
};

// Limit of the covariance flow where the theory pins it down:
//  - nonsingular source: the target, always;
//  - commuting pair: axis-wise selection (0 where the source axis is 0, the
//    target eigenvalue otherwise), reaching the target iff ker S0 <= ker S*;
//  - singular non-commuting: a limit exists but no constructive selection
//    rule is available, so it is reported as undetermined.
inline LimitReport predict_limit(const Gaussian& mu0, const Gaussian& target,
                                 const Epsilon& eps, double commute_tol = 1e-10) {
    (void)eps;  // the limit set does not depend on the regularization strength
    if (mu0.dim() != target.dim())
        throw DimensionMismatch("predict_limit: dimensions differ");

    const SpectralDecomp eig0 = sym_eig(mu0.cov);
    detail::require_near_psd(eig0, kPsdClampTol, "predict_limit");
    const double lam_max0 = std::max(eig0.eigenvalues[0], 0.0);

    LimitReport report;
    if (lam_max0 > 0.0 &&
        eig0.eigenvalues[eig0.eigenvalues.size() - 1] > commute_tol * lam_max0) {
        report.limit_cov = target.cov;
        report.converges_to_target = true;
        report.classification = LimitClass::NonsingularSource;
        return report;
    }

    if (commute_check(mu0.cov, target.cov, commute_tol)) {
        const JointDecomp jd = joint_eig(mu0.cov, target.cov, commute_tol);
        const SpectralDecomp eig_star = sym_eig(target.cov);
        detail::require_near_psd(eig_star, kPsdClampTol, "predict_limit");
        const double zero0 = commute_tol * lam_max0;
        const double zero_star = commute_tol * std::max(eig_star.eigenvalues[0], 0.0);

        Eigen::VectorXd lam_inf(jd.a_eigenvalues.size());
        bool converges = true;
        for (Eigen::Index i = 0; i < lam_inf.size(); ++i) {
            const bool source_zero = jd.a_eigenvalues[i] <= zero0;
            const double star = std::max(jd.b_eigenvalues[i], 0.0);
            lam_inf[i] = source_zero ? 0.0 : star;
            if (source_zero && star > zero_star) converges = false;
        }
        report.classification = LimitClass::CommutingCase;
        report.converges_to_target = converges;
        if (converges)
            report.limit_cov = target.cov;
        else
            report.limit_cov = SymmetricMatrix(jd.basis * lam_inf.asDiagonal() *
                                               jd.basis.transpose());
        return report;
    }

    report.classification = LimitClass::Undetermined;
    return report;
}

}  // namespace sinkflow

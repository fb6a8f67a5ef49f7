#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "sinkflow/errors.hpp"
#include "sinkflow/symmetric.hpp"

namespace sinkflow {

// Entropic regularization strength. The closed forms are written in terms of
// the quarter parameter e~ = eps/4.
class Epsilon {
public:
    explicit Epsilon(double eps) : eps_(eps) {
        if (!(eps > 0.0)) throw InvalidInput("Epsilon: eps must be positive");
    }
    double value() const { return eps_; }
    double tilde() const { return eps_ / 4.0; }

private:
    double eps_;
};

// Gaussian measure N(mean, cov); the covariance may be singular.
struct Gaussian {
    Eigen::VectorXd mean;
    SymmetricMatrix cov;

    Gaussian(Eigen::VectorXd m, SymmetricMatrix c) : mean(std::move(m)), cov(std::move(c)) {
        if (mean.size() != cov.dim())
            throw DimensionMismatch("Gaussian: mean and covariance dimensions differ");
    }
    Eigen::Index dim() const { return mean.size(); }
};

// f(x) = <x - center, quad (x - center)> + <lin, x> + constant
struct QuadraticPotential {
    SymmetricMatrix quad;
    Eigen::VectorXd center;
    Eigen::VectorXd lin;
    double constant = 0.0;

    double evaluate(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd z = x - center;
        return z.dot(quad.mat() * z) + lin.dot(x) + constant;
    }
};

// v(x) = gain (x - center) + offset
struct AffineField {
    SymmetricMatrix gain;
    Eigen::VectorXd center;
    Eigen::VectorXd offset;

    Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
        return gain.mat() * (x - center) + offset;
    }
};

namespace detail {

inline void require_same_dim(const SymmetricMatrix& a, const SymmetricMatrix& b,
                             const char* who) {
    if (a.dim() != b.dim())
        throw DimensionMismatch(std::string(who) + ": dimensions differ");
}

}  // namespace detail

// F_S^G = I - G^{1/2} ((G^{1/2} S G^{1/2} + e~^2 I)^{1/2} + e~ I)^{-1} G^{1/2}.
// Eigenvalues lie in [1 - lambda_max(G)/(2 e~), 1].
inline SymmetricMatrix f_matrix(const SymmetricMatrix& sigma, const SymmetricMatrix& gamma,
                                const Epsilon& eps) {
    detail::require_same_dim(sigma, gamma, "f_matrix");
    const SymmetricMatrix gamma_half = psd_sqrt(gamma);
    const SymmetricMatrix inner(gamma_half.mat() * sigma.mat() * gamma_half.mat());
    const SymmetricMatrix j = j_operator(inner, eps.tilde());
    return SymmetricMatrix(Eigen::MatrixXd::Identity(sigma.dim(), sigma.dim()) -
                           gamma_half.mat() * j.mat() * gamma_half.mat());
}

// G_S^G = 2(F_S^G - F_S^S), evaluated through the expanded two-term form
//   2 S ((S^2 + e~^2 I)^{1/2} + e~ I)^{-1}
//     - 2 G^{1/2} ((G^{1/2} S G^{1/2} + e~^2 I)^{1/2} + e~ I)^{-1} G^{1/2}.
// Eigenvalues lie in [-lambda_max(G)/e~, 2]. G_S^S vanishes identically, so a
// bitwise-equal pair short-circuits to the zero matrix.
inline SymmetricMatrix g_matrix(const SymmetricMatrix& sigma, const SymmetricMatrix& sigma_star,
                                const Epsilon& eps) {
    detail::require_same_dim(sigma, sigma_star, "g_matrix");
    if (sigma.mat() == sigma_star.mat())
        return SymmetricMatrix::Zero(sigma.dim());

    const double et = eps.tilde();
    const SpectralDecomp sig_eig = sym_eig(sigma);
    detail::require_near_psd(sig_eig, kPsdClampTol, "g_matrix");
    // 2 S J(S^2) has eigenvalues 2 l / (sqrt(l^2 + e~^2) + e~) in S's basis.
    const Eigen::MatrixXd self_term = sig_eig.map([et](double l) {
        const double lc = std::max(l, 0.0);
        return 2.0 * lc / (std::sqrt(lc * lc + et * et) + et);
    });

    const SymmetricMatrix star_half = psd_sqrt(sigma_star);
    const SymmetricMatrix inner(star_half.mat() * sigma.mat() * star_half.mat());
    const SymmetricMatrix j = j_operator(inner, et);
    const Eigen::MatrixXd cross_term = 2.0 * star_half.mat() * j.mat() * star_half.mat();

    return SymmetricMatrix(self_term - cross_term);
}

// B_eps(S, G) = tr S + tr G + (eps/2) logdet(D + (eps/2) I) - tr D with
// D = (4 S^{1/2} G S^{1/2} + (eps^2/4) I)^{1/2}. The logdet argument has all
// eigenvalues >= eps, so it is computed as a sum of logs of eigenvalues.
inline double b_eps(const SymmetricMatrix& sigma, const SymmetricMatrix& gamma,
                    const Epsilon& eps) {
    detail::require_same_dim(sigma, gamma, "b_eps");
    const double e = eps.value();

    Eigen::VectorXd alphas;  // spectrum of S^{1/2} G S^{1/2}
    if (sigma.mat() == gamma.mat()) {
        // alpha_i = lambda_i^2; skips the square-root products entirely.
        const SpectralDecomp eig = sym_eig(sigma);
        detail::require_near_psd(eig, kPsdClampTol, "b_eps");
        alphas = eig.eigenvalues.array().max(0.0).square();
    } else {
        const SpectralDecomp gam_eig = sym_eig(gamma);
        detail::require_near_psd(gam_eig, kPsdClampTol, "b_eps");
        const SymmetricMatrix sigma_half = psd_sqrt(sigma);
        const SymmetricMatrix inner(sigma_half.mat() * gamma.mat() * sigma_half.mat());
        const SpectralDecomp eig = sym_eig(inner);
        detail::require_near_psd(eig, kPsdClampTol, "b_eps");
        alphas = eig.eigenvalues.array().max(0.0);
    }

    double logdet = 0.0, trace_d = 0.0;
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const double d_i = std::sqrt(4.0 * alphas[i] + e * e / 4.0);
        logdet += std::log(d_i + e / 2.0);
        trace_d += d_i;
    }
    return sigma.trace() + gamma.trace() + 0.5 * e * logdet - trace_d;
}

// Debiased covariance part: B(S,G) - B(S,S)/2 - B(G,G)/2.
inline double sinkhorn_divergence_cov(const SymmetricMatrix& sigma, const SymmetricMatrix& gamma,
                                      const Epsilon& eps) {
    return b_eps(sigma, gamma, eps) - 0.5 * b_eps(sigma, sigma, eps) -
           0.5 * b_eps(gamma, gamma, eps);
}

// S_eps(mu, nu) = ||m - n||^2 + (B(S,G) - B(S,S)/2 - B(G,G)/2).
inline double sinkhorn_divergence(const Gaussian& mu, const Gaussian& nu, const Epsilon& eps) {
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("sinkhorn_divergence: dimensions differ");
    return (mu.mean - nu.mean).squaredNorm() + sinkhorn_divergence_cov(mu.cov, nu.cov, eps);
}

// Dual potentials (f, g), fixed to the gauge where
//   f(x) = <x-m, F_S^G (x-m)> + 2<m-n, x>
//   g(x) = <x-n, F_G^S (x-n)> + 2<n-m, x> - ||m-n||^2.
inline std::pair<QuadraticPotential, QuadraticPotential> potentials(const Gaussian& mu,
                                                                    const Gaussian& nu,
                                                                    const Epsilon& eps) {
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("potentials: dimensions differ");
    const Eigen::VectorXd diff = mu.mean - nu.mean;
    QuadraticPotential f{f_matrix(mu.cov, nu.cov, eps), mu.mean, 2.0 * diff, 0.0};
    QuadraticPotential g{f_matrix(nu.cov, mu.cov, eps), nu.mean, -2.0 * diff,
                         -diff.squaredNorm()};
    return {std::move(f), std::move(g)};
}

// Gradient of the first variation of S_eps(., target) at mu:
// x |-> G_S^{S*} (x - m) + 2 (m - m*).
inline AffineField gradient_field(const Gaussian& mu, const Gaussian& target,
                                  const Epsilon& eps) {
    if (mu.dim() != target.dim())
        throw DimensionMismatch("gradient_field: dimensions differ");
    return AffineField{g_matrix(mu.cov, target.cov, eps), mu.mean,
                       2.0 * (mu.mean - target.mean)};
}

// Bures-Wasserstein distance
// sqrt(||m-n||^2 + tr S + tr G - 2 tr (S^{1/2} G S^{1/2})^{1/2}).
inline double w2_gaussian(const Gaussian& mu, const Gaussian& nu) {
    if (mu.dim() != nu.dim())
        throw DimensionMismatch("w2_gaussian: dimensions differ");
    const SymmetricMatrix sigma_half = psd_sqrt(mu.cov);
    const SymmetricMatrix inner(sigma_half.mat() * nu.cov.mat() * sigma_half.mat());
    const double cross = psd_sqrt(inner).trace();
    const double sq = (mu.mean - nu.mean).squaredNorm() + mu.cov.trace() + nu.cov.trace() -
                      2.0 * cross;
    return std::sqrt(std::max(sq, 0.0));
}

}  // namespace sinkflow

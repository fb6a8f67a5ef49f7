#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sinkflow/errors.hpp"
#include "sinkflow/gaussian_eot.hpp"
#include "sinkflow/symmetric.hpp"

namespace sinkflow {

// Weighted point cloud; points are rows.
struct DiscreteMeasure {
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;

    Eigen::Index size() const { return weights.size(); }
    Eigen::Index dim() const { return points.cols(); }
};

// Regular grid in the eigenbasis of the covariance, one axis per eigenvector,
// each spanning +/- radius_sigmas standard deviations of its own eigenvalue.
// Axes with zero variance collapse to a single grid plane, so singular
// Gaussians discretize onto their supporting subspace. Weights are the
// Gaussian density at the nodes, renormalized to sum to one.
inline DiscreteMeasure discretize_gaussian(const Gaussian& g, int n_per_axis,
                                           double radius_sigmas) {
    if (g.dim() > 2) throw DimensionTooLarge("discretize_gaussian: only d <= 2 supported");
    if (n_per_axis < 2) throw InvalidInput("discretize_gaussian: n_per_axis must be >= 2");
    if (!(radius_sigmas > 0.0))
        throw InvalidInput("discretize_gaussian: radius_sigmas must be positive");

    const SpectralDecomp eig = sym_eig(g.cov);
    detail::require_near_psd(eig, kPsdClampTol, "discretize_gaussian");
    const Eigen::Index d = g.dim();

    std::vector<Eigen::VectorXd> axis_nodes(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        const double lam = std::max(eig.eigenvalues[i], 0.0);
        if (lam > 0.0) {
            const double half = radius_sigmas * std::sqrt(lam);
            axis_nodes[static_cast<std::size_t>(i)] =
                Eigen::VectorXd::LinSpaced(n_per_axis, -half, half);
        } else {
            axis_nodes[static_cast<std::size_t>(i)] = Eigen::VectorXd::Zero(1);
        }
    }

    Eigen::Index total = 1;
    for (const auto& nodes : axis_nodes) total *= nodes.size();

    DiscreteMeasure out;
    out.points.resize(total, d);
    Eigen::VectorXd log_w(total);
    for (Eigen::Index flat = 0; flat < total; ++flat) {
        Eigen::VectorXd u(d);
        Eigen::Index rem = flat;
        for (Eigen::Index i = d - 1; i >= 0; --i) {
            const auto& nodes = axis_nodes[static_cast<std::size_t>(i)];
            u[i] = nodes[rem % nodes.size()];
            rem /= nodes.size();
        }
        out.points.row(flat) = (g.mean + eig.basis * u).transpose();
        double lw = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double lam = std::max(eig.eigenvalues[i], 0.0);
            if (lam > 0.0) lw -= 0.5 * u[i] * u[i] / lam;
        }
        log_w[flat] = lw;
    }
    const Eigen::ArrayXd shifted = (log_w.array() - log_w.maxCoeff()).exp();
    out.weights = shifted / shifted.sum();
    return out;
}

struct SinkhornResult {
    double ot_eps = 0.0;
    Eigen::VectorXd f;
    Eigen::VectorXd g;
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

namespace detail {

inline void validate_measure(const DiscreteMeasure& m, const char* who) {
    if (m.points.rows() != m.weights.size())
        throw InvalidInput(std::string(who) + ": point/weight count mismatch");
    if ((m.weights.array() < 0.0).any())
        throw InvalidInput(std::string(who) + ": negative weight");
    if (std::abs(m.weights.sum() - 1.0) > 1e-12)
        throw InvalidInput(std::string(who) + ": weights must sum to 1");
}

// -eps * log sum_j w_j exp((pot_j - cost_j)/eps), streaming in log domain.
inline double softmin(const Eigen::VectorXd& cost_row, const Eigen::VectorXd& pot,
                      const Eigen::VectorXd& log_w, double eps) {
    const Eigen::ArrayXd z = (pot - cost_row).array() / eps + log_w.array();
    const double zmax = z.maxCoeff();
    return -eps * (zmax + std::log((z - zmax).exp().sum()));
}

}  // namespace detail

// Alternating log-domain Sinkhorn updates f <- T(g, b), g <- T(f, a) for the
// squared-Euclidean cost. Stops when the sup-norm change of both potentials
// falls below threshold; the result carries the last residual either way.
inline SinkhornResult sinkhorn_ot(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                  const Epsilon& eps, int max_iter, double threshold) {
    if (a.dim() != b.dim()) throw DimensionMismatch("sinkhorn_ot: dimensions differ");
    if (max_iter < 1) throw InvalidInput("sinkhorn_ot: max_iter must be >= 1");
    detail::validate_measure(a, "sinkhorn_ot");
    detail::validate_measure(b, "sinkhorn_ot");

    const Eigen::Index n = a.size(), m = b.size();
    Eigen::MatrixXd cost(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        cost.row(i) =
            (b.points.rowwise() - a.points.row(i)).rowwise().squaredNorm().transpose();

    const double e = eps.value();
    const Eigen::VectorXd log_a = a.weights.array().log();
    const Eigen::VectorXd log_b = b.weights.array().log();

    SinkhornResult res;
    res.f = Eigen::VectorXd::Zero(n);
    res.g = Eigen::VectorXd::Zero(m);
    for (int it = 1; it <= max_iter; ++it) {
        double delta = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double next = detail::softmin(cost.row(i).transpose(), res.g, log_b, e);
            delta = std::max(delta, std::abs(next - res.f[i]));
            res.f[i] = next;
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            const double next = detail::softmin(cost.col(j), res.f, log_a, e);
            delta = std::max(delta, std::abs(next - res.g[j]));
            res.g[j] = next;
        }
        res.iterations = it;
        res.residual = delta;
        if (delta <= threshold) {
            res.converged = true;
            break;
        }
    }
    res.ot_eps = res.f.dot(a.weights) + res.g.dot(b.weights);
    return res;
}

// OT(a,b) - OT(a,a)/2 - OT(b,b)/2. Raises NotConverged if any of the three
// solves stalls, carrying the worst residual.
inline double sinkhorn_divergence_discrete(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                           const Epsilon& eps, int max_iter,
                                           double threshold) {
    const SinkhornResult ab = sinkhorn_ot(a, b, eps, max_iter, threshold);
    const SinkhornResult aa = sinkhorn_ot(a, a, eps, max_iter, threshold);
    const SinkhornResult bb = sinkhorn_ot(b, b, eps, max_iter, threshold);
    if (!ab.converged || !aa.converged || !bb.converged) {
        const double worst =
            std::max(ab.residual, std::max(aa.residual, bb.residual));
        throw NotConverged("sinkhorn_divergence_discrete: residual " + std::to_string(worst) +
                           " above threshold " + std::to_string(threshold));
    }
    return ab.ot_eps - 0.5 * aa.ot_eps - 0.5 * bb.ot_eps;
}

}  // namespace sinkflow

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "sinkflow/errors.hpp"

namespace sinkflow {

// Relative clamp for eigenvalues that should be nonnegative but picked up
// rounding noise (congruence steps, triple products). Anything below
// -kPsdClampTol * lambda_max is treated as a genuinely indefinite input.
inline constexpr double kPsdClampTol = 1e-10;

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

// Dense real symmetric matrix. Symmetry is enforced on construction by
// averaging with the transpose, so entries(i,j) == entries(j,i) exactly.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(const Eigen::MatrixXd& entries)
        : m_(symmetrized(entries)) {
        if (m_.rows() != m_.cols() || m_.rows() < 1)
            throw InvalidInput("SymmetricMatrix: need a square matrix of dim >= 1");
        if (!m_.allFinite())
            throw InvalidInput("SymmetricMatrix: non-finite entries");
    }

    static SymmetricMatrix Zero(Eigen::Index d) {
        return SymmetricMatrix(Eigen::MatrixXd::Zero(d, d));
    }
    static SymmetricMatrix Identity(Eigen::Index d) {
        return SymmetricMatrix(Eigen::MatrixXd::Identity(d, d));
    }

    Eigen::Index dim() const { return m_.rows(); }
    const Eigen::MatrixXd& mat() const { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double trace() const { return m_.trace(); }
    double norm() const { return m_.norm(); }  // Frobenius

private:
    Eigen::MatrixXd m_;
};

// Orthonormal eigenbasis (columns) with eigenvalues sorted descending.
struct SpectralDecomp {
    Eigen::MatrixXd basis;
    Eigen::VectorXd eigenvalues;

    // P diag(f(lambda_i)) P^T
    template <typename F>
    Eigen::MatrixXd map(F&& f) const {
        Eigen::VectorXd mapped(eigenvalues.size());
        for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
            mapped[i] = f(eigenvalues[i]);
        return symmetrized(basis * mapped.asDiagonal() * basis.transpose());
    }
};

namespace detail {

// Flip each column so its first nonzero component is positive. Makes the
// decomposition reproducible across runs.
inline void fix_column_signs(Eigen::MatrixXd& basis) {
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        for (Eigen::Index r = 0; r < basis.rows(); ++r) {
            if (basis(r, c) != 0.0) {
                if (basis(r, c) < 0.0) basis.col(c) = -basis.col(c);
                break;
            }
        }
    }
}

}  // namespace detail

inline SpectralDecomp sym_eig(const SymmetricMatrix& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.mat());
    if (solver.info() != Eigen::Success)
        throw InvalidInput("sym_eig: eigendecomposition failed");

    const Eigen::Index d = s.dim();
    SpectralDecomp out;
    out.basis.resize(d, d);
    out.eigenvalues.resize(d);
    // Eigen returns ascending order; reverse to descending.
    for (Eigen::Index i = 0; i < d; ++i) {
        out.eigenvalues[i] = solver.eigenvalues()[d - 1 - i];
        out.basis.col(i) = solver.eigenvectors().col(d - 1 - i);
    }
    detail::fix_column_signs(out.basis);
    return out;
}

namespace detail {

// Shared near-PSD validation: eigenvalues must be >= -tol * max(lambda_max, 0).
inline void require_near_psd(const SpectralDecomp& eig, double tol, const char* who) {
    const double lam_max = std::max(eig.eigenvalues[0], 0.0);
    if (eig.eigenvalues[eig.eigenvalues.size() - 1] < -tol * lam_max)
        throw NotPSD(std::string(who) + ": eigenvalue " +
                     std::to_string(eig.eigenvalues[eig.eigenvalues.size() - 1]) +
                     " below -tol*lambda_max = " + std::to_string(-tol * lam_max));
}

}  // namespace detail

// P diag(sqrt(max(lambda_i, 0))) P^T. Accepts near-PSD inputs (clamping
// rounding noise); genuinely indefinite inputs raise NotPSD.
inline SymmetricMatrix psd_sqrt(const SymmetricMatrix& s, double tol = kPsdClampTol) {
    const SpectralDecomp eig = sym_eig(s);
    detail::require_near_psd(eig, tol, "psd_sqrt");
    return SymmetricMatrix(eig.map([](double l) { return std::sqrt(std::max(l, 0.0)); }));
}

// J(X) = ((X + e~^2 I)^{1/2} + e~ I)^{-1}. Eigenvalues of the result are
// 1/(sqrt(alpha_i + e~^2) + e~), all within (0, 1/(2 e~)].
inline SymmetricMatrix j_operator(const SymmetricMatrix& x, double eps_tilde,
                                  double tol = kPsdClampTol) {
    if (!(eps_tilde > 0.0))
        throw InvalidInput("j_operator: eps_tilde must be positive");
    const SpectralDecomp eig = sym_eig(x);
    detail::require_near_psd(eig, tol, "j_operator");
    return SymmetricMatrix(eig.map([eps_tilde](double a) {
        return 1.0 / (std::sqrt(std::max(a, 0.0) + eps_tilde * eps_tilde) + eps_tilde);
    }));
}

// Joint eigenbasis of two commuting symmetric matrices. Diagonalizes a, then
// re-diagonalizes b within each (numerically) degenerate eigenspace of a.
// Throws InvalidInput when the pair does not commute to within tol.
struct JointDecomp {
    Eigen::MatrixXd basis;
    Eigen::VectorXd a_eigenvalues;
    Eigen::VectorXd b_eigenvalues;
};

inline JointDecomp joint_eig(const SymmetricMatrix& a, const SymmetricMatrix& b,
                             double tol = 1e-10) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("joint_eig: dimensions differ");
    const Eigen::Index d = a.dim();

    const double comm_norm = (a.mat() * b.mat() - b.mat() * a.mat()).norm();
    if (comm_norm > tol * (1.0 + a.norm() * b.norm()))
        throw InvalidInput("joint_eig: matrices do not commute (||[A,B]||_F = " +
                           std::to_string(comm_norm) + ")");

    SpectralDecomp ea = sym_eig(a);
    Eigen::MatrixXd basis = ea.basis;
    Eigen::MatrixXd b_rot = basis.transpose() * b.mat() * basis;

    // Group indices with equal a-eigenvalues and diagonalize b inside each group.
    const double group_tol = 1e-9 * (1.0 + std::abs(ea.eigenvalues[0]));
    Eigen::Index start = 0;
    while (start < d) {
        Eigen::Index stop = start + 1;
        while (stop < d && ea.eigenvalues[start] - ea.eigenvalues[stop] <= group_tol)
            ++stop;
        const Eigen::Index len = stop - start;
        if (len > 1) {
            Eigen::MatrixXd block = symmetrized(b_rot.block(start, start, len, len));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
            // descending within the group
            Eigen::MatrixXd rot(len, len);
            for (Eigen::Index i = 0; i < len; ++i)
                rot.col(i) = solver.eigenvectors().col(len - 1 - i);
            basis.middleCols(start, len) = basis.middleCols(start, len) * rot;
        }
        start = stop;
    }
    detail::fix_column_signs(basis);

    JointDecomp out;
    out.basis = basis;
    out.a_eigenvalues = (basis.transpose() * a.mat() * basis).diagonal();
    out.b_eigenvalues = (basis.transpose() * b.mat() * basis).diagonal();
    return out;
}

}  // namespace sinkflow

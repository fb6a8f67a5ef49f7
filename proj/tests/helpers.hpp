#pragma once

#include <Eigen/Dense>
#include <random>

#include "sinkflow/gaussian_eot.hpp"
#include "sinkflow/symmetric.hpp"

namespace testutil {

inline Eigen::MatrixXd random_matrix(Eigen::Index d, std::mt19937& gen, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = normal(gen);
    return m;
}

inline Eigen::MatrixXd random_symmetric(Eigen::Index d, std::mt19937& gen, double scale = 1.0) {
    return sinkflow::symmetrized(random_matrix(d, gen, scale));
}

inline sinkflow::SymmetricMatrix random_psd(Eigen::Index d, std::mt19937& gen,
                                            double scale = 1.0) {
    const Eigen::MatrixXd a = random_matrix(d, gen, scale);
    return sinkflow::SymmetricMatrix(a * a.transpose() / static_cast<double>(d));
}

inline Eigen::MatrixXd random_orthonormal(Eigen::Index d, std::mt19937& gen) {
    const Eigen::MatrixXd a = random_matrix(d, gen);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i)
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    return q;
}

// PSD with prescribed eigenvalues in a random basis.
inline sinkflow::SymmetricMatrix psd_with_spectrum(const Eigen::VectorXd& lambdas,
                                                   std::mt19937& gen) {
    const Eigen::MatrixXd q = random_orthonormal(lambdas.size(), gen);
    return sinkflow::SymmetricMatrix(q * lambdas.asDiagonal() * q.transpose());
}

inline sinkflow::Gaussian random_gaussian(Eigen::Index d, std::mt19937& gen,
                                          double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd mean(d);
    for (Eigen::Index i = 0; i < d; ++i) mean[i] = normal(gen);
    return sinkflow::Gaussian(mean, random_psd(d, gen, scale));
}

inline sinkflow::Gaussian gaussian1(double mean, double var) {
    return sinkflow::Gaussian(Eigen::VectorXd::Constant(1, mean),
                              sinkflow::SymmetricMatrix(Eigen::MatrixXd::Constant(1, 1, var)));
}

inline sinkflow::SymmetricMatrix diag2(double a, double b) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return sinkflow::SymmetricMatrix(m);
}

}  // namespace testutil

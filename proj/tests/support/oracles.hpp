#pragma once

// Independent reference computations used only by tests. Nothing here goes
// through the Cholesky path or the library's likelihood code.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Laplace cofactor expansion along the first row.
inline double cofactor_det(const Matrix& m) {
    const Eigen::Index n = m.rows();
    if (n == 1) return m(0, 0);
    if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double det = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        Matrix minor(n - 1, n - 1);
        for (Eigen::Index r = 1; r < n; ++r) {
            Eigen::Index cc = 0;
            for (Eigen::Index c = 0; c < n; ++c) {
                if (c == j) continue;
                minor(r - 1, cc++) = m(r, c);
            }
        }
        det += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * cofactor_det(minor);
    }
    return det;
}

inline Vector eigenvalues(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// -log N(y; 0, cov) evaluated with an LU decomposition.
inline double neg_log_mvn_density(const Vector& y, const Matrix& cov) {
    Eigen::FullPivLU<Matrix> lu(cov);
    const Vector sol = lu.solve(y);
    double logdet = 0.0;
    const Matrix& lum = lu.matrixLU();
    for (Eigen::Index i = 0; i < lum.rows(); ++i) logdet += std::log(std::abs(lum(i, i)));
    const double n = static_cast<double>(y.size());
    return 0.5 * y.dot(sol) + 0.5 * logdet + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

struct Conditional {
    Vector mean;
    Vector variance;
};

/// Gaussian conditioning of a joint (train, test) covariance. `joint` is the
/// noise-free prior over [train; test]; observation noise is added to the
/// train block and, when requested, to the reported test variance.
inline Conditional condition_joint(const Matrix& joint, Eigen::Index n_train, const Vector& y, double noise,
                                   bool include_noise) {
    const Eigen::Index m = joint.rows() - n_train;
    Matrix kxx = joint.topLeftCorner(n_train, n_train);
    kxx.diagonal().array() += noise;
    const Matrix ksx = joint.bottomLeftCorner(m, n_train);
    const Matrix kss = joint.bottomRightCorner(m, m);
    Eigen::FullPivLU<Matrix> lu(kxx);
    Conditional c;
    c.mean = ksx * lu.solve(y);
    const Matrix cov = kss - ksx * lu.solve(Matrix(ksx.transpose()));
    c.variance = cov.diagonal();
    if (include_noise) c.variance.array() += noise;
    return c;
}

/// Central finite difference of f along coordinate d.
inline double central_diff(const std::function<double(const Vector&)>& f, const Vector& x, Eigen::Index d,
                           double h = 1e-5) {
    Vector xp = x, xm = x;
    xp(d) += h;
    xm(d) -= h;
    return (f(xp) - f(xm)) / (2.0 * h);
}

inline Matrix random_spd(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(rng);
    Matrix spd = a * a.transpose();
    spd.diagonal().array() += static_cast<double>(n);
    return spd;
}

}  // namespace oracle

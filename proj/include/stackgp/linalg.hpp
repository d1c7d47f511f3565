#pragma once

#include <Eigen/Dense>

namespace stackgp::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix. Construction rejects asymmetric input, so every
/// instance satisfies entries(i,j) == entries(j,i) exactly.
class SymMatrix {
public:
    explicit SymMatrix(Matrix m);

    /// Mirrors the lower triangle into the upper one.
    static SymMatrix from_lower(Matrix m);

    Eigen::Index n() const noexcept { return m_.rows(); }
    const Matrix& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// Returns a copy with `value` added to every diagonal entry.
    SymMatrix plus_diagonal(double value) const;

private:
    struct Trusted {};
    SymMatrix(Matrix m, Trusted) : m_(std::move(m)) {}
    Matrix m_;
};

/// Jitter ladder: first try the matrix as given (when `try_unjittered`), then
/// add initial_relative * mean(diag), growing by `growth` up to `max_steps`
/// times.
struct JitterPolicy {
    double initial_relative = 1e-10;
    double growth = 10.0;
    int max_steps = 6;
    bool try_unjittered = true;
};

/// Lower-triangular L with L * L^T = K + jitter * I.
class CholFactor {
public:
    CholFactor(Matrix lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

    Eigen::Index n() const noexcept { return lower_.rows(); }
    const Matrix& lower() const noexcept { return lower_; }
    double jitter() const noexcept { return jitter_; }

private:
    Matrix lower_;
    double jitter_;
};

CholFactor cholesky(const SymMatrix& m, const JitterPolicy& policy = {});

/// Solves (L L^T) x = b by forward then backward substitution.
Vector solve_chol(const CholFactor& f, const Vector& b);
Matrix solve_chol(const CholFactor& f, const Matrix& b);

/// Solves L x = b only.
Matrix solve_lower(const CholFactor& f, const Matrix& b);

double logdet(const CholFactor& f);

/// (L L^T)^{-1} assembled column-by-column through the factor. Used for the
/// trace term of likelihood gradients, never for solving systems.
Matrix inverse_from_chol(const CholFactor& f);

}  // namespace stackgp::linalg

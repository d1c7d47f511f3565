#include "stackgp/linalg.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "stackgp/errors.hpp"

namespace stackgp::linalg {

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() < 1 || m_.rows() != m_.cols()) {
        throw DimensionMismatch("SymMatrix must be square with n >= 1");
    }
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
        for (Eigen::Index i = j + 1; i < m_.rows(); ++i) {
            if (m_(i, j) != m_(j, i)) {
                std::ostringstream os;
                os << "matrix not symmetric at (" << i << "," << j << ")";
                throw DimensionMismatch(os.str());
            }
        }
    }
}

SymMatrix SymMatrix::from_lower(Matrix m) {
    if (m.rows() < 1 || m.rows() != m.cols()) {
        throw DimensionMismatch("SymMatrix must be square with n >= 1");
    }
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose().triangularView<Eigen::StrictlyUpper>();
    return SymMatrix(std::move(m), Trusted{});
}

SymMatrix SymMatrix::plus_diagonal(double value) const {
    Matrix out = m_;
    out.diagonal().array() += value;
    return SymMatrix(std::move(out), Trusted{});
}

CholFactor cholesky(const SymMatrix& m, const JitterPolicy& policy) {
    const Matrix& a = m.matrix();
    if (!a.allFinite()) {
        throw NotPositiveDefinite("matrix contains non-finite entries");
    }
    const double mean_diag = std::abs(a.diagonal().mean());
    const double base = policy.initial_relative * (mean_diag > 0.0 ? mean_diag : 1.0);

    auto attempt = [&](double jitter) -> std::optional<CholFactor> {
        Matrix work = a;
        if (jitter > 0.0) work.diagonal().array() += jitter;
        Eigen::LLT<Matrix, Eigen::Lower> llt(work);
        if (llt.info() != Eigen::Success) return std::nullopt;
        Matrix lower = llt.matrixL();
        if (!lower.allFinite() || (lower.diagonal().array() <= 0.0).any()) return std::nullopt;
        return CholFactor(std::move(lower), jitter);
    };

    if (policy.try_unjittered) {
        if (auto f = attempt(0.0)) return *std::move(f);
    }
    double jitter = base;
    for (int step = 0; step < policy.max_steps; ++step, jitter *= policy.growth) {
        if (auto f = attempt(jitter)) return *std::move(f);
    }
    std::ostringstream os;
    os << "Cholesky failed for n=" << a.rows() << " after " << policy.max_steps
       << " jitter steps (last jitter " << jitter / policy.growth << ")";
    throw NotPositiveDefinite(os.str());
}

Vector solve_chol(const CholFactor& f, const Vector& b) {
    if (b.size() != f.n()) throw DimensionMismatch("solve_chol: rhs length differs from factor size");
    const auto l = f.lower().triangularView<Eigen::Lower>();
    Vector y = l.solve(b);
    return l.transpose().solve(y);
}

Matrix solve_chol(const CholFactor& f, const Matrix& b) {
    if (b.rows() != f.n()) throw DimensionMismatch("solve_chol: rhs rows differ from factor size");
    const auto l = f.lower().triangularView<Eigen::Lower>();
    Matrix y = l.solve(b);
    return l.transpose().solve(y);
}

Matrix solve_lower(const CholFactor& f, const Matrix& b) {
    if (b.rows() != f.n()) throw DimensionMismatch("solve_lower: rhs rows differ from factor size");
    return f.lower().triangularView<Eigen::Lower>().solve(b);
}

double logdet(const CholFactor& f) {
    return 2.0 * f.lower().diagonal().array().log().sum();
}

Matrix inverse_from_chol(const CholFactor& f) {
    Matrix inv = solve_chol(f, Matrix(Matrix::Identity(f.n(), f.n())));
    // Symmetrize away round-off so downstream traces see an exact SymMatrix.
    Matrix sym = 0.5 * (inv + inv.transpose());
    return sym;
}

}  // namespace stackgp::linalg

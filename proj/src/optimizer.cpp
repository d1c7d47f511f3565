#include "stackgp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackgp::opt {

BfgsResult minimize_bfgs(const Objective& objective, Vector x0, const BfgsOptions& options) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.grad = Vector::Zero(n);
    res.f = objective(res.x, res.grad);
    res.evaluations = 1;
    if (!std::isfinite(res.f)) {
        res.reason = "objective not finite at starting point";
        return res;
    }
    if (n == 0) {
        res.converged = true;
        res.reason = "no free parameters";
        return res;
    }

    Matrix h = Matrix::Identity(n, n);
    bool fresh_h = true;
    Vector trial_grad(n);

    for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
        if (res.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
            res.converged = true;
            res.reason = "gradient tolerance reached";
            return res;
        }

        Vector dir = -(h * res.grad);
        double slope = res.grad.dot(dir);
        if (!(slope < 0.0)) {
            h.setIdentity();
            fresh_h = true;
            dir = -res.grad;
            slope = res.grad.dot(dir);
        }
        const double dir_norm = dir.lpNorm<Eigen::Infinity>();
        double alpha = dir_norm > options.max_step ? options.max_step / dir_norm : 1.0;

        // Armijo backtracking with safeguarded interpolation.
        constexpr double c1 = 1e-4;
        double f_trial = std::numeric_limits<double>::infinity();
        Vector x_trial(n);
        bool accepted = false;
        double prev_alpha = 0.0, prev_f = 0.0;
        for (int ls = 0; ls < options.max_line_search; ++ls) {
            x_trial = res.x + alpha * dir;
            f_trial = objective(x_trial, trial_grad);
            ++res.evaluations;
            if (std::isfinite(f_trial) && f_trial <= res.f + c1 * alpha * slope) {
                accepted = true;
                break;
            }
            double next;
            if (!std::isfinite(f_trial)) {
                next = 0.25 * alpha;
            } else if (ls == 0 || !std::isfinite(prev_f)) {
                next = -slope * alpha * alpha / (2.0 * (f_trial - res.f - slope * alpha));
            } else {
                // Cubic through (0, f, slope), (alpha, f_trial), (prev_alpha, prev_f).
                const double r1 = f_trial - res.f - slope * alpha;
                const double r2 = prev_f - res.f - slope * prev_alpha;
                const double denom = alpha - prev_alpha;
                const double a = (r1 / (alpha * alpha) - r2 / (prev_alpha * prev_alpha)) / denom;
                const double b = (-prev_alpha * r1 / (alpha * alpha) + alpha * r2 / (prev_alpha * prev_alpha)) / denom;
                if (a == 0.0) {
                    next = -slope / (2.0 * b);
                } else {
                    const double disc = b * b - 3.0 * a * slope;
                    next = disc < 0.0 ? 0.5 * alpha : (-b + std::sqrt(disc)) / (3.0 * a);
                }
            }
            if (!std::isfinite(next)) next = 0.5 * alpha;
            prev_alpha = alpha;
            prev_f = f_trial;
            alpha = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
        }

        if (!accepted) {
            if (!fresh_h) {
                h.setIdentity();
                fresh_h = true;
                continue;
            }
            res.reason = "line search failed";
            res.converged = res.grad.lpNorm<Eigen::Infinity>() < 1e3 * options.grad_tol;
            return res;
        }

        const Vector s = x_trial - res.x;
        const Vector y = trial_grad - res.grad;
        const double f_old = res.f;
        res.x = x_trial;
        res.f = f_trial;
        res.grad = trial_grad;

        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            if (fresh_h) {
                h *= sy / y.squaredNorm();
                fresh_h = false;
            }
            const double rho = 1.0 / sy;
            const Vector hy = h * y;
            h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
        }

        if (std::abs(f_old - res.f) <= options.f_rel_tol * std::max(1.0, std::abs(res.f))) {
            res.converged = true;
            res.reason = "relative function decrease below tolerance";
            return res;
        }
    }
    res.reason = "iteration limit";
    return res;
}

}  // namespace stackgp::opt

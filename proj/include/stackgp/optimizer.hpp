#pragma once

#include <functional>
#include <string>

#include "stackgp/linalg.hpp"

namespace stackgp::opt {

using linalg::Matrix;
using linalg::Vector;

/// Objective returning f(x) and writing its gradient. A non-finite return
/// marks x as infeasible; the line search then backtracks.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct BfgsOptions {
    int max_iter = 200;
    double grad_tol = 1e-6;      // on the infinity norm of the gradient
    double f_rel_tol = 1e-12;    // relative decrease below which we stop
    double max_step = 2.0;       // infinity-norm cap of a single step
    int max_line_search = 40;
};

struct BfgsResult {
    Vector x;
    double f = 0.0;
    Vector grad;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string reason;
};

/// Dense BFGS with an Armijo backtracking line search (quadratic/cubic
/// interpolation). The inverse-Hessian update is skipped when the curvature
/// condition fails, which keeps the approximation positive definite.
BfgsResult minimize_bfgs(const Objective& objective, Vector x0, const BfgsOptions& options = {});

}  // namespace stackgp::opt

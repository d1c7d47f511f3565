#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "stackgp/kernels.hpp"
#include "stackgp/linalg.hpp"

namespace stackgp::gp {

using kernels::AnyKernel;
using kernels::Inputs;
using linalg::Matrix;
using linalg::Vector;

/// Kernel log-parameters plus log observation-noise variance.
struct GPHyperparams {
    std::vector<double> kernel_log_params;
    double log_noise = 0.0;

    double noise_variance() const { return std::exp(log_noise); }
};

GPHyperparams hyperparams_of(const AnyKernel& kernel, double noise_variance);

struct OptConfig {
    int restarts = 3;
    int max_iter = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool freeze_period = false;
    /// Starting noise variance for the first restart, relative to the
    /// (standardized, unit) target variance.
    double initial_noise = 0.1;
    /// Lower bound on the noise variance in standardized units.
    double min_noise = 1e-6;
    /// When nonzero and the data has more rows, hyperparameters are optimized
    /// on a seeded random subset of this many rows; the final model still
    /// conditions on every row.
    std::size_t max_opt_rows = 0;
};

struct FitDiagnostics {
    double nlml = 0.0;                 // at the returned hyperparameters, optimization rows
    std::vector<double> restart_nlml;  // converged value per restart (inf when failed)
    int best_restart = -1;
    bool degenerate = false;           // all targets identical: noise not identifiable
    std::size_t opt_rows = 0;
};

/// Exact GP conditioned on training data. Targets are standardized to zero
/// mean and unit variance internally; predictions come back in raw units.
class GPModel {
public:
    static GPModel condition(AnyKernel kernel, double log_noise, Inputs inputs, Vector targets,
                             const linalg::JitterPolicy& jitter = {});

    const AnyKernel& kernel() const noexcept { return kernel_; }
    GPHyperparams hyper() const;
    double noise_variance() const { return std::exp(log_noise_); }
    const Inputs& train_inputs() const noexcept { return inputs_; }
    const Vector& train_targets() const noexcept { return targets_; }
    const Vector& standardized_targets() const noexcept { return y_std_; }
    const linalg::CholFactor& chol() const noexcept { return chol_; }
    const Vector& alpha() const noexcept { return alpha_; }
    double target_mean() const noexcept { return mean_; }
    double target_scale() const noexcept { return scale_; }
    bool degenerate() const noexcept { return degenerate_; }

    FitDiagnostics diagnostics;

private:
    GPModel(AnyKernel kernel, double log_noise, Inputs inputs, Vector targets, linalg::CholFactor chol);

    AnyKernel kernel_;
    double log_noise_;
    Inputs inputs_;
    Vector targets_;
    Vector y_std_;
    linalg::CholFactor chol_;
    Vector alpha_;
    double mean_ = 0.0;
    double scale_ = 1.0;
    bool degenerate_ = false;
};

struct PredictiveDist {
    Vector mean;
    Vector variance;
    Vector lower95;
    Vector upper95;
};

/// Negative log marginal likelihood of `targets` as given (callers standardize).
double nlml(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs, const Vector& targets);

/// Gradient of nlml with respect to every kernel log-parameter followed by
/// log noise variance, via 0.5 * tr((K^-1 - alpha alpha^T) dK/dtheta).
Vector nlml_grad(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs, const Vector& targets);

/// Both at once, sharing one factorization.
double nlml_with_grad(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs,
                      const Vector& targets, Vector& grad);

/// Maximum marginal likelihood fit with multi-start BFGS in log space.
GPModel fit(const AnyKernel& kernel, const Inputs& inputs, const Vector& targets, const OptConfig& config);

/// Predictive distribution at test inputs. With `include_noise` the variance
/// is that of a new observation; otherwise the latent function variance.
PredictiveDist predict(const GPModel& model, const Inputs& test_inputs, bool include_noise = true);

/// Leave-one-out predictive means at the training inputs, raw units.
Vector loo_means(const GPModel& model);

/// Leave-one-out predictive distribution of each training target (noise
/// included), raw units.
struct LooPredictive {
    Vector mean;
    Vector variance;
};
LooPredictive loo_predictive(const GPModel& model);

Inputs column_inputs(const std::vector<double>& values);

}  // namespace stackgp::gp

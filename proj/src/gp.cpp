#include "stackgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "stackgp/errors.hpp"
#include "stackgp/optimizer.hpp"

namespace stackgp::gp {

namespace {

constexpr double kLogParamBound = 15.0;
constexpr double kZ95 = 1.96;

struct Standardization {
    double mean = 0.0;
    double scale = 1.0;
    bool degenerate = false;
};

Standardization standardization_of(const Vector& y) {
    Standardization s;
    s.mean = y.mean();
    const double var = (y.array() - s.mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mean)))) {
        s.scale = 1.0;
        s.degenerate = true;
    } else {
        s.scale = sd;
    }
    return s;
}

linalg::SymMatrix noisy_gram(const AnyKernel& kernel, const Inputs& inputs, double noise) {
    return kernels::gram(kernel, inputs).plus_diagonal(noise);
}

void check_data(const Inputs& inputs, const Vector& targets) {
    if (inputs.rows() != targets.size()) {
        throw DimensionMismatch("inputs have " + std::to_string(inputs.rows()) + " rows but targets have " +
                                std::to_string(targets.size()));
    }
    if (inputs.rows() < 1) throw EmptyInput("GP needs at least one training point");
}

/// Range of input values a lengthscale slot acts on.
double lengthscale_span(const AnyKernel& kernel, const Inputs& inputs, std::size_t slot) {
    auto span_of = [&](Eigen::Index c0, Eigen::Index count) {
        double s = 0.0;
        for (Eigen::Index c = c0; c < c0 + count; ++c) {
            s = std::max(s, inputs.col(c).maxCoeff() - inputs.col(c).minCoeff());
        }
        return s > 0.0 ? s : 1.0;
    };
    if (const auto* fk = std::get_if<kernels::FeatureGroupKernel>(&kernel)) {
        for (std::size_t g = fk->groups().size(); g-- > 0;) {
            if (slot >= fk->param_offset(g)) {
                const auto& grp = fk->groups()[g];
                return span_of(static_cast<Eigen::Index>(grp.begin), static_cast<Eigen::Index>(grp.count));
            }
        }
    }
    return span_of(0, inputs.cols());
}

Inputs select_rows(const Inputs& x, const std::vector<Eigen::Index>& rows) {
    Inputs out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

}  // namespace

GPHyperparams hyperparams_of(const AnyKernel& kernel, double noise_variance) {
    return {kernels::log_params(kernel), std::log(noise_variance)};
}

Inputs column_inputs(const std::vector<double>& values) {
    Inputs x(static_cast<Eigen::Index>(values.size()), 1);
    for (std::size_t i = 0; i < values.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = values[i];
    return x;
}

// ---------------------------------------------------------------------------
// GPModel

GPModel::GPModel(AnyKernel kernel, double log_noise, Inputs inputs, Vector targets, linalg::CholFactor chol)
    : kernel_(std::move(kernel)),
      log_noise_(log_noise),
      inputs_(std::move(inputs)),
      targets_(std::move(targets)),
      chol_(std::move(chol)) {}

GPModel GPModel::condition(AnyKernel kernel, double log_noise, Inputs inputs, Vector targets,
                           const linalg::JitterPolicy& jitter) {
    check_data(inputs, targets);
    const Standardization st = standardization_of(targets);
    Vector y_std = (targets.array() - st.mean) / st.scale;
    auto chol = linalg::cholesky(noisy_gram(kernel, inputs, std::exp(log_noise)), jitter);
    GPModel m(std::move(kernel), log_noise, std::move(inputs), std::move(targets), std::move(chol));
    m.mean_ = st.mean;
    m.scale_ = st.scale;
    m.degenerate_ = st.degenerate;
    m.alpha_ = linalg::solve_chol(m.chol_, y_std);
    m.y_std_ = std::move(y_std);
    m.diagnostics.degenerate = st.degenerate;
    return m;
}

GPHyperparams GPModel::hyper() const { return {kernels::log_params(kernel_), log_noise_}; }

// ---------------------------------------------------------------------------
// Likelihood

double nlml(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs, const Vector& targets) {
    check_data(inputs, targets);
    const AnyKernel k = kernels::with_log_params(kernel, hyper.kernel_log_params);
    const auto chol = linalg::cholesky(noisy_gram(k, inputs, hyper.noise_variance()));
    const Vector alpha = linalg::solve_chol(chol, targets);
    const double n = static_cast<double>(targets.size());
    return 0.5 * targets.dot(alpha) + 0.5 * linalg::logdet(chol) + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

double nlml_with_grad(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs,
                      const Vector& targets, Vector& grad) {
    check_data(inputs, targets);
    const AnyKernel k = kernels::with_log_params(kernel, hyper.kernel_log_params);
    const double noise = hyper.noise_variance();
    const auto chol = linalg::cholesky(noisy_gram(k, inputs, noise));
    const Vector alpha = linalg::solve_chol(chol, targets);
    const double n = static_cast<double>(targets.size());

    Matrix w = linalg::inverse_from_chol(chol);
    w.noalias() -= alpha * alpha.transpose();

    const std::size_t np = kernels::num_params(k);
    grad.resize(static_cast<Eigen::Index>(np + 1));
    grad.head(static_cast<Eigen::Index>(np)) = 0.5 * kernels::contract_grad(k, inputs, w);
    grad(static_cast<Eigen::Index>(np)) = 0.5 * w.trace() * noise;

    return 0.5 * targets.dot(alpha) + 0.5 * linalg::logdet(chol) + 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Vector nlml_grad(const AnyKernel& kernel, const GPHyperparams& hyper, const Inputs& inputs, const Vector& targets) {
    Vector g;
    nlml_with_grad(kernel, hyper, inputs, targets, g);
    return g;
}

// ---------------------------------------------------------------------------
// Fitting

GPModel fit(const AnyKernel& kernel, const Inputs& inputs, const Vector& targets, const OptConfig& config) {
    check_data(inputs, targets);
    if (inputs.rows() < 2) throw TooFewPoints("GP fit needs at least 2 training points");
    if (config.restarts < 1) throw ConfigError("restarts must be >= 1");

    const Standardization st = standardization_of(targets);
    const Vector y_std = (targets.array() - st.mean) / st.scale;
    const double min_log_noise = std::log(config.min_noise);

    if (st.degenerate) {
        // Constant targets carry no information about the kernel or the noise.
        GPModel m = GPModel::condition(kernel, std::max(std::log(config.initial_noise), min_log_noise), inputs,
                                       targets);
        m.diagnostics.degenerate = true;
        m.diagnostics.opt_rows = 0;
        return m;
    }

    std::mt19937_64 rng(config.seed);

    // Optimization rows.
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(inputs.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    Inputs opt_x;
    Vector opt_y;
    if (config.max_opt_rows > 0 && rows.size() > config.max_opt_rows) {
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(config.max_opt_rows);
        std::sort(rows.begin(), rows.end());
        opt_x = select_rows(inputs, rows);
        opt_y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) opt_y(static_cast<Eigen::Index>(i)) = y_std(rows[i]);
    } else {
        opt_x = inputs;
        opt_y = y_std;
    }

    const auto& info = kernels::param_info(kernel);
    const std::vector<double> base = kernels::log_params(kernel);
    const std::size_t np = base.size();
    std::vector<std::size_t> free_slots;
    for (std::size_t q = 0; q < np; ++q) {
        const bool frozen = info[q].frozen || (config.freeze_period && info[q].kind == kernels::ParamKind::Period);
        if (!frozen) free_slots.push_back(q);
    }
    const auto nfree = static_cast<Eigen::Index>(free_slots.size());

    auto unpack = [&](const Vector& theta) {
        GPHyperparams h{base, 0.0};
        for (Eigen::Index i = 0; i < nfree; ++i) h.kernel_log_params[free_slots[static_cast<std::size_t>(i)]] = theta(i);
        h.log_noise = std::max(theta(nfree), min_log_noise);
        return h;
    };

    opt::Objective objective = [&](const Vector& theta, Vector& grad) -> double {
        grad = Vector::Zero(theta.size());
        for (Eigen::Index i = 0; i < nfree; ++i) {
            if (std::abs(theta(i)) > kLogParamBound) return std::numeric_limits<double>::infinity();
        }
        if (theta(nfree) > kLogParamBound) return std::numeric_limits<double>::infinity();
        const GPHyperparams h = unpack(theta);
        Vector full;
        double f;
        try {
            f = nlml_with_grad(kernel, h, opt_x, opt_y, full);
        } catch (const NotPositiveDefinite&) {
            return std::numeric_limits<double>::infinity();
        }
        for (Eigen::Index i = 0; i < nfree; ++i) grad(i) = full(static_cast<Eigen::Index>(free_slots[static_cast<std::size_t>(i)]));
        grad(nfree) = theta(nfree) >= min_log_noise ? full(static_cast<Eigen::Index>(np)) : 0.0;
        return f;
    };

    opt::BfgsOptions bopt;
    bopt.max_iter = config.max_iter;
    bopt.grad_tol = config.tol;

    auto log_uniform = [&](double lo, double hi) {
        std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
        return u(rng);
    };

    FitDiagnostics diag;
    diag.opt_rows = static_cast<std::size_t>(opt_x.rows());
    Vector best_theta;
    double best_f = std::numeric_limits<double>::infinity();

    for (int r = 0; r < config.restarts; ++r) {
        Vector theta(nfree + 1);
        for (Eigen::Index i = 0; i < nfree; ++i) {
            const std::size_t slot = free_slots[static_cast<std::size_t>(i)];
            if (r == 0) {
                theta(i) = base[slot];
                continue;
            }
            switch (info[slot].kind) {
                case kernels::ParamKind::Amplitude:
                case kernels::ParamKind::Constant:
                    theta(i) = log_uniform(0.1, 10.0);
                    break;
                case kernels::ParamKind::Lengthscale: {
                    const double span = lengthscale_span(kernel, opt_x, slot);
                    theta(i) = log_uniform(0.5 * span, 2.0 * span);
                    break;
                }
                case kernels::ParamKind::Period:
                    theta(i) = base[slot];
                    break;
            }
        }
        theta(nfree) = r == 0 ? std::log(config.initial_noise) : log_uniform(1e-4, 1.0);
        theta(nfree) = std::max(theta(nfree), min_log_noise);

        const auto res = opt::minimize_bfgs(objective, theta, bopt);
        const double f = std::isfinite(res.f) ? res.f : std::numeric_limits<double>::infinity();
        diag.restart_nlml.push_back(f);
        if (f < best_f) {
            best_f = f;
            best_theta = res.x;
            diag.best_restart = r;
        }
    }
    if (!std::isfinite(best_f)) {
        throw NotPositiveDefinite("every optimizer restart failed to factorize the covariance");
    }

    const GPHyperparams best = unpack(best_theta);
    GPModel m = GPModel::condition(kernels::with_log_params(kernel, best.kernel_log_params), best.log_noise, inputs,
                                   targets);
    diag.nlml = best_f;
    m.diagnostics = diag;
    return m;
}

// ---------------------------------------------------------------------------
// Prediction

PredictiveDist predict(const GPModel& model, const Inputs& test_inputs, bool include_noise) {
    if (test_inputs.cols() != model.train_inputs().cols()) {
        throw DimensionMismatch("test inputs have " + std::to_string(test_inputs.cols()) +
                                " columns, training inputs have " + std::to_string(model.train_inputs().cols()));
    }
    const Matrix k_star = kernels::gram(model.kernel(), model.train_inputs(), test_inputs);  // n x m
    const Vector prior = kernels::gram_diagonal(model.kernel(), test_inputs);
    const Matrix v = linalg::solve_lower(model.chol(), k_star);

    const double scale = model.target_scale();
    PredictiveDist out;
    out.mean = (k_star.transpose() * model.alpha()).array() * scale + model.target_mean();
    Vector latent = prior - v.colwise().squaredNorm().transpose();
    const double floor = 1e-12 * std::max(1.0, prior.maxCoeff());
    latent = latent.cwiseMax(floor);
    Vector var_std = include_noise ? Vector(latent.array() + model.noise_variance()) : latent;
    out.variance = var_std * (scale * scale);
    const Vector half = kZ95 * out.variance.array().sqrt();
    out.lower95 = out.mean - half;
    out.upper95 = out.mean + half;
    return out;
}

LooPredictive loo_predictive(const GPModel& model) {
    const Matrix inv = linalg::inverse_from_chol(model.chol());
    const Vector d = inv.diagonal();
    const Vector loo_std = model.standardized_targets().array() - model.alpha().array() / d.array();
    const double s = model.target_scale();
    return {loo_std.array() * s + model.target_mean(), d.array().inverse() * (s * s)};
}

Vector loo_means(const GPModel& model) { return loo_predictive(model).mean; }

}  // namespace stackgp::gp

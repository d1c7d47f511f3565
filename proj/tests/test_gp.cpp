#include "stackgp/gp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stackgp/errors.hpp"

namespace stackgp::gp {
namespace {

using kernels::KernelSpec;

Inputs points(std::initializer_list<double> xs) { return column_inputs(std::vector<double>(xs)); }

Inputs random_points(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Inputs x(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = u(rng);
    return x;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> nd;
    Vector y(n);
    for (auto& v : y) v = nd(rng);
    return y;
}

/// Draw from N(0, K) via the symmetric eigen-decomposition.
Vector sample_prior(const Matrix& k, std::mt19937_64& rng) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    const Vector sd = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * (sd.asDiagonal() * random_vector(rng, k.rows()));
}

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

TEST(NlmlTest, SinglePointClosedForms) {
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 1.0);
    const auto h = hyperparams_of(k, 1.0);
    EXPECT_NEAR(nlml(k, h, points({0.0}), Vector{{0.0}}), 0.5 * std::log(2.0) + kHalfLog2Pi, 1e-14);
    EXPECT_NEAR(nlml(k, h, points({0.0}), Vector{{2.0}}), 1.0 + 0.5 * std::log(2.0) + kHalfLog2Pi, 1e-14);
}

TEST(NlmlTest, MatchesDenseMvnOracle) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const AnyKernel k = KernelSpec::tied_locally_periodic(0.5 + trial * 0.1, 1.0 + 0.2 * trial, 12.0);
        const Eigen::Index n = 2 + trial % 7;
        const Inputs x = random_points(rng, n, 0, 30);
        const Vector y = random_vector(rng, n);
        const double noise = 0.05 + 0.01 * trial;
        Matrix cov = kernels::gram(k, x).matrix();
        cov.diagonal().array() += noise;
        EXPECT_NEAR(nlml(k, hyperparams_of(k, noise), x, y), oracle::neg_log_mvn_density(y, cov), 1e-8);
    }
}

TEST(NlmlGradTest, MatchesFiniteDifferences) {
    std::mt19937_64 rng(22);
    const AnyKernel k = KernelSpec::locally_periodic(1.1, 0.9, 12.0, 0.7, 6.0);
    const Inputs x = random_points(rng, 6, 0, 24);
    const Vector y = random_vector(rng, 6);
    const auto h = hyperparams_of(k, 0.2);
    const Vector g = nlml_grad(k, h, x, y);

    Vector theta(static_cast<Eigen::Index>(h.kernel_log_params.size() + 1));
    for (std::size_t i = 0; i < h.kernel_log_params.size(); ++i) theta(static_cast<Eigen::Index>(i)) = h.kernel_log_params[i];
    theta(theta.size() - 1) = h.log_noise;
    auto f = [&](const Vector& t) {
        GPHyperparams hh{std::vector<double>(t.data(), t.data() + t.size() - 1), t(t.size() - 1)};
        return nlml(k, hh, x, y);
    };
    for (Eigen::Index d = 0; d < theta.size(); ++d) {
        const double fd = oracle::central_diff(f, theta, d);
        EXPECT_LE(std::abs(g(d) - fd), 1e-5 * std::max(std::abs(fd), 1e-3)) << "coordinate " << d;
    }
}

TEST(NlmlGradTest, NoiseGradientNegativeOnWhiteNoise) {
    std::mt19937_64 rng(23);
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 20.0);
    Inputs x(12, 1);
    for (Eigen::Index i = 0; i < 12; ++i) x(i, 0) = static_cast<double>(i);
    const Vector y = random_vector(rng, 12);
    const auto h = hyperparams_of(k, 1e-4);
    const Vector g = nlml_grad(k, h, x, y);
    const double analytic = g(g.size() - 1);
    auto f = [&](const Vector& t) { return nlml(k, GPHyperparams{h.kernel_log_params, t(0)}, x, y); };
    const double fd = oracle::central_diff(f, Vector{{h.log_noise}}, 0);
    EXPECT_LT(fd, 0.0);
    EXPECT_LT(analytic, 0.0);
}

TEST(PredictTest, MatchesJointGaussianConditioning) {
    std::mt19937_64 rng(24);
    const AnyKernel k = KernelSpec::tied_locally_periodic(1.3, 2.0, 12.0);
    const Inputs train = points({1.0, 4.0, 9.0});
    const Inputs test = points({2.5, 15.0});
    const Vector y{{3.0, -1.0, 2.0}};
    const double log_noise = std::log(0.3);
    const auto model = GPModel::condition(k, log_noise, train, y);

    Inputs joint_x(5, 1);
    joint_x << 1.0, 4.0, 9.0, 2.5, 15.0;
    const Matrix joint = kernels::gram(k, joint_x).matrix();
    const Vector y_std = (y.array() - model.target_mean()) / model.target_scale();
    const auto ref = oracle::condition_joint(joint, 3, y_std, 0.3, true);

    const auto pd = predict(model, test);
    const double s = model.target_scale();
    for (Eigen::Index i = 0; i < 2; ++i) {
        EXPECT_NEAR(pd.mean(i), ref.mean(i) * s + model.target_mean(), 1e-8);
        EXPECT_NEAR(pd.variance(i), ref.variance(i) * s * s, 1e-8);
        EXPECT_NEAR(pd.upper95(i) - pd.mean(i), 1.96 * std::sqrt(pd.variance(i)), 1e-12);
        EXPECT_NEAR(pd.mean(i) - pd.lower95(i), 1.96 * std::sqrt(pd.variance(i)), 1e-12);
    }
}

TEST(PredictTest, InterpolatesInNoiselessLimit) {
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 1.5);
    const Vector y{{1.0, 3.0, 2.0, 5.0}};
    const auto model = GPModel::condition(k, std::log(1e-10), points({0, 1, 2.5, 4}), y);
    const auto pd = predict(model, points({2.5}));
    EXPECT_NEAR(pd.mean(0), 2.0, 1e-6);
    EXPECT_NEAR(pd.variance(0), 1e-10 * model.target_scale() * model.target_scale(), 1e-8);
}

TEST(PredictTest, RevertsToPriorFarFromData) {
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 1.0);
    const Vector y{{1.0, 3.0, 2.0}};
    const auto model = GPModel::condition(k, std::log(0.01), points({0, 1, 2}), y);
    const auto pd = predict(model, points({50.0}));
    EXPECT_NEAR(pd.mean(0), y.mean(), 1e-9);
    const double s2 = model.target_scale() * model.target_scale();
    EXPECT_NEAR(pd.variance(0), (1.0 + 0.01) * s2, 1e-9);
}

TEST(PredictTest, LatentVarianceExcludesNoise) {
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 1.0);
    const auto model = GPModel::condition(k, std::log(0.25), points({0, 1}), Vector{{1.0, 2.0}});
    const auto with_noise = predict(model, points({0.5}), true);
    const auto latent = predict(model, points({0.5}), false);
    const double s2 = model.target_scale() * model.target_scale();
    EXPECT_NEAR(with_noise.variance(0) - latent.variance(0), 0.25 * s2, 1e-12);
}

TEST(PredictTest, VarianceNonIncreasingAsPointsAdded) {
    std::mt19937_64 rng(25);
    const AnyKernel k = KernelSpec::tied_locally_periodic(1.0, 3.0, 12.0);
    const Inputs all = random_points(rng, 8, 0, 24);
    const Vector y = random_vector(rng, 8);
    const Inputs test = points({3.0, 11.0, 26.0});
    // Fixed hyperparameters and a fixed target scale so the standardized
    // variances are directly comparable.
    Vector prev;
    for (Eigen::Index n = 1; n <= 8; ++n) {
        Inputs x = all.topRows(n);
        Vector yy = y.head(n);
        const Matrix ks = kernels::gram(k, x, test);
        const auto f = linalg::cholesky(kernels::gram(k, x).plus_diagonal(0.1));
        const Vector latent = kernels::gram_diagonal(k, test) -
                              linalg::solve_lower(f, ks).colwise().squaredNorm().transpose();
        if (n > 1) EXPECT_TRUE(((latent - prev).array() <= 1e-12).all());
        prev = latent;
    }
}

TEST(PredictTest, DimensionMismatch) {
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 1.0);
    const auto model = GPModel::condition(k, 0.0, points({0, 1}), Vector{{1.0, 2.0}});
    EXPECT_THROW(predict(model, Inputs::Zero(1, 2)), DimensionMismatch);
}

TEST(GPModelTest, AlphaSolvesSystem) {
    std::mt19937_64 rng(26);
    const AnyKernel k = KernelSpec::tied_locally_periodic(1.0, 2.0, 12.0);
    const Inputs x = random_points(rng, 8, 0, 24);
    const auto model = GPModel::condition(k, std::log(0.05), x, random_vector(rng, 8));
    Matrix kk = kernels::gram(k, x).matrix();
    kk.diagonal().array() += 0.05;
    EXPECT_LT((kk * model.alpha() - model.standardized_targets()).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(GPModelTest, LooMeansMatchRefitWithoutPoint) {
    std::mt19937_64 rng(27);
    const AnyKernel k = KernelSpec::squared_exponential(1.0, 2.0);
    const Inputs x = random_points(rng, 6, 0, 12);
    const Vector y = random_vector(rng, 6);
    const double noise = 0.1;
    const auto model = GPModel::condition(k, std::log(noise), x, y);
    const Vector loo = loo_means(model);
    const auto loo_dist = loo_predictive(model);
    const Vector y_std = model.standardized_targets();
    for (Eigen::Index i = 0; i < 6; ++i) {
        Inputs joint(6, 1);
        Vector yo(5);
        Eigen::Index r = 0;
        for (Eigen::Index j = 0; j < 6; ++j) {
            if (j == i) continue;
            joint(r, 0) = x(j, 0);
            yo(r++) = y_std(j);
        }
        joint(5, 0) = x(i, 0);
        const auto ref = oracle::condition_joint(kernels::gram(k, joint).matrix(), 5, yo, noise, true);
        EXPECT_NEAR(loo(i), ref.mean(0) * model.target_scale() + model.target_mean(), 1e-9);
        const double s2 = model.target_scale() * model.target_scale();
        EXPECT_NEAR(loo_dist.variance(i), ref.variance(0) * s2, 1e-9 * s2);
    }
}

// --- fitting

TEST(FitTest, RecoversLengthscaleFromNoiselessSamples) {
    std::mt19937_64 rng(31);
    const double true_l = 3.0;
    const AnyKernel truth = KernelSpec::squared_exponential(1.0, true_l);
    Inputs x(20, 1);
    for (Eigen::Index i = 0; i < 20; ++i) x(i, 0) = 1.5 * static_cast<double>(i);
    const Vector y = sample_prior(kernels::gram(truth, x).matrix(), rng);

    OptConfig cfg;
    cfg.seed = 7;
    cfg.min_noise = 1e-8;
    const auto model = fit(KernelSpec::squared_exponential(1.0, 1.0), x, y, cfg);
    const double l = std::exp(kernels::log_params(model.kernel())[1]);
    EXPECT_NEAR(l, true_l, 0.25 * true_l);
}

TEST(FitTest, WhiteNoiseAbsorbedByNoiseTerm) {
    std::mt19937_64 rng(32);
    Inputs x(30, 1);
    for (Eigen::Index i = 0; i < 30; ++i) x(i, 0) = static_cast<double>(i);
    const Vector y = random_vector(rng, 30) * 5.0;
    OptConfig cfg;
    cfg.seed = 3;
    const auto model = fit(KernelSpec::squared_exponential(1.0, 5.0), x, y, cfg);
    // Standardized targets have unit variance, so the noise variance is the
    // absorbed fraction directly.
    EXPECT_GE(model.noise_variance(), 0.8);
}

TEST(FitTest, IdenticalPointsDoNotCrash) {
    OptConfig cfg;
    const auto model = fit(KernelSpec::squared_exponential(1.0, 1.0), points({2.0, 2.0}), Vector{{5.0, 5.0}}, cfg);
    EXPECT_TRUE(model.degenerate());
    const auto pd = predict(model, points({2.0, 10.0}));
    EXPECT_NEAR(pd.mean(0), 5.0, 1e-12);
    EXPECT_TRUE((pd.variance.array() > 0.0).all());
}

TEST(FitTest, TooFewPoints) {
    EXPECT_THROW(fit(KernelSpec::squared_exponential(1, 1), points({1.0}), Vector{{1.0}}, OptConfig{}), TooFewPoints);
}

TEST(FitTest, StationaryPointAndBestRestart) {
    std::mt19937_64 rng(33);
    const Inputs x = random_points(rng, 15, 0, 24);
    Vector y(15);
    for (Eigen::Index i = 0; i < 15; ++i) y(i) = std::sin(2 * std::numbers::pi * x(i, 0) / 12.0) + 0.1 * random_vector(rng, 1)(0);
    OptConfig cfg;
    cfg.seed = 5;
    cfg.freeze_period = true;
    const AnyKernel k0 = KernelSpec::tied_locally_periodic(1.0, 1.0, 12.0);
    const auto model = fit(k0, x, y, cfg);
    for (double f : model.diagnostics.restart_nlml) EXPECT_LE(model.diagnostics.nlml, f);

    const auto h = model.hyper();
    const Vector g = nlml_grad(model.kernel(), h, x, model.standardized_targets());
    // Free coordinates: periodic amplitude, lengthscale, noise.
    EXPECT_LT(std::abs(g(0)), 1e-4);
    EXPECT_LT(std::abs(g(1)), 1e-4);
    EXPECT_LT(std::abs(g(g.size() - 1)), 1e-4);
    EXPECT_DOUBLE_EQ(std::exp(kernels::log_params(model.kernel())[2]), 12.0);
}

TEST(FitTest, DeterministicGivenSeed) {
    std::mt19937_64 rng(34);
    const Inputs x = random_points(rng, 10, 0, 20);
    const Vector y = random_vector(rng, 10);
    OptConfig cfg;
    cfg.seed = 99;
    const AnyKernel k0 = KernelSpec::tied_locally_periodic(1.0, 2.0, 12.0);
    const auto a = fit(k0, x, y, cfg);
    const auto b = fit(k0, x, y, cfg);
    EXPECT_EQ(kernels::log_params(a.kernel()), kernels::log_params(b.kernel()));
    EXPECT_EQ(a.noise_variance(), b.noise_variance());
}

TEST(FitTest, AffineRescalingInvariance) {
    std::mt19937_64 rng(35);
    const Inputs x = random_points(rng, 12, 0, 24);
    const Vector y = random_vector(rng, 12);
    OptConfig cfg;
    cfg.seed = 1;
    const AnyKernel k0 = KernelSpec::tied_locally_periodic(1.0, 2.0, 12.0);
    const auto a = fit(k0, x, y, cfg);
    const Vector y2 = (y.array() * 250.0 + 4000.0).matrix();
    const auto b = fit(k0, x, y2, cfg);
    const auto test = points({5.0, 30.0});
    const auto pa = predict(a, test), pb = predict(b, test);
    for (Eigen::Index i = 0; i < 2; ++i) {
        EXPECT_NEAR(pb.mean(i), pa.mean(i) * 250.0 + 4000.0, 1e-6 * 250.0 * std::max(1.0, std::abs(pa.mean(i))));
        EXPECT_NEAR(pb.variance(i), pa.variance(i) * 250.0 * 250.0, 1e-6 * 250.0 * 250.0 * pa.variance(i));
    }
}

TEST(FitTest, OptimizationSubsetStillConditionsOnAllRows) {
    std::mt19937_64 rng(36);
    const Inputs x = random_points(rng, 40, 0, 24);
    const Vector y = random_vector(rng, 40);
    OptConfig cfg;
    cfg.max_opt_rows = 15;
    cfg.restarts = 1;
    const auto m = fit(KernelSpec::squared_exponential(1.0, 2.0), x, y, cfg);
    EXPECT_EQ(m.diagnostics.opt_rows, 15u);
    EXPECT_EQ(m.train_inputs().rows(), 40);
}

}  // namespace
}  // namespace stackgp::gp

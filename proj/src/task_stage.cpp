#include "stackgp/task_stage.hpp"

#include <algorithm>
#include <cmath>

#include "stackgp/errors.hpp"

namespace stackgp::task_stage {

std::string to_string(MpeMode mode) { return mode == MpeMode::LeaveOneOut ? "loo" : "in_sample"; }

MpeMode parse_mpe_mode(std::string_view name) {
    if (name == "loo") return MpeMode::LeaveOneOut;
    if (name == "in_sample") return MpeMode::InSample;
    throw ConfigError("unknown mpe mode '" + std::string(name) + "' (expected loo or in_sample)");
}

kernels::KernelSpec default_task_kernel() { return kernels::KernelSpec::tied_locally_periodic(1.0, 3.0, 12.0); }

std::size_t PosteriorSummary::index_of(MonthIndex m) const {
    const auto it = std::lower_bound(eval_times.begin(), eval_times.end(), m);
    if (it == eval_times.end() || *it != m)
        throw MissingCovariate("task '" + task_id + "' has no stage-1 posterior at " + format_month(m));
    return static_cast<std::size_t>(it - eval_times.begin());
}

double mpe(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.empty()) throw EmptyInput("mpe: empty input");
    if (actual.size() != predicted.size())
        throw DimensionMismatch("mpe: lengths " + std::to_string(actual.size()) + " and " +
                                std::to_string(predicted.size()));
    double mean_abs = 0.0;
    for (double a : actual) mean_abs += std::abs(a);
    mean_abs /= static_cast<double>(actual.size());
    const double eps = 1e-6 * mean_abs;
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double err = std::abs(actual[i] - predicted[i]);
        const double denom = std::max(std::abs(actual[i]), eps);
        total += denom > 0.0 ? std::min(kMpeTermCap, err / denom) : (err > 0.0 ? kMpeTermCap : 0.0);
    }
    return total / static_cast<double>(actual.size());
}

std::uint64_t task_seed(std::uint64_t base, const std::string& task_id) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : task_id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h ^ (base * 0x9e3779b97f4a7c15ull);
}

int backtest_lead(const std::string& task_id, MonthIndex target, int max_lead) {
    std::uint64_t z = task_seed(static_cast<std::uint64_t>(static_cast<std::int64_t>(target)), task_id);
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return 1 + static_cast<int>(z % static_cast<std::uint64_t>(max_lead));
}

gp::PredictiveDist predict_from_origin(const gp::GPModel& model, MonthIndex origin,
                                       std::span<const MonthIndex> months) {
    const auto& x = model.train_inputs();
    const auto& y = model.standardized_targets();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (x(i, 0) <= origin) keep.push_back(i);

    gp::Inputs xo(static_cast<Eigen::Index>(keep.size()), 1), xs(static_cast<Eigen::Index>(months.size()), 1);
    gp::Vector yo(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        xo(static_cast<Eigen::Index>(i), 0) = x(keep[i], 0);
        yo(static_cast<Eigen::Index>(i)) = y(keep[i]);
    }
    for (std::size_t i = 0; i < months.size(); ++i) xs(static_cast<Eigen::Index>(i), 0) = months[i];

    const double noise = model.noise_variance();
    const gp::Vector prior = kernels::gram_diagonal(model.kernel(), xs);
    gp::Vector mean = gp::Vector::Zero(xs.rows());
    gp::Vector latent = prior;
    if (!keep.empty()) {
        const auto chol = linalg::cholesky(kernels::gram(model.kernel(), xo).plus_diagonal(noise));
        const gp::Matrix kos = kernels::gram(model.kernel(), xo, xs);
        mean = kos.transpose() * linalg::solve_chol(chol, yo);
        latent -= linalg::solve_lower(chol, kos).colwise().squaredNorm().transpose();
    }
    latent = latent.cwiseMax(1e-12 * std::max(1.0, prior.maxCoeff()));
    const double s = model.target_scale();
    gp::PredictiveDist out;
    out.mean = mean.array() * s + model.target_mean();
    out.variance = (latent.array() + noise) * (s * s);
    const gp::Vector half = 1.959963984540054 * out.variance.array().sqrt();
    out.lower95 = out.mean - half;
    out.upper95 = out.mean + half;
    return out;
}

namespace {

std::vector<MonthIndex> eval_times_for(const TaskSeries& series, std::span<const MonthIndex> horizon) {
    std::vector<MonthIndex> t(series.times.begin(), series.times.end());
    t.insert(t.end(), horizon.begin(), horizon.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

void check_series(const TaskSeries& series) {
    if (series.times.size() < 3)
        throw TooFewPoints("task '" + series.task_id + "' needs >= 3 training months, got " +
                           std::to_string(series.times.size()));
}

gp::Inputs month_inputs(std::span<const MonthIndex> months) {
    gp::Inputs x(static_cast<Eigen::Index>(months.size()), 1);
    for (std::size_t i = 0; i < months.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = months[i];
    return x;
}

TaskFit summarize(const TaskSeries& series, std::span<const MonthIndex> horizon, gp::GPModel model,
                  const TaskStageConfig& cfg) {
    PosteriorSummary s;
    s.task_id = series.task_id;
    s.eval_times = eval_times_for(series, horizon);
    const auto pred = gp::predict(model, month_inputs(s.eval_times), true);
    s.means.assign(pred.mean.begin(), pred.mean.end());
    s.variances.assign(pred.variance.begin(), pred.variance.end());

    const auto loo = gp::loo_predictive(model);
    s.train_times = series.times;
    s.loo_means.assign(loo.mean.begin(), loo.mean.end());
    s.loo_variances.assign(loo.variance.begin(), loo.variance.end());

    if (cfg.backtest_horizon > 0) {
        for (MonthIndex t : series.times) {
            BacktestPoint b;
            b.target = t;
            b.origin = t - backtest_lead(series.task_id, t, cfg.backtest_horizon);
            const MonthIndex target[] = {t};
            const auto pred = predict_from_origin(model, b.origin, target);
            b.mean = pred.mean(0);
            b.variance = pred.variance(0);
            s.backtest.push_back(std::move(b));
        }
    }

    std::vector<double> fitted;
    if (cfg.mpe_mode == MpeMode::LeaveOneOut) {
        fitted = s.loo_means;
    } else {
        for (MonthIndex m : series.times) fitted.push_back(s.means[s.index_of(m)]);
    }
    s.train_mpe = mpe(series.loads, fitted);
    return {std::move(model), std::move(s)};
}

}  // namespace

TaskFit fit_task_gp(const TaskSeries& series, std::span<const MonthIndex> horizon, const TaskStageConfig& cfg) {
    check_series(series);
    auto opt = cfg.opt;
    opt.seed = task_seed(cfg.opt.seed, series.task_id);
    const gp::Vector y = Eigen::Map<const gp::Vector>(series.loads.data(), static_cast<Eigen::Index>(series.loads.size()));
    try {
        return summarize(series, horizon, gp::fit(cfg.kernel, month_inputs(series.times), y, opt), cfg);
    } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite("task '" + series.task_id + "': " + e.what());
    }
}

TaskFit condition_task_gp(const TaskSeries& series, std::span<const MonthIndex> horizon,
                          const kernels::KernelSpec& kernel, const gp::GPHyperparams& hyper,
                          const TaskStageConfig& cfg) {
    check_series(series);
    const gp::Vector y = Eigen::Map<const gp::Vector>(series.loads.data(), static_cast<Eigen::Index>(series.loads.size()));
    auto model = gp::GPModel::condition(kernel.with_log_params(hyper.kernel_log_params), hyper.log_noise,
                                        month_inputs(series.times), y);
    return summarize(series, horizon, std::move(model), cfg);
}

std::vector<TaskFit> fit_all_tasks(const data::PanelDataset& train, std::span<const MonthIndex> horizon,
                                   const TaskStageConfig& cfg) {
    std::vector<const TaskSeries*> order;
    for (const auto& t : train.tasks) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->task_id < b->task_id; });
    std::vector<TaskFit> out;
    out.reserve(order.size());
    for (const auto* t : order) out.push_back(fit_task_gp(*t, horizon, cfg));
    return out;
}

GateResult apply_gate(const std::vector<PosteriorSummary>& summaries, const StackingGate& gate) {
    if (!std::isfinite(gate.tau) || gate.tau < 0.0) throw ConfigError("tau must be a finite non-negative number");
    GateResult r;
    for (const auto& s : summaries) (s.train_mpe < gate.tau ? r.passed : r.rejected).push_back(s);
    return r;
}

}  // namespace stackgp::task_stage

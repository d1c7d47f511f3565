#include "stackgp/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "stackgp/errors.hpp"

namespace stackgp::baselines {

namespace {

std::vector<double> differences(std::span<const double> x) {
    std::vector<double> d;
    for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
    return d;
}

}  // namespace

bool is_stationary(const ARModel& model) {
    const auto p = static_cast<Eigen::Index>(model.coefficients.size());
    if (p == 0) return true;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index k = 0; k < p; ++k) companion(0, k) = model.coefficients[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 1; k < p; ++k) companion(k, k - 1) = 1.0;
    return companion.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
}

ARModel fit_ar(std::span<const double> series, int order, bool difference) {
    if (order < 1) throw ConfigError("AR order must be >= 1");
    std::vector<double> work(series.begin(), series.end());
    if (difference) work = differences(series);
    const auto n = static_cast<int>(work.size());
    if (n <= order + 1)
        throw TooFewPoints("AR(" + std::to_string(order) + ") needs more than " + std::to_string(order + 1) +
                           " points, got " + std::to_string(n));

    const int rows = n - order;
    Eigen::MatrixXd x(rows, order);
    Eigen::VectorXd y(rows);
    for (int t = order; t < n; ++t) {
        y(t - order) = work[static_cast<std::size_t>(t)];
        for (int k = 1; k <= order; ++k) x(t - order, k - 1) = work[static_cast<std::size_t>(t - k)];
    }
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;
    const Eigen::VectorXd phi = xc.completeOrthogonalDecomposition().solve(yc);

    ARModel m;
    m.order = order;
    m.differenced = difference;
    m.coefficients.assign(phi.data(), phi.data() + order);
    m.intercept = y_mean - x_mean.dot(phi);
    m.residual_variance = (yc - xc * phi).squaredNorm() / std::max(rows - order - 1, 1);
    return m;
}

ARForecast forecast_ar_dist(const ARModel& model, std::span<const double> history, int horizon) {
    const std::size_t need = static_cast<std::size_t>(model.order) + (model.differenced ? 1 : 0);
    if (history.size() < need)
        throw TooFewPoints("forecast needs " + std::to_string(need) + " history points, got " +
                           std::to_string(history.size()));
    ARForecast out;
    if (horizon <= 0) return out;

    std::vector<double> lags(history.begin(), history.end());
    if (model.differenced) lags = differences(history);
    const auto p = static_cast<std::size_t>(model.order);
    std::vector<double> path;
    for (int h = 0; h < horizon; ++h) {
        double v = model.intercept;
        for (std::size_t k = 1; k <= p; ++k) v += model.coefficients[k - 1] * lags[lags.size() - k];
        lags.push_back(v);
        path.push_back(v);
    }

    // psi_0 = 1, psi_j = sum_k phi_k psi_{j-k}
    std::vector<double> psi(static_cast<std::size_t>(horizon), 0.0);
    psi[0] = 1.0;
    for (std::size_t j = 1; j < psi.size(); ++j)
        for (std::size_t k = 1; k <= std::min(j, p); ++k) psi[j] += model.coefficients[k - 1] * psi[j - k];
    if (model.differenced)
        for (std::size_t j = 1; j < psi.size(); ++j) psi[j] += psi[j - 1];

    double level = history.back(), acc = 0.0;
    for (int h = 0; h < horizon; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        if (model.differenced) {
            level += path[hs];
            out.mean.push_back(level);
        } else {
            out.mean.push_back(path[hs]);
        }
        acc += psi[hs] * psi[hs];
        out.variance.push_back(model.residual_variance * acc);
    }
    return out;
}

std::vector<double> forecast_ar(const ARModel& model, std::span<const double> history, int horizon) {
    return forecast_ar_dist(model, history, horizon).mean;
}

ARTaskFit fit_ar_task(const data::TaskSeries& task, MonthIndex end, const ARConfig& cfg) {
    if (cfg.order < 1) throw ConfigError("AR order must be >= 1");
    if (task.times.empty()) throw EmptyInput("task '" + task.task_id + "' has no training months");
    ARTaskFit fit;
    fit.task_id = task.task_id;
    fit.end = end;
    for (double v : task.loads) fit.mean += v;
    fit.mean /= static_cast<double>(task.loads.size());
    for (MonthIndex m = task.times.front(); m <= end; ++m) fit.history.push_back(task.load_at(m).value_or(fit.mean));

    // Keep at least as many residual degrees of freedom as coefficients.
    const int usable = static_cast<int>(fit.history.size()) - (cfg.difference ? 1 : 0);
    for (int order = std::min(cfg.order, (usable - 1) / 2); order >= 1; --order) {
        auto model = fit_ar(fit.history, order, cfg.difference);
        if (!is_stationary(model)) continue;
        fit.model = std::move(model);
        break;
    }
    if (!fit.model) {
        for (double v : fit.history) fit.variance += (v - fit.mean) * (v - fit.mean);
        fit.variance = fit.history.size() > 1 ? fit.variance / static_cast<double>(fit.history.size() - 1)
                                              : fit.mean * fit.mean;
    }
    return fit;
}

Forecasts forecast_ar_task(const ARTaskFit& fit, std::span<const MonthIndex> horizon) {
    Forecasts out;
    if (horizon.empty()) return out;
    const int max_h = *std::max_element(horizon.begin(), horizon.end()) - fit.end;
    ARForecast f;
    if (max_h > 0) {
        if (fit.model) {
            f = forecast_ar_dist(*fit.model, fit.history, max_h);
        } else {
            f.mean.assign(static_cast<std::size_t>(max_h), fit.mean);
            f.variance.assign(f.mean.size(), fit.variance);
        }
    }
    for (MonthIndex m : horizon) {
        const int h = m - fit.end;
        if (h < 1 || h > max_h)
            throw ConfigError("AR horizon month " + format_month(m) + " is not after " + format_month(fit.end));
        const auto i = static_cast<std::size_t>(h - 1);
        const double sd = std::sqrt(std::max(f.variance[i], 0.0));
        out.push_back({fit.task_id, m, f.mean[i], f.variance[i], f.mean[i] - 1.96 * sd, f.mean[i] + 1.96 * sd});
    }
    return out;
}

Forecasts run_ar_baseline(const data::PanelDataset& train, std::span<const MonthIndex> horizon, const ARConfig& cfg) {
    Forecasts out;
    if (horizon.empty()) return out;
    if (cfg.order < 1) throw ConfigError("AR order must be >= 1");
    for (const auto& t : train.tasks) {
        if (t.times.empty()) continue;
        const auto f = forecast_ar_task(fit_ar_task(t, train.split ? train.split->train_end : t.times.back(), cfg), horizon);
        out.insert(out.end(), f.begin(), f.end());
    }
    sort_forecasts(out);
    return out;
}

Forecasts task_gp_forecasts(const std::vector<task_stage::TaskFit>& fits, std::span<const MonthIndex> horizon) {
    Forecasts out;
    for (const auto& fit : fits) {
        const auto& s = fit.summary;
        for (MonthIndex m : horizon) {
            const auto i = s.index_of(m);
            const double sd = std::sqrt(s.variances[i]);
            out.push_back({s.task_id, m, s.means[i], s.variances[i], s.means[i] - 1.96 * sd, s.means[i] + 1.96 * sd});
        }
    }
    sort_forecasts(out);
    return out;
}

Forecasts run_task_gp_baseline(const data::PanelDataset& train, std::span<const MonthIndex> horizon,
                               const task_stage::TaskStageConfig& cfg) {
    if (horizon.empty()) return {};
    return task_gp_forecasts(task_stage::fit_all_tasks(train, horizon, cfg), horizon);
}

}  // namespace stackgp::baselines

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stackgp/data.hpp"
#include "stackgp/forecast.hpp"
#include "stackgp/task_stage.hpp"

namespace stackgp::baselines {

struct ARModel {
    int order = 0;
    std::vector<double> coefficients;  // phi_1 .. phi_order
    double intercept = 0.0;
    double residual_variance = 0.0;
    /// Fitted to first differences; forecasts are integrated back.
    bool differenced = false;
};

/// Least-squares AR(order) with intercept. Collinear regressors get the
/// minimum-norm coefficient vector. Needs length > order + 1. The residual
/// variance divides by the residual degrees of freedom (at least 1).
ARModel fit_ar(std::span<const double> series, int order, bool difference = false);

/// True when every root of the AR characteristic polynomial lies outside
/// the unit circle.
bool is_stationary(const ARModel& model);

/// Iterated multi-step point forecast; predictions are fed back as lags.
std::vector<double> forecast_ar(const ARModel& model, std::span<const double> history, int horizon);

/// Point forecast plus forecast-error variance from the MA(infinity) weights.
struct ARForecast {
    std::vector<double> mean;
    std::vector<double> variance;
};
ARForecast forecast_ar_dist(const ARModel& model, std::span<const double> history, int horizon);

struct ARConfig {
    int order = 12;
    bool difference = false;
};

/// One task's AR baseline: the fitted model, or the mean fallback when no
/// stationary fit exists.
struct ARTaskFit {
    std::string task_id;
    MonthIndex end = 0;               // last training month
    std::vector<double> history;      // contiguous months up to `end`, gaps filled
    std::optional<ARModel> model;
    double mean = 0.0;
    double variance = 0.0;
};

ARTaskFit fit_ar_task(const data::TaskSeries& task, MonthIndex end, const ARConfig& cfg);
Forecasts forecast_ar_task(const ARTaskFit& fit, std::span<const MonthIndex> horizon);

/// Per-task AR forecasts over `horizon` (months after the training window).
/// Gaps inside a task's history are filled with its training mean and the
/// order is capped at (length - 1) / 2 so short histories are not fit exactly.
/// Non-stationary fits step down one order at a time; with none left the
/// forecast is the training mean with the sample variance.
Forecasts run_ar_baseline(const data::PanelDataset& train, std::span<const MonthIndex> horizon, const ARConfig& cfg);

/// Stage-1 GPs used directly as forecasters.
Forecasts run_task_gp_baseline(const data::PanelDataset& train, std::span<const MonthIndex> horizon,
                               const task_stage::TaskStageConfig& cfg);

/// Same, from already fitted stage-1 tasks.
Forecasts task_gp_forecasts(const std::vector<task_stage::TaskFit>& fits, std::span<const MonthIndex> horizon);

}  // namespace stackgp::baselines

#pragma once

#include <span>
#include <string>
#include <vector>

#include "stackgp/data.hpp"
#include "stackgp/gp.hpp"

namespace stackgp::task_stage {

using data::TaskSeries;

/// Which stage-1 predictions the training MPE is computed from.
enum class MpeMode {
    LeaveOneOut,  // predictive mean at each training month with that month held out
    InSample,     // posterior mean at the training months
};

std::string to_string(MpeMode mode);
MpeMode parse_mpe_mode(std::string_view name);

/// sigma^2 periodic + unit SE with a shared lengthscale and a 12-month period.
kernels::KernelSpec default_task_kernel();

struct TaskStageConfig {
    kernels::KernelSpec kernel = default_task_kernel();
    gp::OptConfig opt = default_opt();
    MpeMode mpe_mode = MpeMode::LeaveOneOut;
    /// Longest pseudo-forecast lead used for backtest points (0 disables them).
    int backtest_horizon = 12;

    static gp::OptConfig default_opt() {
        gp::OptConfig o;
        o.freeze_period = true;
        return o;
    }
};

/// Stage-1 prediction for a training month made from an earlier origin: the
/// fitted model conditioned only on the task's months up to `origin`.
struct BacktestPoint {
    MonthIndex origin = 0;
    MonthIndex target = 0;
    double mean = 0.0;
    double variance = 0.0;

    bool operator==(const BacktestPoint&) const = default;
};

/// Pseudo-forecast lead for a training month, uniform on 1..max_lead and
/// determined by (task_id, month) alone.
int backtest_lead(const std::string& task_id, MonthIndex target, int max_lead);

/// Stage-1 predictive summary of one task.
struct PosteriorSummary {
    std::string task_id;
    std::vector<MonthIndex> eval_times;
    std::vector<double> means;
    std::vector<double> variances;  // include observation noise, so strictly positive
    double train_mpe = 0.0;
    /// Leave-one-out predictive mean and variance at each training month,
    /// in the order of the task's training months.
    std::vector<MonthIndex> train_times;
    std::vector<double> loo_means;
    std::vector<double> loo_variances;
    /// One per training month when backtesting is enabled.
    std::vector<BacktestPoint> backtest;

    /// Index of month m in eval_times; throws MissingCovariate if absent.
    std::size_t index_of(MonthIndex m) const;
};

struct TaskFit {
    gp::GPModel model;
    PosteriorSummary summary;
};

/// Mean absolute percentage error: mean of min(10, |a-p| / max(|a|, eps))
/// with eps = 1e-6 * mean|a|.
double mpe(std::span<const double> actual, std::span<const double> predicted);
inline constexpr double kMpeTermCap = 10.0;

/// Seed for a task's optimizer restarts, independent of task order.
std::uint64_t task_seed(std::uint64_t base, const std::string& task_id);

/// Fits a 1-D GP on the task's (month, load) pairs. `series` must hold only
/// training months; the summary covers those months plus `horizon`.
TaskFit fit_task_gp(const TaskSeries& series, std::span<const MonthIndex> horizon, const TaskStageConfig& cfg);

/// Rebuilds a task fit from stored hyperparameters without optimizing.
TaskFit condition_task_gp(const TaskSeries& series, std::span<const MonthIndex> horizon,
                          const kernels::KernelSpec& kernel, const gp::GPHyperparams& hyper,
                          const TaskStageConfig& cfg);

/// Predictive distribution at `months` from the fitted model's hyperparameters
/// and target standardization, conditioned only on training points with
/// month <= origin. With no such points this is the prior.
gp::PredictiveDist predict_from_origin(const gp::GPModel& model, MonthIndex origin, std::span<const MonthIndex> months);

/// Fits every task in the panel, ordered by task_id.
std::vector<TaskFit> fit_all_tasks(const data::PanelDataset& train, std::span<const MonthIndex> horizon,
                                   const TaskStageConfig& cfg);

struct StackingGate {
    double tau = 1.0;
};

struct GateResult {
    std::vector<PosteriorSummary> passed;
    std::vector<PosteriorSummary> rejected;
};

/// Partitions by train_mpe < tau (strict). Throws ConfigError if tau is
/// negative or not finite.
GateResult apply_gate(const std::vector<PosteriorSummary>& summaries, const StackingGate& gate);

}  // namespace stackgp::task_stage

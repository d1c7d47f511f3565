#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stackgp/data.hpp"
#include "stackgp/forecast.hpp"
#include "stackgp/gp.hpp"
#include "stackgp/task_stage.hpp"

namespace stackgp::stacking {

using task_stage::PosteriorSummary;

/// Source of the stage-1 columns (and of lags past the origin) in training rows.
enum class TrainStage1 {
    /// Pseudo-forecast from a per-row origin before the target month; the
    /// horizon column then counts months from that origin.
    Backtest,
    LeaveOneOut,
    Posterior,
};

std::string to_string(TrainStage1 s);
TrainStage1 parse_train_stage1(const std::string& s);

struct LayoutConfig {
    /// Lagged load months before the target month.
    int p = 12;
    /// Carry the stage-1 predictive variance (as a log) next to the mean.
    bool include_variance = true;
    bool include_stage1 = true;
    bool include_weather = true;
    bool include_demographics = true;
    /// One-hot encode the task's region alongside the demographic fields.
    bool include_region = true;
    /// Training rows need at least this many observed lag months.
    int min_history = 0;
    TrainStage1 train_stage1 = TrainStage1::Backtest;
};

/// Identifies a feature row.
struct RowKey {
    std::string task_id;
    MonthIndex month = 0;
    bool operator==(const RowKey&) const = default;
};

/// Column layout plus the training-set standardization of every column.
struct FeatureLayout {
    std::vector<std::pair<std::string, std::size_t>> groups;  // name, column count
    std::vector<std::string> columns;
    std::vector<double> center;
    std::vector<double> scale;
    /// Category levels used for one-hot columns, keyed by field name.
    std::map<std::string, std::vector<std::string>> levels;

    std::size_t dim() const { return columns.size(); }
    bool operator==(const FeatureLayout&) const = default;
};

struct FeatureSet {
    FeatureLayout layout;
    std::vector<RowKey> train_keys;
    gp::Inputs train_raw;
    gp::Inputs train_x;  // standardized
    gp::Vector train_y;
    std::vector<RowKey> test_keys;
    gp::Inputs test_raw;
    gp::Inputs test_x;
};

/// Assembles stage-2 rows. Training rows come from the training months of
/// the tasks in `passed`; test rows cover every task over `horizon`.
/// Weather for test months is read from the panel's weather table.
FeatureSet build_features(const data::PanelDataset& train, const std::vector<PosteriorSummary>& summaries,
                          const std::set<std::string>& passed, std::span<const MonthIndex> horizon,
                          const LayoutConfig& cfg);

struct StackKernelConfig {
    double signal_variance = 1.0;
    /// Initial per-group lengthscale is this times sqrt(column count).
    double lengthscale = 1.0;
    /// Column kernels for named groups; others use a unit-amplitude SE.
    std::map<std::string, kernels::KernelSpec> group_kernels;
};

kernels::FeatureGroupKernel make_stack_kernel(const FeatureLayout& layout, const StackKernelConfig& cfg);

struct StackedModel {
    gp::GPModel ensemble;
    FeatureLayout layout;
    task_stage::StackingGate gate;
    std::map<std::string, PosteriorSummary> stage1;
};

/// Fits the ensemble GP on standardized training rows. Throws
/// NoTrainableTasks when there are fewer than two rows.
gp::GPModel fit_stacked(const gp::Inputs& train_x, const gp::Vector& targets, const FeatureLayout& layout,
                        const StackKernelConfig& kernel_cfg, const gp::OptConfig& opt);

/// Predictions for standardized test rows in consumption units.
Forecasts predict_stacked(const StackedModel& model, const std::vector<RowKey>& keys, const gp::Inputs& test_x);

}  // namespace stackgp::stacking

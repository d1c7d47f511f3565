#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "stackgp/baselines.hpp"
#include "stackgp/data.hpp"
#include "stackgp/gp.hpp"
#include "stackgp/kernels.hpp"
#include "stackgp/stacking.hpp"
#include "stackgp/task_stage.hpp"

namespace stackgp::config {

using nlohmann::json;

enum class Method { Stacked, TaskGp, AR };

std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Builds a kernel from its JSON description, e.g.
///   {"type": "tied_locally_periodic", "amplitude": 1, "lengthscale": 3, "period": 12}
///   {"type": "sum", "terms": [{"type": "se", ...}, {"type": "periodic", ...}]}
/// An optional "frozen" array lists parameter-name suffixes to hold fixed.
kernels::KernelSpec kernel_from_json(const json& j);

struct CsvSources {
    std::filesystem::path readings;
    std::filesystem::path weather;
    std::filesystem::path demographics;
    std::vector<std::string> extra_categorical;
    std::vector<std::string> extra_numeric;
};

struct Stage1Config {
    json kernel = {{"type", "tied_locally_periodic"}, {"amplitude", 1.0}, {"lengthscale", 3.0}, {"period", 12.0}};
    gp::OptConfig opt = task_stage::TaskStageConfig::default_opt();
    task_stage::MpeMode mpe_mode = task_stage::MpeMode::LeaveOneOut;
    /// Longest backtest lead; when unset, the forecast horizon length.
    std::optional<int> backtest_horizon;
};

struct Stage2Config {
    double signal_variance = 1.0;
    double lengthscale = 1.0;
    std::map<std::string, json> group_kernels;
    gp::OptConfig opt = default_stage2_opt();

    static gp::OptConfig default_stage2_opt() {
        gp::OptConfig o;
        o.restarts = 2;
        o.max_opt_rows = 400;
        return o;
    }
    stacking::StackKernelConfig kernel_config() const;
};

struct PipelineConfig {
    std::optional<data::SynthConfig> synth;
    std::optional<std::filesystem::path> panel;
    std::optional<CsvSources> csv;

    std::optional<MonthIndex> train_end;
    std::optional<MonthIndex> test_end;

    Stage1Config stage1;
    Stage2Config stage2;
    double tau = 1.0;
    stacking::LayoutConfig layout;
    baselines::ARConfig ar;
    Method method = Method::Stacked;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
};

/// Parses and validates a config document. Relative data paths are resolved
/// against `base_dir`. Unknown keys are rejected.
PipelineConfig from_json(const json& j, const std::filesystem::path& base_dir = {});
json to_json(const PipelineConfig& cfg);
PipelineConfig load(const std::filesystem::path& path);

/// Throws ConfigError unless exactly one data source is set and every
/// numeric field is in range.
void validate(const PipelineConfig& cfg);

/// Stage-1 settings with the pipeline seed and backtest horizon applied.
task_stage::TaskStageConfig stage1_settings(const PipelineConfig& cfg, int horizon_months);

}  // namespace stackgp::config

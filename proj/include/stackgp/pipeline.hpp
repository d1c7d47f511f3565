#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackgp/config.hpp"
#include "stackgp/data.hpp"
#include "stackgp/forecast.hpp"
#include "stackgp/metrics.hpp"

namespace stackgp::pipeline {

using nlohmann::json;

inline constexpr int kArtifactVersion = 1;

/// Loads (or generates) the dataset named by the config's data source.
data::PanelDataset load_dataset(const config::PipelineConfig& cfg);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string dataset_hash(const data::PanelDataset& panel);

/// Training boundary and default horizon. Config values win over the
/// dataset's own split; ConfigError when neither gives one.
struct Window {
    MonthIndex train_end = 0;
    MonthIndex test_end = 0;
    int months() const { return test_end - train_end; }
};
Window resolve_window(const config::PipelineConfig& cfg, const data::PanelDataset& panel);

/// Tasks truncated to months <= train_end; tasks left empty are dropped.
data::PanelDataset training_view(const data::PanelDataset& panel, const Window& window);

struct GateDecision {
    std::string task_id;
    double mpe = 0.0;
    bool passed = false;
};

struct TaskHyper {
    std::string task_id;
    std::vector<double> kernel_log_params;
    double log_noise = 0.0;
};

struct Stage2Record {
    std::vector<std::pair<std::string, std::size_t>> groups;
    std::vector<std::string> columns;
    std::vector<double> kernel_log_params;
    double log_noise = 0.0;
    double nlml = 0.0;
    std::size_t train_rows = 0;
};

struct ARRecord {
    std::string task_id;
    int order = 0;  // 0: mean fallback
    std::vector<double> coefficients;
    double intercept = 0.0;
    double residual_variance = 0.0;
};

/// Everything `forecast` needs besides the dataset itself.
struct Artifact {
    int version = kArtifactVersion;
    config::PipelineConfig config;
    std::string dataset_hash;
    Window window;
    std::vector<TaskHyper> stage1;
    std::vector<GateDecision> gate;
    std::optional<Stage2Record> stage2;
    std::vector<ARRecord> ar;
};

json to_json(const Artifact& a);
Artifact artifact_from_json(const json& j);

Artifact fit(const config::PipelineConfig& cfg, const data::PanelDataset& panel);

/// Forecasts for the months after the training window. `horizon_months`
/// defaults to the window's test span. Throws ArtifactMismatch when the
/// dataset is not the one the artifact was fit on.
Forecasts forecast(const Artifact& artifact, const data::PanelDataset& panel,
                   std::optional<int> horizon_months = std::nullopt);

/// Joins forecasts to actual loads on (task_id, month); every forecast row
/// needs an actual or JoinError is thrown.
metrics::EvalReport evaluate(const Forecasts& forecasts, const data::PanelDataset& actuals);
json report_to_json(const metrics::EvalReport& report);

std::string forecasts_to_csv(const Forecasts& forecasts);
Forecasts forecasts_from_csv(const std::string& text);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace stackgp::pipeline

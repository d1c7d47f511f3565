#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "stackgp/calendar.hpp"

namespace stackgp::data {

using Rational = boost::multiprecision::cpp_rational;

enum class Unit { MJ, kWh };
std::string to_string(Unit u);
Unit parse_unit(std::string_view tag);

struct WeatherRow {
    double mean_temp_c = 0.0;
    double hdd = 0.0;
    double cdd = 0.0;

    bool operator==(const WeatherRow&) const = default;
};

/// region -> month -> weather
using WeatherTable = std::map<std::string, std::map<MonthIndex, WeatherRow>>;

using DemographicValue = std::variant<double, std::string>;

enum class FieldKind { Categorical, Numeric };

struct DemographicField {
    std::string name;
    FieldKind kind;

    bool operator==(const DemographicField&) const = default;
};

/// One household: monthly loads at strictly increasing months, weather rows
/// aligned with `times` (nullopt where the weather table has no entry), and
/// static demographic fields.
struct TaskSeries {
    std::string task_id;
    std::string region;
    std::vector<MonthIndex> times;
    std::vector<double> loads;
    std::vector<std::optional<WeatherRow>> weather;
    std::map<std::string, DemographicValue> demographics;

    bool operator==(const TaskSeries&) const = default;

    /// Load at month m, if observed.
    std::optional<double> load_at(MonthIndex m) const;
};

/// Inclusive month boundaries: training months are <= train_end, test months
/// are in (train_end, test_end].
struct SplitSpec {
    MonthIndex train_end = 0;
    MonthIndex test_end = 0;

    bool operator==(const SplitSpec&) const = default;
    int horizon() const { return test_end - train_end; }
};

struct PanelDataset {
    std::vector<TaskSeries> tasks;
    WeatherTable weather;
    Unit unit = Unit::MJ;
    std::string frequency = "monthly";
    std::vector<DemographicField> fields;
    std::optional<SplitSpec> split;
    nlohmann::json provenance = nlohmann::json::object();

    bool operator==(const PanelDataset&) const = default;

    const TaskSeries& task(const std::string& id) const;
};

/// Checks task-id uniqueness, strictly increasing months, non-negative loads
/// and weather alignment; throws SchemaError.
void validate(const PanelDataset& panel);

/// Re-derives every task's aligned weather rows from the panel's table.
void align_weather(PanelDataset& panel);

// ---------------------------------------------------------------------------
// Disaggregation

struct BillingInterval {
    std::chrono::sys_days start;
    std::chrono::sys_days end;  // inclusive
    double total = 0.0;
};

struct MonthlyAmount {
    MonthIndex month = 0;
    Rational exact;          // sum of daily-average * overlap-days, exact
    double value = 0.0;      // exact converted to double
    int covered_days = 0;
    int days_in_month = 0;
    bool missing = false;    // no interval overlaps this month
};

/// Spreads each interval's total uniformly over its days (end inclusive) and
/// sums per calendar month. Returns every month from the first to the last
/// overlapped one. Arithmetic is exact, so the monthly amounts sum to the
/// interval totals with no rounding.
std::vector<MonthlyAmount> disaggregate_quarterly(std::vector<BillingInterval> intervals);

// ---------------------------------------------------------------------------
// Ingestion

struct IngestOptions {
    /// Demographic columns beyond the fixed ones (income_band categorical,
    /// num_rooms numeric).
    std::vector<std::string> extra_categorical;
    std::vector<std::string> extra_numeric;
    /// Months only partly covered by billing intervals are dropped.
    bool drop_partial_months = true;
};

PanelDataset ingest_csv(const std::filesystem::path& readings, const std::filesystem::path& weather,
                        const std::filesystem::path& demographics, const IngestOptions& options = {});

// ---------------------------------------------------------------------------
// Split

struct SplitViews {
    PanelDataset train;
    PanelDataset test;
};

/// Month-indexed partition. Tasks with no training months are absent from the
/// training view.
SplitViews split(const PanelDataset& panel, MonthIndex train_end, MonthIndex test_end);

// ---------------------------------------------------------------------------
// Synthetic panels

struct SynthConfig {
    int n_tasks = 200;
    MonthIndex start = month_index(2013, 1);
    MonthIndex train_end = month_index(2015, 12);
    int test_months = 12;
    /// Each task's training history is drawn uniformly from this range and
    /// ends at train_end (clipped to the months after `start`).
    int min_train_months = 6;
    int max_train_months = 12;
    std::vector<std::string> regions{"VIC", "NSW"};

    double base_load = 1200.0;
    double income_effect = 150.0;          // per income band step (low=0, mid=1, high=2)
    double rooms_effect = 100.0;           // per room
    double base_spread = 0.05;             // lognormal sd of idiosyncratic base
    /// Seasonal amplitude as a fraction of the task's base load, so summer
    /// loads stay positive.
    double seasonal_amplitude = 0.6;
    double amplitude_rooms_effect = 0.05;  // change in the fraction per room above 4
    double amplitude_spread = 0.1;         // lognormal sd of idiosyncratic amplitude
    int peak_month = 7;                    // shared seasonal peak (month of year)
    double phase_jitter = 0.0;             // sd (months) of per-task phase shift
    double hdd_coupling = 2.0;             // load per heating degree day
    double cdd_coupling = 1.0;             // load per cooling degree day
    double weather_anomaly_sd = 1.5;       // sd of monthly temperature anomalies (C)
    double noise_level = 60.0;             // sd of observation noise (load units)
    double hdd_base_temp = 18.0;
    Unit unit = Unit::MJ;
    std::uint64_t seed = 42;
};

/// Per-task generating parameters recorded in provenance.
struct TaskTruth {
    std::string task_id;
    double base = 0.0;
    double amplitude = 0.0;
    double phase_shift = 0.0;
};

/// Noise-free load of a task at month m given that month's weather.
double synthetic_signal(const SynthConfig& cfg, const TaskTruth& truth, MonthIndex m, const WeatherRow& weather);

/// Regional climatology used to compute weather anomalies.
WeatherRow climatology(const SynthConfig& cfg, const std::string& region, MonthIndex m);

/// Throws ConfigError on an invalid configuration.
void validate(const SynthConfig& cfg);
nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
SynthConfig synth_config_from_json(const nlohmann::json& j);

PanelDataset generate_synthetic(const SynthConfig& cfg);
/// Generating parameters recorded in a synthetic panel's provenance.
std::vector<TaskTruth> synthetic_truth(const PanelDataset& panel);
SynthConfig synthetic_config(const PanelDataset& panel);

/// Degree days for a month with the given mean temperature.
WeatherRow degree_days(double mean_temp_c, int days, double base_temp);

/// Permutes the training-window loads of `count` tasks (chosen by seed).
/// Returns the ids of the corrupted tasks.
std::vector<std::string> shuffle_task_loads(PanelDataset& panel, MonthIndex train_end, int count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kPanelSchemaVersion = 1;

nlohmann::json to_json(const PanelDataset& panel);
PanelDataset panel_from_json(const nlohmann::json& j);

std::string serialize_panel(const PanelDataset& panel);
PanelDataset parse_panel(const std::string& text);

void write_panel(const std::filesystem::path& path, const PanelDataset& panel);
PanelDataset read_panel(const std::filesystem::path& path);

}  // namespace stackgp::data

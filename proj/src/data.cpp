#include "stackgp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "stackgp/csv.hpp"
#include "stackgp/errors.hpp"

namespace stackgp::data {

using nlohmann::json;

std::string to_string(Unit u) { return u == Unit::MJ ? "MJ" : "kWh"; }

Unit parse_unit(std::string_view tag) {
    if (tag == "MJ") return Unit::MJ;
    if (tag == "kWh") return Unit::kWh;
    throw UnitError("unknown unit tag '" + std::string(tag) + "'");
}

std::optional<double> TaskSeries::load_at(MonthIndex m) const {
    const auto it = std::lower_bound(times.begin(), times.end(), m);
    if (it == times.end() || *it != m) return std::nullopt;
    return loads[static_cast<std::size_t>(it - times.begin())];
}

const TaskSeries& PanelDataset::task(const std::string& id) const {
    for (const auto& t : tasks)
        if (t.task_id == id) return t;
    throw JoinError("unknown task_id '" + id + "'");
}

void validate(const PanelDataset& panel) {
    std::set<std::string> ids;
    for (const auto& t : panel.tasks) {
        if (!ids.insert(t.task_id).second) throw SchemaError("duplicate task_id '" + t.task_id + "'");
        if (t.loads.size() != t.times.size() || t.weather.size() != t.times.size())
            throw SchemaError("task '" + t.task_id + "': times, loads and weather differ in length");
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            if (i > 0 && t.times[i] <= t.times[i - 1])
                throw SchemaError("task '" + t.task_id + "': months not strictly increasing at " +
                                  format_month(t.times[i]));
            if (!std::isfinite(t.loads[i]) || t.loads[i] < 0.0)
                throw SchemaError("task '" + t.task_id + "': invalid load at " + format_month(t.times[i]));
        }
    }
}

void align_weather(PanelDataset& panel) {
    for (auto& t : panel.tasks) {
        t.weather.assign(t.times.size(), std::nullopt);
        const auto region = panel.weather.find(t.region);
        if (region == panel.weather.end()) continue;
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            const auto row = region->second.find(t.times[i]);
            if (row != region->second.end()) t.weather[i] = row->second;
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<MonthlyAmount> disaggregate_quarterly(std::vector<BillingInterval> intervals) {
    using std::chrono::days;
    if (intervals.empty()) return {};
    for (const auto& iv : intervals) {
        if (iv.end < iv.start)
            throw InvalidInterval("interval " + format_date(iv.start) + ".." + format_date(iv.end) +
                                  " ends before it starts");
        if (!std::isfinite(iv.total)) throw InvalidInterval("non-finite total");
        if (iv.total < 0.0)
            throw NegativeTotal("interval " + format_date(iv.start) + ".." + format_date(iv.end) + " has total " +
                                csv::format_double(iv.total));
    }
    std::sort(intervals.begin(), intervals.end(),
              [](const BillingInterval& a, const BillingInterval& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < intervals.size(); ++i) {
        if (intervals[i].start <= intervals[i - 1].end)
            throw OverlapError("interval starting " + format_date(intervals[i].start) + " overlaps interval ending " +
                               format_date(intervals[i - 1].end));
    }

    const MonthIndex first = month_of(intervals.front().start);
    const MonthIndex last = month_of(intervals.back().end);
    std::vector<MonthlyAmount> out(static_cast<std::size_t>(last - first + 1));
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].month = first + static_cast<MonthIndex>(k);
        out[k].days_in_month = days_in_month(out[k].month);
        out[k].missing = true;
    }

    for (const auto& iv : intervals) {
        const long total_days = (iv.end - iv.start).count() + 1;
        const Rational daily = Rational(iv.total) / total_days;
        for (MonthIndex m = month_of(iv.start); m <= month_of(iv.end); ++m) {
            const auto month_start = first_day(m);
            const auto month_end = first_day(m + 1) - days{1};
            const auto lo = std::max(month_start, iv.start);
            const auto hi = std::min(month_end, iv.end);
            const long overlap = (hi - lo).count() + 1;
            auto& slot = out[static_cast<std::size_t>(m - first)];
            slot.exact += daily * overlap;
            slot.covered_days += static_cast<int>(overlap);
            slot.missing = false;
        }
    }
    for (auto& slot : out) slot.value = slot.exact.convert_to<double>();
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string row_context(const std::string& file, std::size_t row) { return file + " row " + std::to_string(row + 2); }

}  // namespace

PanelDataset ingest_csv(const std::filesystem::path& readings, const std::filesystem::path& weather,
                        const std::filesystem::path& demographics, const IngestOptions& options) {
    PanelDataset panel;

    const auto wt = csv::read(weather);
    const auto w_region = wt.column("region"), w_month = wt.column("month"), w_temp = wt.column("mean_temp_c"),
               w_hdd = wt.column("hdd"), w_cdd = wt.column("cdd");
    for (std::size_t r = 0; r < wt.rows.size(); ++r) {
        const auto& row = wt.rows[r];
        const auto ctx = row_context(weather.filename().string(), r);
        WeatherRow w{csv::parse_double(row[w_temp], ctx), csv::parse_double(row[w_hdd], ctx),
                     csv::parse_double(row[w_cdd], ctx)};
        if (!panel.weather[row[w_region]].emplace(parse_month(row[w_month]), w).second)
            throw SchemaError(ctx + ": duplicate weather row for " + row[w_region] + " " + row[w_month]);
    }

    const auto dt = csv::read(demographics);
    const auto d_id = dt.column("task_id"), d_region = dt.column("region");
    std::vector<std::pair<std::string, FieldKind>> field_cols{{"income_band", FieldKind::Categorical},
                                                              {"num_rooms", FieldKind::Numeric}};
    for (const auto& c : options.extra_categorical) field_cols.emplace_back(c, FieldKind::Categorical);
    for (const auto& c : options.extra_numeric) field_cols.emplace_back(c, FieldKind::Numeric);
    std::map<std::string, TaskSeries> by_id;
    for (std::size_t r = 0; r < dt.rows.size(); ++r) {
        const auto& row = dt.rows[r];
        const auto ctx = row_context(demographics.filename().string(), r);
        TaskSeries t;
        t.task_id = row[d_id];
        t.region = row[d_region];
        for (const auto& [name, kind] : field_cols) {
            const auto& cell = row[dt.column(name)];
            if (kind == FieldKind::Numeric)
                t.demographics[name] = csv::parse_double(cell, ctx + " column " + name);
            else
                t.demographics[name] = cell;
        }
        if (t.task_id.empty()) throw SchemaError(ctx + ": empty task_id");
        if (!by_id.emplace(t.task_id, std::move(t)).second)
            throw SchemaError(ctx + ": duplicate task_id '" + row[d_id] + "'");
    }
    for (const auto& [name, kind] : field_cols) panel.fields.push_back({name, kind});

    const auto rt = csv::read(readings);
    const auto r_id = rt.column("task_id"), r_start = rt.column("period_start"), r_end = rt.column("period_end"),
               r_cons = rt.column("consumption"), r_unit = rt.column("unit");
    std::map<std::string, std::vector<BillingInterval>> intervals;
    std::optional<Unit> unit;
    for (std::size_t r = 0; r < rt.rows.size(); ++r) {
        const auto& row = rt.rows[r];
        const auto ctx = row_context(readings.filename().string(), r);
        const Unit u = parse_unit(row[r_unit]);
        if (unit && *unit != u) throw UnitError(ctx + ": mixed units " + to_string(*unit) + " and " + to_string(u));
        unit = u;
        if (!by_id.count(row[r_id])) throw JoinError("reading for task_id '" + row[r_id] + "' has no demographics");
        intervals[row[r_id]].push_back(
            {parse_date(row[r_start]), parse_date(row[r_end]), csv::parse_double(row[r_cons], ctx)});
    }
    if (!unit) throw EmptyInput("no readings in " + readings.string());
    panel.unit = *unit;

    for (auto& [id, ivs] : intervals) {
        auto& t = by_id.at(id);
        for (const auto& m : disaggregate_quarterly(ivs)) {
            if (m.missing) continue;
            if (options.drop_partial_months && m.covered_days < m.days_in_month) continue;
            t.times.push_back(m.month);
            t.loads.push_back(m.value);
        }
        if (!t.times.empty()) panel.tasks.push_back(std::move(t));
    }
    align_weather(panel);

    panel.provenance = {{"source", "csv"},
                        {"readings", readings.filename().string()},
                        {"weather", weather.filename().string()},
                        {"demographics", demographics.filename().string()}};
    validate(panel);
    return panel;
}

// ---------------------------------------------------------------------------

SplitViews split(const PanelDataset& panel, MonthIndex train_end, MonthIndex test_end) {
    if (train_end >= test_end)
        throw InvalidInterval("train_end " + format_month(train_end) + " is not before test_end " +
                              format_month(test_end));
    SplitViews v;
    for (auto* view : {&v.train, &v.test}) {
        view->weather = panel.weather;
        view->unit = panel.unit;
        view->frequency = panel.frequency;
        view->fields = panel.fields;
        view->split = SplitSpec{train_end, test_end};
        view->provenance = panel.provenance;
    }
    for (const auto& t : panel.tasks) {
        TaskSeries tr = t, te = t;
        for (auto* s : {&tr, &te}) {
            s->times.clear();
            s->loads.clear();
            s->weather.clear();
        }
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            TaskSeries* dst = t.times[i] <= train_end ? &tr : (t.times[i] <= test_end ? &te : nullptr);
            if (!dst) continue;
            dst->times.push_back(t.times[i]);
            dst->loads.push_back(t.loads[i]);
            dst->weather.push_back(t.weather[i]);
        }
        if (!tr.times.empty()) v.train.tasks.push_back(std::move(tr));
        if (!te.times.empty()) v.test.tasks.push_back(std::move(te));
    }
    if (v.train.tasks.empty()) throw EmptySplit("no observations at or before " + format_month(train_end));
    if (v.test.tasks.empty())
        throw EmptySplit("no observations in " + format_month(train_end + 1) + ".." + format_month(test_end));
    return v;
}

// ---------------------------------------------------------------------------

namespace {

struct RegionClimate {
    double mean;
    double swing;
};

RegionClimate region_climate(const std::string& region) {
    static const std::map<std::string, RegionClimate> table{
        {"VIC", {14.5, 5.5}}, {"NSW", {17.5, 5.0}}, {"SA", {16.5, 5.5}},
        {"QLD", {21.5, 4.0}}, {"TAS", {11.5, 4.5}}, {"ACT", {13.0, 7.0}}};
    const auto it = table.find(region);
    return it != table.end() ? it->second : RegionClimate{15.0, 5.0};
}

constexpr const char* kIncomeBands[] = {"low", "mid", "high"};

constexpr const char* kFormula =
    "load = max(0, base + amplitude*cos(2*pi*(month_of_year - peak_month - phase_shift)/12)"
    " + hdd_coupling*hdd + cdd_coupling*cdd + noise_level*N(0,1)); "
    "base = (base_load + income_effect*income_step + rooms_effect*num_rooms)*exp(base_spread*N(0,1)); "
    "amplitude = base*min(0.95, max(0.05, seasonal_amplitude + amplitude_rooms_effect*(num_rooms-4))"
    "*exp(amplitude_spread*N(0,1))); phase_shift = phase_jitter*N(0,1)";

}  // namespace

WeatherRow degree_days(double mean_temp_c, int days, double base_temp) {
    return {mean_temp_c, std::max(0.0, base_temp - mean_temp_c) * days, std::max(0.0, mean_temp_c - base_temp) * days};
}

WeatherRow climatology(const SynthConfig& cfg, const std::string& region, MonthIndex m) {
    const auto c = region_climate(region);
    const double temp = c.mean + c.swing * std::cos(2.0 * std::numbers::pi * (month_of_year(m) - 1) / 12.0);
    return degree_days(temp, days_in_month(m), cfg.hdd_base_temp);
}

double synthetic_signal(const SynthConfig& cfg, const TaskTruth& truth, MonthIndex m, const WeatherRow& weather) {
    const double angle =
        2.0 * std::numbers::pi * (static_cast<double>(month_of_year(m)) - cfg.peak_month - truth.phase_shift) / 12.0;
    return truth.base + truth.amplitude * std::cos(angle) + cfg.hdd_coupling * weather.hdd +
           cfg.cdd_coupling * weather.cdd;
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_tasks < 1) throw ConfigError("synth.n_tasks must be >= 1");
    if (cfg.min_train_months < 1 || cfg.max_train_months < cfg.min_train_months)
        throw ConfigError("synth train month range must satisfy 1 <= min_train_months <= max_train_months");
    if (cfg.test_months < 0) throw ConfigError("synth.test_months must be >= 0");
    if (cfg.train_end < cfg.start) throw ConfigError("synth.train_end precedes synth.start");
    if (cfg.train_end - cfg.start + 1 + cfg.test_months < 6) throw ConfigError("synth panel must span >= 6 months");
    if (!(cfg.noise_level >= 0.0)) throw ConfigError("synth.noise_level must be >= 0");
    if (cfg.regions.empty()) throw ConfigError("synth.regions must not be empty");
    if (cfg.peak_month < 1 || cfg.peak_month > 12) throw ConfigError("synth.peak_month must be in 1..12");
    for (double v : {cfg.base_spread, cfg.amplitude_spread, cfg.phase_jitter, cfg.weather_anomaly_sd})
        if (!(v >= 0.0)) throw ConfigError("synth spreads must be >= 0");
}

json to_json(const SynthConfig& cfg) {
    return {{"n_tasks", cfg.n_tasks},
            {"start", format_month(cfg.start)},
            {"train_end", format_month(cfg.train_end)},
            {"test_months", cfg.test_months},
            {"min_train_months", cfg.min_train_months},
            {"max_train_months", cfg.max_train_months},
            {"regions", cfg.regions},
            {"base_load", cfg.base_load},
            {"income_effect", cfg.income_effect},
            {"rooms_effect", cfg.rooms_effect},
            {"base_spread", cfg.base_spread},
            {"seasonal_amplitude", cfg.seasonal_amplitude},
            {"amplitude_rooms_effect", cfg.amplitude_rooms_effect},
            {"amplitude_spread", cfg.amplitude_spread},
            {"peak_month", cfg.peak_month},
            {"phase_jitter", cfg.phase_jitter},
            {"hdd_coupling", cfg.hdd_coupling},
            {"cdd_coupling", cfg.cdd_coupling},
            {"weather_anomaly_sd", cfg.weather_anomaly_sd},
            {"noise_level", cfg.noise_level},
            {"hdd_base_temp", cfg.hdd_base_temp},
            {"unit", to_string(cfg.unit)},
            {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("synth section must be an object");
    SynthConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "n_tasks") cfg.n_tasks = value.get<int>();
            else if (key == "start") cfg.start = parse_month(value.get<std::string>());
            else if (key == "train_end") cfg.train_end = parse_month(value.get<std::string>());
            else if (key == "test_months") cfg.test_months = value.get<int>();
            else if (key == "min_train_months") cfg.min_train_months = value.get<int>();
            else if (key == "max_train_months") cfg.max_train_months = value.get<int>();
            else if (key == "regions") cfg.regions = value.get<std::vector<std::string>>();
            else if (key == "base_load") cfg.base_load = value.get<double>();
            else if (key == "income_effect") cfg.income_effect = value.get<double>();
            else if (key == "rooms_effect") cfg.rooms_effect = value.get<double>();
            else if (key == "base_spread") cfg.base_spread = value.get<double>();
            else if (key == "seasonal_amplitude") cfg.seasonal_amplitude = value.get<double>();
            else if (key == "amplitude_rooms_effect") cfg.amplitude_rooms_effect = value.get<double>();
            else if (key == "amplitude_spread") cfg.amplitude_spread = value.get<double>();
            else if (key == "peak_month") cfg.peak_month = value.get<int>();
            else if (key == "phase_jitter") cfg.phase_jitter = value.get<double>();
            else if (key == "hdd_coupling") cfg.hdd_coupling = value.get<double>();
            else if (key == "cdd_coupling") cfg.cdd_coupling = value.get<double>();
            else if (key == "weather_anomaly_sd") cfg.weather_anomaly_sd = value.get<double>();
            else if (key == "noise_level") cfg.noise_level = value.get<double>();
            else if (key == "hdd_base_temp") cfg.hdd_base_temp = value.get<double>();
            else if (key == "unit") cfg.unit = parse_unit(value.get<std::string>());
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown synth key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth section: ") + e.what());
    } catch (const SchemaError& e) {
        throw ConfigError(e.what());
    } catch (const UnitError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

PanelDataset generate_synthetic(const SynthConfig& cfg) {
    validate(cfg);
    PanelDataset panel;
    panel.unit = cfg.unit;
    panel.fields = {{"income_band", FieldKind::Categorical}, {"num_rooms", FieldKind::Numeric}};
    const MonthIndex test_end = cfg.train_end + cfg.test_months;

    std::seed_seq weather_seq{cfg.seed, std::uint64_t{0x57}};
    std::mt19937_64 weather_rng(weather_seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::string> regions = cfg.regions;
    std::sort(regions.begin(), regions.end());
    regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
    for (const auto& region : regions) {
        auto& table = panel.weather[region];
        for (MonthIndex m = cfg.start; m <= test_end; ++m) {
            const double temp = climatology(cfg, region, m).mean_temp_c + cfg.weather_anomaly_sd * normal(weather_rng);
            table[m] = degree_days(temp, days_in_month(m), cfg.hdd_base_temp);
        }
    }

    std::seed_seq task_seq{cfg.seed, std::uint64_t{0x7a}};
    std::mt19937_64 rng(task_seq);
    const int width = static_cast<int>(std::to_string(cfg.n_tasks).size());
    const int available = cfg.train_end - cfg.start + 1;
    json truth = json::array();
    for (int i = 0; i < cfg.n_tasks; ++i) {
        TaskSeries t;
        std::string num = std::to_string(i + 1);
        t.task_id = "H" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
        t.region = cfg.regions[std::uniform_int_distribution<std::size_t>(0, cfg.regions.size() - 1)(rng)];
        const int band = std::uniform_int_distribution<int>(0, 2)(rng);
        const int rooms = std::uniform_int_distribution<int>(2, 7)(rng);
        const int len = std::min(available, std::uniform_int_distribution<int>(cfg.min_train_months,
                                                                                cfg.max_train_months)(rng));
        t.demographics["income_band"] = std::string(kIncomeBands[band]);
        t.demographics["num_rooms"] = static_cast<double>(rooms);

        TaskTruth tt;
        tt.task_id = t.task_id;
        tt.base = (cfg.base_load + cfg.income_effect * band + cfg.rooms_effect * rooms) *
                  std::exp(cfg.base_spread * normal(rng));
        const double fraction =
            std::clamp(cfg.seasonal_amplitude + cfg.amplitude_rooms_effect * (rooms - 4), 0.05, 0.95);
        tt.amplitude = tt.base * std::min(0.95, fraction * std::exp(cfg.amplitude_spread * normal(rng)));
        tt.phase_shift = cfg.phase_jitter * normal(rng);

        const auto& table = panel.weather.at(t.region);
        for (MonthIndex m = cfg.train_end - len + 1; m <= test_end; ++m) {
            const double noise = cfg.noise_level * normal(rng);
            t.times.push_back(m);
            t.loads.push_back(std::max(0.0, synthetic_signal(cfg, tt, m, table.at(m)) + noise));
        }
        truth.push_back({{"task_id", tt.task_id},
                         {"base", tt.base},
                         {"amplitude", tt.amplitude},
                         {"phase_shift", tt.phase_shift}});
        panel.tasks.push_back(std::move(t));
    }
    align_weather(panel);
    panel.split = SplitSpec{cfg.train_end, test_end};
    panel.provenance = {
        {"source", "synthetic"}, {"formula", kFormula}, {"config", to_json(cfg)}, {"truth", std::move(truth)}};
    return panel;
}

std::vector<TaskTruth> synthetic_truth(const PanelDataset& panel) {
    if (!panel.provenance.contains("truth")) throw SchemaError("panel has no synthetic provenance");
    std::vector<TaskTruth> out;
    for (const auto& e : panel.provenance.at("truth")) {
        out.push_back({e.at("task_id").get<std::string>(), e.at("base").get<double>(), e.at("amplitude").get<double>(),
                       e.at("phase_shift").get<double>()});
    }
    return out;
}

SynthConfig synthetic_config(const PanelDataset& panel) {
    if (!panel.provenance.contains("config")) throw SchemaError("panel has no synthetic provenance");
    return synth_config_from_json(panel.provenance.at("config"));
}

std::vector<std::string> shuffle_task_loads(PanelDataset& panel, MonthIndex train_end, int count,
                                            std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < panel.tasks.size(); ++i) {
        const auto& t = panel.tasks[i];
        const auto n = std::upper_bound(t.times.begin(), t.times.end(), train_end) - t.times.begin();
        if (n >= 2) eligible.push_back(i);
    }
    if (count < 0 || static_cast<std::size_t>(count) > eligible.size())
        throw ConfigError("cannot corrupt " + std::to_string(count) + " tasks; only " +
                          std::to_string(eligible.size()) + " have >= 2 training months");
    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(static_cast<std::size_t>(count));
    std::sort(eligible.begin(), eligible.end());

    std::vector<std::string> ids;
    for (std::size_t idx : eligible) {
        auto& t = panel.tasks[idx];
        const auto n = static_cast<std::size_t>(std::upper_bound(t.times.begin(), t.times.end(), train_end) -
                                                t.times.begin());
        const std::vector<double> original(t.loads.begin(), t.loads.begin() + static_cast<long>(n));
        for (int attempt = 0; attempt < 16; ++attempt) {
            std::shuffle(t.loads.begin(), t.loads.begin() + static_cast<long>(n), rng);
            if (!std::equal(original.begin(), original.end(), t.loads.begin())) break;
        }
        ids.push_back(t.task_id);
    }
    return ids;
}

// ---------------------------------------------------------------------------

json to_json(const PanelDataset& panel) {
    json fields = json::array();
    for (const auto& f : panel.fields)
        fields.push_back({{"name", f.name}, {"kind", f.kind == FieldKind::Numeric ? "numeric" : "categorical"}});

    json weather = json::object();
    for (const auto& [region, rows] : panel.weather) {
        json arr = json::array();
        for (const auto& [m, w] : rows)
            arr.push_back({{"month", format_month(m)}, {"mean_temp_c", w.mean_temp_c}, {"hdd", w.hdd}, {"cdd", w.cdd}});
        weather[region] = std::move(arr);
    }

    json tasks = json::array();
    for (const auto& t : panel.tasks) {
        json demo = json::object();
        for (const auto& [k, v] : t.demographics) {
            if (const auto* d = std::get_if<double>(&v))
                demo[k] = *d;
            else
                demo[k] = std::get<std::string>(v);
        }
        json series = json::array();
        for (std::size_t i = 0; i < t.times.size(); ++i)
            series.push_back({{"month", format_month(t.times[i])}, {"load", t.loads[i]}});
        tasks.push_back({{"task_id", t.task_id}, {"region", t.region}, {"demographics", demo}, {"series", series}});
    }

    json split = nullptr;
    if (panel.split)
        split = {{"train_end", format_month(panel.split->train_end)},
                 {"test_end", format_month(panel.split->test_end)}};

    return {{"schema_version", kPanelSchemaVersion},
            {"frequency", panel.frequency},
            {"unit", to_string(panel.unit)},
            {"split", split},
            {"provenance", panel.provenance},
            {"demographic_fields", fields},
            {"weather", weather},
            {"tasks", tasks}};
}

PanelDataset panel_from_json(const json& j) {
    PanelDataset panel;
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kPanelSchemaVersion)
            throw SchemaError("unsupported panel schema_version " + std::to_string(version));
        panel.frequency = j.at("frequency").get<std::string>();
        if (panel.frequency != "monthly") throw SchemaError("unsupported frequency '" + panel.frequency + "'");
        panel.unit = parse_unit(j.at("unit").get<std::string>());
        if (!j.at("split").is_null())
            panel.split = SplitSpec{parse_month(j.at("split").at("train_end").get<std::string>()),
                                    parse_month(j.at("split").at("test_end").get<std::string>())};
        panel.provenance = j.at("provenance");
        for (const auto& f : j.at("demographic_fields")) {
            const auto kind = f.at("kind").get<std::string>();
            if (kind != "numeric" && kind != "categorical") throw SchemaError("unknown field kind '" + kind + "'");
            panel.fields.push_back(
                {f.at("name").get<std::string>(), kind == "numeric" ? FieldKind::Numeric : FieldKind::Categorical});
        }
        for (const auto& [region, rows] : j.at("weather").items()) {
            auto& table = panel.weather[region];
            for (const auto& r : rows)
                table[parse_month(r.at("month").get<std::string>())] = {
                    r.at("mean_temp_c").get<double>(), r.at("hdd").get<double>(), r.at("cdd").get<double>()};
        }
        for (const auto& jt : j.at("tasks")) {
            TaskSeries t;
            t.task_id = jt.at("task_id").get<std::string>();
            t.region = jt.at("region").get<std::string>();
            for (const auto& [k, v] : jt.at("demographics").items()) {
                if (v.is_number())
                    t.demographics[k] = v.get<double>();
                else
                    t.demographics[k] = v.get<std::string>();
            }
            for (const auto& p : jt.at("series")) {
                t.times.push_back(parse_month(p.at("month").get<std::string>()));
                t.loads.push_back(p.at("load").get<double>());
            }
            panel.tasks.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("panel json: ") + e.what());
    }
    align_weather(panel);
    validate(panel);
    return panel;
}

std::string serialize_panel(const PanelDataset& panel) { return to_json(panel).dump(1) + "\n"; }

PanelDataset parse_panel(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("panel json: ") + e.what());
    }
    return panel_from_json(j);
}

void write_panel(const std::filesystem::path& path, const PanelDataset& panel) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SchemaError("cannot write " + tmp.string());
        out << serialize_panel(panel);
        if (!out) throw SchemaError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

PanelDataset read_panel(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_panel(ss.str());
}

}  // namespace stackgp::data

#include "stackgp/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stackgp/errors.hpp"

namespace stackgp {

void sort_forecasts(Forecasts& f) {
    std::sort(f.begin(), f.end(), [](const ForecastEntry& a, const ForecastEntry& b) {
        return a.task_id != b.task_id ? a.task_id < b.task_id : a.month < b.month;
    });
}

namespace stacking {

std::string to_string(TrainStage1 s) {
    switch (s) {
        case TrainStage1::Backtest: return "backtest";
        case TrainStage1::LeaveOneOut: return "loo";
        case TrainStage1::Posterior: return "posterior";
    }
    return "backtest";
}

TrainStage1 parse_train_stage1(const std::string& s) {
    if (s == "backtest") return TrainStage1::Backtest;
    if (s == "loo") return TrainStage1::LeaveOneOut;
    if (s == "posterior") return TrainStage1::Posterior;
    throw ConfigError("unknown stage-1 training feature source '" + s + "'");
}

namespace {

struct RowBuilder {
    const data::PanelDataset& panel;
    const LayoutConfig& cfg;
    MonthIndex train_end;
    std::vector<std::string> categorical;
    std::vector<std::string> numeric;
    FeatureLayout layout;

    void add_group(const std::string& name, const std::vector<std::string>& cols) {
        if (cols.empty()) return;
        layout.groups.emplace_back(name, cols.size());
        layout.columns.insert(layout.columns.end(), cols.begin(), cols.end());
    }

    void define_layout() {
        std::vector<std::string> load;
        for (int k = 1; k <= cfg.p; ++k) load.push_back("load.lag" + std::to_string(k));
        load.push_back("load.valid_fraction");
        add_group("load", load);

        if (cfg.include_weather) add_group("weather", {"weather.mean_temp_c", "weather.hdd", "weather.cdd"});

        if (cfg.include_demographics) {
            if (cfg.include_region) {
                std::set<std::string> regions;
                for (const auto& t : panel.tasks) regions.insert(t.region);
                layout.levels["region"].assign(regions.begin(), regions.end());
            }
            for (const auto& f : panel.fields) {
                if (f.kind == data::FieldKind::Numeric) {
                    numeric.push_back(f.name);
                    continue;
                }
                categorical.push_back(f.name);
                std::set<std::string> levels;
                for (const auto& t : panel.tasks) {
                    const auto it = t.demographics.find(f.name);
                    if (it == t.demographics.end() || !std::holds_alternative<std::string>(it->second))
                        throw MissingCovariate("task '" + t.task_id + "' lacks categorical field '" + f.name + "'");
                    levels.insert(std::get<std::string>(it->second));
                }
                layout.levels[f.name].assign(levels.begin(), levels.end());
            }
            std::vector<std::string> demo;
            for (const auto& [field, levels] : layout.levels)
                for (const auto& level : levels) demo.push_back("demographics." + field + "=" + level);
            for (const auto& n : numeric) demo.push_back("demographics." + n);
            add_group("demographics", demo);
        }

        add_group("season", {"season.sin", "season.cos"});
        add_group("horizon", {"horizon.months_ahead"});
        if (cfg.include_stage1) {
            add_group("stage1", {"stage1.mean"});
            if (cfg.include_variance) add_group("stage1_variance", {"stage1.log_variance"});
        }
    }

    /// Raw feature row for task `t` at target month `m`. `observed` receives
    /// the number of lag months backed by actual training loads.
    std::vector<double> row(const data::TaskSeries& t, const PosteriorSummary& s, MonthIndex m,
                            bool training, int& observed) const {
        double s1_mean = 0.0, s1_var = 0.0;
        MonthIndex origin = train_end, horizon = m - train_end;
        if (training) {
            const auto it = std::lower_bound(s.train_times.begin(), s.train_times.end(), m);
            if (it == s.train_times.end() || *it != m)
                throw MissingCovariate("task '" + t.task_id + "' has no stage-1 value at " + format_month(m));
            const auto i = static_cast<std::size_t>(it - s.train_times.begin());
            origin = m - 1;
            switch (cfg.train_stage1) {
                case TrainStage1::Backtest:
                    if (s.backtest.size() != s.train_times.size())
                        throw MissingCovariate("task '" + t.task_id + "' has no stage-1 backtest");
                    origin = s.backtest[i].origin;
                    horizon = m - origin;
                    s1_mean = s.backtest[i].mean;
                    s1_var = s.backtest[i].variance;
                    break;
                case TrainStage1::LeaveOneOut:
                    s1_mean = s.loo_means.at(i);
                    s1_var = s.loo_variances.at(i);
                    break;
                case TrainStage1::Posterior:
                    s1_mean = s.means[s.index_of(m)];
                    s1_var = s.variances[s.index_of(m)];
                    break;
            }
        } else {
            s1_mean = s.means[s.index_of(m)];
            s1_var = s.variances[s.index_of(m)];
        }

        double pad = 0.0;
        int known = 0;
        for (std::size_t i = 0; i < t.times.size() && t.times[i] <= origin; ++i, ++known) pad += t.loads[i];
        pad = known > 0 ? pad / known : s1_mean;

        std::vector<double> x;
        x.reserve(layout.dim());
        observed = 0;
        for (int k = 1; k <= cfg.p; ++k) {
            const MonthIndex lag = m - k;
            const auto v = lag <= origin ? t.load_at(lag) : std::nullopt;
            x.push_back(v ? *v : pad);
            if (v) ++observed;
        }
        x.push_back(cfg.p > 0 ? static_cast<double>(observed) / cfg.p : 1.0);

        if (cfg.include_weather) {
            const auto region = panel.weather.find(t.region);
            const data::WeatherRow* w = nullptr;
            if (region != panel.weather.end()) {
                const auto it = region->second.find(m);
                if (it != region->second.end()) w = &it->second;
            }
            if (!w)
                throw MissingCovariate("no weather for region '" + t.region + "' at " + format_month(m) +
                                       " (task '" + t.task_id + "')");
            x.insert(x.end(), {w->mean_temp_c, w->hdd, w->cdd});
        }

        if (cfg.include_demographics) {
            for (const auto& [field, levels] : layout.levels) {
                const std::string value =
                    field == "region" && cfg.include_region ? t.region : std::get<std::string>(t.demographics.at(field));
                for (const auto& level : levels) x.push_back(value == level ? 1.0 : 0.0);
            }
            for (const auto& n : numeric) {
                const auto it = t.demographics.find(n);
                if (it == t.demographics.end() || !std::holds_alternative<double>(it->second))
                    throw MissingCovariate("task '" + t.task_id + "' lacks numeric field '" + n + "'");
                x.push_back(std::get<double>(it->second));
            }
        }

        const double angle = 2.0 * std::numbers::pi * month_of_year(m) / 12.0;
        x.push_back(std::sin(angle));
        x.push_back(std::cos(angle));
        x.push_back(static_cast<double>(horizon));
        if (cfg.include_stage1) {
            x.push_back(s1_mean);
            if (cfg.include_variance) x.push_back(std::log(s1_var));
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw MissingCovariate("non-finite feature for task '" + t.task_id + "' at " + format_month(m));
        return x;
    }
};

gp::Inputs to_matrix(const std::vector<std::vector<double>>& rows, std::size_t dim) {
    gp::Inputs x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return x;
}

gp::Inputs standardize(const gp::Inputs& raw, const FeatureLayout& layout) {
    gp::Inputs x = raw;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = (x.col(j).array() - layout.center[static_cast<std::size_t>(j)]) /
                   layout.scale[static_cast<std::size_t>(j)];
    return x;
}

}  // namespace

FeatureSet build_features(const data::PanelDataset& train, const std::vector<PosteriorSummary>& summaries,
                          const std::set<std::string>& passed, std::span<const MonthIndex> horizon,
                          const LayoutConfig& cfg) {
    if (cfg.p < 0) throw ConfigError("lag count p must be >= 0");
    if (cfg.min_history < 0 || cfg.min_history > cfg.p) throw ConfigError("min_history must lie in [0, p]");

    MonthIndex train_end = 0;
    if (train.split) {
        train_end = train.split->train_end;
    } else {
        bool any = false;
        for (const auto& t : train.tasks)
            if (!t.times.empty()) {
                train_end = any ? std::max(train_end, t.times.back()) : t.times.back();
                any = true;
            }
        if (!any) throw EmptyInput("training panel has no observations");
    }

    std::map<std::string, const PosteriorSummary*> by_id;
    for (const auto& s : summaries) by_id[s.task_id] = &s;

    RowBuilder b{train, cfg, train_end, {}, {}, {}};
    b.define_layout();
    const std::size_t dim = b.layout.dim();

    std::vector<const data::TaskSeries*> tasks;
    for (const auto& t : train.tasks) tasks.push_back(&t);
    std::sort(tasks.begin(), tasks.end(), [](const auto* a, const auto* c) { return a->task_id < c->task_id; });

    FeatureSet fs;
    std::vector<std::vector<double>> train_rows, test_rows;
    std::vector<double> targets;
    for (const auto* t : tasks) {
        const auto it = by_id.find(t->task_id);
        if (it == by_id.end()) throw MissingCovariate("no stage-1 summary for task '" + t->task_id + "'");
        const auto& s = *it->second;
        int observed = 0;
        if (passed.count(t->task_id)) {
            for (std::size_t i = 0; i < t->times.size(); ++i) {
                if (t->times[i] > train_end) continue;
                auto r = b.row(*t, s, t->times[i], true, observed);
                if (observed < cfg.min_history) continue;
                train_rows.push_back(std::move(r));
                targets.push_back(t->loads[i]);
                fs.train_keys.push_back({t->task_id, t->times[i]});
            }
        }
        for (MonthIndex m : horizon) {
            test_rows.push_back(b.row(*t, s, m, false, observed));
            fs.test_keys.push_back({t->task_id, m});
        }
    }

    fs.layout = std::move(b.layout);
    fs.train_raw = to_matrix(train_rows, dim);
    fs.test_raw = to_matrix(test_rows, dim);
    fs.layout.center.assign(dim, 0.0);
    fs.layout.scale.assign(dim, 1.0);
    const auto n = static_cast<double>(train_rows.size());
    if (!train_rows.empty()) {
        for (std::size_t j = 0; j < dim; ++j) {
            const auto col = fs.train_raw.col(static_cast<Eigen::Index>(j));
            const double mu = col.mean();
            const double sd = std::sqrt((col.array() - mu).square().sum() / n);
            fs.layout.center[j] = mu;
            fs.layout.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mu)) ? sd : 1.0;
        }
    }
    fs.train_x = standardize(fs.train_raw, fs.layout);
    fs.test_x = standardize(fs.test_raw, fs.layout);
    fs.train_y = Eigen::Map<const gp::Vector>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    return fs;
}

kernels::FeatureGroupKernel make_stack_kernel(const FeatureLayout& layout, const StackKernelConfig& cfg) {
    std::vector<kernels::FeatureGroup> groups;
    std::size_t begin = 0;
    for (const auto& [name, count] : layout.groups) {
        const auto it = cfg.group_kernels.find(name);
        auto k = it != cfg.group_kernels.end()
                     ? it->second
                     : kernels::KernelSpec::squared_exponential(1.0, cfg.lengthscale * std::sqrt(double(count)))
                           .with_frozen("amplitude");
        groups.push_back({name, begin, count, std::move(k)});
        begin += count;
    }
    for (const auto& [name, spec] : cfg.group_kernels) {
        (void)spec;
        const bool known = std::any_of(layout.groups.begin(), layout.groups.end(),
                                       [&](const auto& g) { return g.first == name; });
        if (!known) throw ConfigError("kernel given for unknown feature group '" + name + "'");
    }
    return kernels::FeatureGroupKernel(std::move(groups), cfg.signal_variance);
}

gp::GPModel fit_stacked(const gp::Inputs& train_x, const gp::Vector& targets, const FeatureLayout& layout,
                        const StackKernelConfig& kernel_cfg, const gp::OptConfig& opt) {
    if (train_x.rows() < 2) throw NoTrainableTasks("stage 2 needs at least two training rows");
    if (static_cast<std::size_t>(train_x.cols()) != layout.dim())
        throw LayoutMismatch("training rows have " + std::to_string(train_x.cols()) + " columns, layout has " +
                             std::to_string(layout.dim()));
    return gp::fit(make_stack_kernel(layout, kernel_cfg), train_x, targets, opt);
}

Forecasts predict_stacked(const StackedModel& model, const std::vector<RowKey>& keys, const gp::Inputs& test_x) {
    if (static_cast<std::size_t>(test_x.cols()) != model.layout.dim())
        throw LayoutMismatch("test rows have " + std::to_string(test_x.cols()) + " columns, layout has " +
                             std::to_string(model.layout.dim()));
    if (keys.size() != static_cast<std::size_t>(test_x.rows()))
        throw LayoutMismatch("row keys and test rows differ in count");
    Forecasts out;
    if (keys.empty()) return out;
    const auto pred = gp::predict(model.ensemble, test_x, true);
    out.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out.push_back({keys[i].task_id, keys[i].month, pred.mean(r), pred.variance(r), pred.lower95(r),
                       pred.upper95(r)});
    }
    return out;
}

}  // namespace stacking
}  // namespace stackgp

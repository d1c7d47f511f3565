#include "stackgp/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stackgp/baselines.hpp"
#include "stackgp/csv.hpp"
#include "stackgp/errors.hpp"
#include "stackgp/stacking.hpp"
#include "stackgp/task_stage.hpp"

namespace stackgp::pipeline {

data::PanelDataset load_dataset(const config::PipelineConfig& cfg) {
    config::validate(cfg);
    if (cfg.synth) return data::generate_synthetic(*cfg.synth);
    if (cfg.panel) return data::read_panel(*cfg.panel);
    data::IngestOptions opts;
    opts.extra_categorical = cfg.csv->extra_categorical;
    opts.extra_numeric = cfg.csv->extra_numeric;
    return data::ingest_csv(cfg.csv->readings, cfg.csv->weather, cfg.csv->demographics, opts);
}

std::string dataset_hash(const data::PanelDataset& panel) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data::serialize_panel(panel)) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Window resolve_window(const config::PipelineConfig& cfg, const data::PanelDataset& panel) {
    Window w;
    if (cfg.train_end) w.train_end = *cfg.train_end;
    else if (panel.split) w.train_end = panel.split->train_end;
    else throw ConfigError("no training boundary: set split.train_end or use a dataset with a split");

    if (cfg.test_end) w.test_end = *cfg.test_end;
    else if (panel.split && panel.split->test_end > w.train_end) w.test_end = panel.split->test_end;
    else w.test_end = w.train_end + 12;
    if (w.test_end <= w.train_end) throw ConfigError("split test_end must come after train_end");
    return w;
}

data::PanelDataset training_view(const data::PanelDataset& panel, const Window& window) {
    data::PanelDataset out = panel;
    out.tasks.clear();
    for (const auto& t : panel.tasks) {
        data::TaskSeries s = t;
        s.times.clear();
        s.loads.clear();
        s.weather.clear();
        for (std::size_t i = 0; i < t.times.size(); ++i) {
            if (t.times[i] > window.train_end) continue;
            s.times.push_back(t.times[i]);
            s.loads.push_back(t.loads[i]);
            s.weather.push_back(t.weather[i]);
        }
        if (!s.times.empty()) out.tasks.push_back(std::move(s));
    }
    if (out.tasks.empty()) throw EmptySplit("no task has data on or before " + format_month(window.train_end));
    out.split = data::SplitSpec{window.train_end, window.test_end};
    return out;
}

namespace {

std::vector<MonthIndex> horizon_months(const Window& w, int months) {
    if (months < 1) throw ConfigError("forecast horizon must be at least one month");
    std::vector<MonthIndex> h;
    for (int i = 1; i <= months; ++i) h.push_back(w.train_end + i);
    return h;
}

std::vector<task_stage::PosteriorSummary> summaries_of(const std::vector<task_stage::TaskFit>& fits) {
    std::vector<task_stage::PosteriorSummary> out;
    out.reserve(fits.size());
    for (const auto& f : fits) out.push_back(f.summary);
    return out;
}

std::set<std::string> passed_ids(const std::vector<GateDecision>& gate) {
    std::set<std::string> ids;
    for (const auto& g : gate)
        if (g.passed) ids.insert(g.task_id);
    return ids;
}

stacking::LayoutConfig layout_config(const config::PipelineConfig& cfg) { return cfg.layout; }

}  // namespace

Artifact fit(const config::PipelineConfig& cfg_in, const data::PanelDataset& panel) {
    Artifact a;
    a.config = cfg_in;
    a.dataset_hash = dataset_hash(panel);
    a.window = resolve_window(cfg_in, panel);
    a.config.train_end = a.window.train_end;
    a.config.test_end = a.window.test_end;
    const auto train = training_view(panel, a.window);
    const auto horizon = horizon_months(a.window, a.window.months());

    if (a.config.method == config::Method::AR) {
        for (const auto& t : train.tasks) {
            const auto f = baselines::fit_ar_task(t, a.window.train_end, a.config.ar);
            ARRecord r;
            r.task_id = t.task_id;
            if (f.model) {
                r.order = f.model->order;
                r.coefficients = f.model->coefficients;
                r.intercept = f.model->intercept;
                r.residual_variance = f.model->residual_variance;
            } else {
                r.intercept = f.mean;
                r.residual_variance = f.variance;
            }
            a.ar.push_back(std::move(r));
        }
        return a;
    }

    auto tc = config::stage1_settings(a.config, a.window.months());
    a.config.stage1.backtest_horizon = tc.backtest_horizon;
    const auto fits = task_stage::fit_all_tasks(train, horizon, tc);
    for (const auto& f : fits) {
        const auto h = f.model.hyper();
        a.stage1.push_back({f.summary.task_id, h.kernel_log_params, h.log_noise});
    }
    const auto summaries = summaries_of(fits);
    const auto gate = task_stage::apply_gate(summaries, {a.config.tau});
    std::set<std::string> passed;
    for (const auto& s : gate.passed) passed.insert(s.task_id);
    for (const auto& s : summaries) a.gate.push_back({s.task_id, s.train_mpe, passed.count(s.task_id) > 0});

    if (a.config.method == config::Method::TaskGp) return a;

    if (passed.empty())
        throw NoTrainableTasks("no task passed the MPE gate at tau = " + csv::format_double(a.config.tau));
    const auto fs = stacking::build_features(train, summaries, passed, horizon, layout_config(a.config));
    auto opt = a.config.stage2.opt;
    opt.seed = a.config.seed;
    const auto model = stacking::fit_stacked(fs.train_x, fs.train_y, fs.layout, a.config.stage2.kernel_config(), opt);
    const auto h = model.hyper();
    a.stage2 = Stage2Record{fs.layout.groups,
                            fs.layout.columns,
                            h.kernel_log_params,
                            h.log_noise,
                            model.diagnostics.nlml,
                            static_cast<std::size_t>(fs.train_x.rows())};
    return a;
}

Forecasts forecast(const Artifact& a, const data::PanelDataset& panel, std::optional<int> horizon_months_opt) {
    if (a.version != kArtifactVersion)
        throw ArtifactMismatch("artifact version " + std::to_string(a.version) + ", expected " +
                               std::to_string(kArtifactVersion));
    if (dataset_hash(panel) != a.dataset_hash)
        throw ArtifactMismatch("dataset hash " + dataset_hash(panel) + " differs from the fitted " + a.dataset_hash);
    const auto train = training_view(panel, a.window);
    const auto horizon = horizon_months(a.window, horizon_months_opt.value_or(a.window.months()));

    if (a.config.method == config::Method::AR) {
        Forecasts out;
        std::map<std::string, const ARRecord*> by_id;
        for (const auto& r : a.ar) by_id[r.task_id] = &r;
        for (const auto& t : train.tasks) {
            const auto it = by_id.find(t.task_id);
            if (it == by_id.end()) throw ArtifactMismatch("artifact has no AR model for task '" + t.task_id + "'");
            auto f = baselines::fit_ar_task(t, a.window.train_end, a.config.ar);
            const auto& r = *it->second;
            if (r.order > 0) {
                baselines::ARModel m;
                m.order = r.order;
                m.coefficients = r.coefficients;
                m.intercept = r.intercept;
                m.residual_variance = r.residual_variance;
                m.differenced = a.config.ar.difference;
                f.model = m;
            } else {
                f.model.reset();
                f.mean = r.intercept;
                f.variance = r.residual_variance;
            }
            const auto part = baselines::forecast_ar_task(f, horizon);
            out.insert(out.end(), part.begin(), part.end());
        }
        sort_forecasts(out);
        return out;
    }

    const auto tc = config::stage1_settings(a.config, a.window.months());
    std::map<std::string, const TaskHyper*> hyper_by_id;
    for (const auto& h : a.stage1) hyper_by_id[h.task_id] = &h;
    std::vector<task_stage::TaskFit> fits;
    for (const auto& t : train.tasks) {
        const auto it = hyper_by_id.find(t.task_id);
        if (it == hyper_by_id.end()) throw ArtifactMismatch("artifact has no stage-1 model for task '" + t.task_id + "'");
        gp::GPHyperparams hp{it->second->kernel_log_params, it->second->log_noise};
        fits.push_back(task_stage::condition_task_gp(t, horizon, tc.kernel, hp, tc));
    }
    std::sort(fits.begin(), fits.end(),
              [](const auto& x, const auto& y) { return x.summary.task_id < y.summary.task_id; });

    if (a.config.method == config::Method::TaskGp) return baselines::task_gp_forecasts(fits, horizon);

    if (!a.stage2) throw ArtifactMismatch("stacked artifact has no stage-2 model");
    const auto summaries = summaries_of(fits);
    const auto fs =
        stacking::build_features(train, summaries, passed_ids(a.gate), horizon, layout_config(a.config));
    if (fs.layout.columns != a.stage2->columns)
        throw ArtifactMismatch("feature layout differs from the fitted model");
    const auto kernel = kernels::with_log_params(make_stack_kernel(fs.layout, a.config.stage2.kernel_config()),
                                                 a.stage2->kernel_log_params);
    auto ensemble = gp::GPModel::condition(kernel, a.stage2->log_noise, fs.train_x, fs.train_y);
    stacking::StackedModel model{std::move(ensemble), fs.layout, {a.config.tau}, {}};
    auto out = stacking::predict_stacked(model, fs.test_keys, fs.test_x);
    sort_forecasts(out);
    return out;
}

metrics::EvalReport evaluate(const Forecasts& forecasts, const data::PanelDataset& actuals) {
    std::map<std::string, const data::TaskSeries*> by_id;
    for (const auto& t : actuals.tasks) by_id[t.task_id] = &t;
    std::vector<metrics::Observation> obs;
    obs.reserve(forecasts.size());
    for (const auto& f : forecasts) {
        const auto it = by_id.find(f.task_id);
        if (it == by_id.end()) throw JoinError("forecast task '" + f.task_id + "' has no actuals");
        const auto v = it->second->load_at(f.month);
        if (!v) throw JoinError("no actual load for task '" + f.task_id + "' at " + format_month(f.month));
        obs.push_back({it->second->region, *v, f.mean, f.lower95, f.upper95});
    }
    return metrics::evaluate(obs);
}

namespace {

json summary_json(const metrics::Summary& s) {
    return {{"n", s.n},
            {"mae", s.mae},
            {"r2", s.r2 ? json(*s.r2) : json(nullptr)},
            {"coverage95", s.coverage95}};
}

}  // namespace

json report_to_json(const metrics::EvalReport& report) {
    json regions = json::object();
    for (const auto& [region, s] : report.per_region) regions[region] = summary_json(s);
    return {{"pooled", summary_json(report.pooled)}, {"per_region", regions}};
}

std::string forecasts_to_csv(const Forecasts& forecasts) {
    std::string out = "task_id,month,mean,variance,lower95,upper95\n";
    for (const auto& f : forecasts) {
        out += csv::escape(f.task_id) + ',' + format_month(f.month) + ',' + csv::format_double(f.mean) + ',' +
               csv::format_double(f.variance) + ',' + csv::format_double(f.lower95) + ',' +
               csv::format_double(f.upper95) + '\n';
    }
    return out;
}

Forecasts forecasts_from_csv(const std::string& text) {
    const auto table = csv::parse(text, "forecast");
    const auto id = table.column("task_id"), month = table.column("month"), mean = table.column("mean"),
               var = table.column("variance"), lo = table.column("lower95"), hi = table.column("upper95");
    Forecasts out;
    for (const auto& row : table.rows) {
        const std::string ctx = "forecast row for '" + row[id] + "'";
        out.push_back({row[id], parse_month(row[month]), csv::parse_double(row[mean], ctx),
                       csv::parse_double(row[var], ctx), csv::parse_double(row[lo], ctx),
                       csv::parse_double(row[hi], ctx)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Artifact serialization

json to_json(const Artifact& a) {
    json stage1 = json::array();
    for (const auto& h : a.stage1)
        stage1.push_back({{"task_id", h.task_id}, {"kernel_log_params", h.kernel_log_params}, {"log_noise", h.log_noise}});
    json gate = json::array();
    for (const auto& g : a.gate) gate.push_back({{"task_id", g.task_id}, {"mpe", g.mpe}, {"passed", g.passed}});
    json j = {{"version", a.version},
              {"config", config::to_json(a.config)},
              {"dataset_hash", a.dataset_hash},
              {"train_end", format_month(a.window.train_end)},
              {"test_end", format_month(a.window.test_end)},
              {"stage1", stage1},
              {"gate", gate}};
    if (a.stage2) {
        json groups = json::array();
        for (const auto& [name, count] : a.stage2->groups) groups.push_back({{"name", name}, {"count", count}});
        j["stage2"] = {{"groups", groups},
                       {"columns", a.stage2->columns},
                       {"kernel_log_params", a.stage2->kernel_log_params},
                       {"log_noise", a.stage2->log_noise},
                       {"nlml", a.stage2->nlml},
                       {"train_rows", a.stage2->train_rows}};
    }
    if (!a.ar.empty()) {
        json ar = json::array();
        for (const auto& r : a.ar)
            ar.push_back({{"task_id", r.task_id},
                          {"order", r.order},
                          {"coefficients", r.coefficients},
                          {"intercept", r.intercept},
                          {"residual_variance", r.residual_variance}});
        j["ar"] = ar;
    }
    return j;
}

Artifact artifact_from_json(const json& j) {
    Artifact a;
    try {
        a.version = j.at("version").get<int>();
        if (a.version != kArtifactVersion)
            throw ArtifactMismatch("artifact version " + std::to_string(a.version) + ", expected " +
                                   std::to_string(kArtifactVersion));
        a.config = config::from_json(j.at("config"));
        a.dataset_hash = j.at("dataset_hash").get<std::string>();
        a.window.train_end = parse_month(j.at("train_end").get<std::string>());
        a.window.test_end = parse_month(j.at("test_end").get<std::string>());
        for (const auto& h : j.at("stage1"))
            a.stage1.push_back({h.at("task_id").get<std::string>(), h.at("kernel_log_params").get<std::vector<double>>(),
                                h.at("log_noise").get<double>()});
        for (const auto& g : j.at("gate"))
            a.gate.push_back({g.at("task_id").get<std::string>(), g.at("mpe").get<double>(), g.at("passed").get<bool>()});
        if (j.contains("stage2")) {
            const auto& s = j.at("stage2");
            Stage2Record r;
            for (const auto& g : s.at("groups"))
                r.groups.emplace_back(g.at("name").get<std::string>(), g.at("count").get<std::size_t>());
            r.columns = s.at("columns").get<std::vector<std::string>>();
            r.kernel_log_params = s.at("kernel_log_params").get<std::vector<double>>();
            r.log_noise = s.at("log_noise").get<double>();
            r.nlml = s.at("nlml").get<double>();
            r.train_rows = s.at("train_rows").get<std::size_t>();
            a.stage2 = std::move(r);
        }
        if (j.contains("ar"))
            for (const auto& r : j.at("ar"))
                a.ar.push_back({r.at("task_id").get<std::string>(), r.at("order").get<int>(),
                                r.at("coefficients").get<std::vector<double>>(), r.at("intercept").get<double>(),
                                r.at("residual_variance").get<double>()});
    } catch (const json::exception& e) {
        throw ArtifactMismatch(std::string("malformed model artifact: ") + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SchemaError("cannot write " + tmp.string());
        out << content;
        if (!out) throw SchemaError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace stackgp::pipeline

#include "stackgp/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "stackgp/errors.hpp"

namespace stackgp::config {

std::string to_string(Method m) {
    switch (m) {
        case Method::Stacked: return "stacked";
        case Method::TaskGp: return "task_gp";
        case Method::AR: return "ar";
    }
    return "stacked";
}

Method parse_method(const std::string& s) {
    if (s == "stacked") return Method::Stacked;
    if (s == "task_gp") return Method::TaskGp;
    if (s == "ar") return Method::AR;
    throw ConfigError("unknown method '" + s + "' (expected stacked, task_gp or ar)");
}

namespace {

/// Reads keys from one JSON object and rejects any it was not asked about.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("'" + name_ + "' is missing '" + key + "'");
        return j_.at(key);
    }

    template <class T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
        }
    }

    template <class T>
    T get(const std::string& key) {
        T out{};
        if (!has(key)) throw ConfigError("'" + name_ + "' is missing '" + key + "'");
        read(key, out);
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

double positive(Section& s, const std::string& key) {
    const double v = s.get<double>(key);
    if (!(std::isfinite(v) && v > 0.0)) throw ConfigError("kernel parameter '" + key + "' must be positive");
    return v;
}

gp::OptConfig opt_from_json(const json& j, const std::string& name, gp::OptConfig o) {
    Section s(j, name);
    int restarts = o.restarts, max_iter = o.max_iter;
    std::size_t max_rows = o.max_opt_rows;
    s.read("restarts", restarts);
    s.read("max_iter", max_iter);
    s.read("tol", o.tol);
    s.read("initial_noise", o.initial_noise);
    s.read("min_noise", o.min_noise);
    s.read("max_opt_rows", max_rows);
    s.read("freeze_period", o.freeze_period);
    s.finish();
    if (restarts < 1) throw ConfigError("'" + name + ".restarts' must be >= 1");
    if (max_iter < 1) throw ConfigError("'" + name + ".max_iter' must be >= 1");
    if (!(o.tol > 0.0) || !(o.initial_noise > 0.0) || !(o.min_noise > 0.0))
        throw ConfigError("'" + name + "' tolerances and noise levels must be positive");
    o.restarts = restarts;
    o.max_iter = max_iter;
    o.max_opt_rows = max_rows;
    return o;
}

json opt_to_json(const gp::OptConfig& o) {
    return {{"restarts", o.restarts},         {"max_iter", o.max_iter},   {"tol", o.tol},
            {"initial_noise", o.initial_noise}, {"min_noise", o.min_noise}, {"max_opt_rows", o.max_opt_rows},
            {"freeze_period", o.freeze_period}};
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty()) throw ConfigError("empty data path");
    return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

kernels::KernelSpec kernel_from_json(const json& j) {
    Section s(j, "kernel");
    const auto type = s.get<std::string>("type");
    std::vector<std::string> frozen;
    s.read("frozen", frozen);

    auto children = [&](const std::string& key) {
        const auto& arr = s.at(key);
        if (!arr.is_array() || arr.empty()) throw ConfigError("kernel '" + key + "' must be a non-empty array");
        std::vector<kernels::KernelSpec> out;
        for (const auto& c : arr) out.push_back(kernel_from_json(c));
        return out;
    };

    std::optional<kernels::KernelSpec> k;
    if (type == "se") {
        const double a = positive(s, "amplitude"), l = positive(s, "lengthscale");
        k = kernels::KernelSpec::squared_exponential(a, l);
    } else if (type == "periodic") {
        const double a = positive(s, "amplitude"), l = positive(s, "lengthscale"), p = positive(s, "period");
        k = kernels::KernelSpec::periodic(a, l, p);
    } else if (type == "constant" || type == "const") {
        k = kernels::KernelSpec::constant(positive(s, "value"));
    } else if (type == "tied_locally_periodic") {
        const double a = positive(s, "amplitude"), l = positive(s, "lengthscale"), p = positive(s, "period");
        k = kernels::KernelSpec::tied_locally_periodic(a, l, p);
    } else if (type == "locally_periodic") {
        const double a = positive(s, "amplitude"), lp = positive(s, "periodic_lengthscale"),
                     p = positive(s, "period"), sa = positive(s, "se_amplitude"), sl = positive(s, "se_lengthscale");
        k = kernels::KernelSpec::locally_periodic(a, lp, p, sa, sl);
    } else if (type == "sum") {
        k = kernels::KernelSpec::sum(children("terms"));
    } else if (type == "product") {
        k = kernels::KernelSpec::product(children("factors"));
    } else {
        throw ConfigError("unknown kernel type '" + type + "'");
    }
    s.finish();
    for (const auto& suffix : frozen) k = k->with_frozen(suffix);
    return *k;
}

stacking::StackKernelConfig Stage2Config::kernel_config() const {
    stacking::StackKernelConfig k;
    k.signal_variance = signal_variance;
    k.lengthscale = lengthscale;
    for (const auto& [name, spec] : group_kernels) k.group_kernels.emplace(name, kernel_from_json(spec));
    return k;
}

PipelineConfig from_json(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    Section top(j, "config");
    if (!top.has("seed")) throw ConfigError("'seed' is required");
    cfg.seed = top.get<std::uint64_t>("seed");

    {
        Section d(top.at("data"), "data");
        if (d.has("synth")) {
            if (d.at("synth").contains("seed")) throw ConfigError("set the seed at the top level, not in 'data.synth'");
            cfg.synth = data::synth_config_from_json(d.at("synth"));
            cfg.synth->seed = cfg.seed;
        }
        if (d.has("panel")) cfg.panel = resolve(d.get<std::string>("panel"), base_dir);
        if (d.has("csv")) {
            Section c(d.at("csv"), "data.csv");
            CsvSources src;
            src.readings = resolve(c.get<std::string>("readings"), base_dir);
            src.weather = resolve(c.get<std::string>("weather"), base_dir);
            src.demographics = resolve(c.get<std::string>("demographics"), base_dir);
            c.read("extra_categorical", src.extra_categorical);
            c.read("extra_numeric", src.extra_numeric);
            c.finish();
            cfg.csv = std::move(src);
        }
        d.finish();
    }

    if (top.has("split")) {
        Section s(top.at("split"), "split");
        try {
            if (s.has("train_end")) cfg.train_end = parse_month(s.get<std::string>("train_end"));
            if (s.has("test_end")) cfg.test_end = parse_month(s.get<std::string>("test_end"));
        } catch (const SchemaError& e) {
            throw ConfigError(e.what());
        }
        s.finish();
    }

    if (top.has("stage1")) {
        Section s(top.at("stage1"), "stage1");
        if (s.has("kernel")) cfg.stage1.kernel = s.at("kernel");
        if (s.has("opt")) cfg.stage1.opt = opt_from_json(s.at("opt"), "stage1.opt", cfg.stage1.opt);
        if (s.has("mpe_mode")) {
            try {
                cfg.stage1.mpe_mode = task_stage::parse_mpe_mode(s.get<std::string>("mpe_mode"));
            } catch (const Error& e) {
                throw ConfigError(e.what());
            }
        }
        if (s.has("backtest_horizon")) cfg.stage1.backtest_horizon = s.get<int>("backtest_horizon");
        s.finish();
    }

    if (top.has("stage2")) {
        Section s(top.at("stage2"), "stage2");
        s.read("signal_variance", cfg.stage2.signal_variance);
        s.read("lengthscale", cfg.stage2.lengthscale);
        if (s.has("group_kernels")) {
            const auto& g = s.at("group_kernels");
            if (!g.is_object()) throw ConfigError("'stage2.group_kernels' must be an object");
            for (const auto& [name, spec] : g.items()) cfg.stage2.group_kernels[name] = spec;
        }
        if (s.has("opt")) cfg.stage2.opt = opt_from_json(s.at("opt"), "stage2.opt", cfg.stage2.opt);
        s.finish();
    }

    top.read("tau", cfg.tau);

    if (top.has("layout")) {
        Section s(top.at("layout"), "layout");
        auto& l = cfg.layout;
        s.read("p", l.p);
        s.read("include_variance", l.include_variance);
        s.read("include_stage1", l.include_stage1);
        s.read("include_weather", l.include_weather);
        s.read("include_demographics", l.include_demographics);
        s.read("include_region", l.include_region);
        s.read("min_history", l.min_history);
        if (s.has("train_stage1")) l.train_stage1 = stacking::parse_train_stage1(s.get<std::string>("train_stage1"));
        s.finish();
    }

    if (top.has("ar")) {
        Section s(top.at("ar"), "ar");
        s.read("order", cfg.ar.order);
        s.read("difference", cfg.ar.difference);
        s.finish();
    }

    if (top.has("method")) cfg.method = parse_method(top.get<std::string>("method"));
    if (top.has("out_dir")) cfg.out_dir = resolve(top.get<std::string>("out_dir"), base_dir);
    top.finish();

    validate(cfg);
    return cfg;
}

json to_json(const PipelineConfig& cfg) {
    json d = json::object();
    if (cfg.synth) {
        json s = data::to_json(*cfg.synth);
        s.erase("seed");
        d["synth"] = s;
    }
    if (cfg.panel) d["panel"] = cfg.panel->string();
    if (cfg.csv) {
        d["csv"] = {{"readings", cfg.csv->readings.string()},
                    {"weather", cfg.csv->weather.string()},
                    {"demographics", cfg.csv->demographics.string()},
                    {"extra_categorical", cfg.csv->extra_categorical},
                    {"extra_numeric", cfg.csv->extra_numeric}};
    }

    json j;
    j["seed"] = cfg.seed;
    j["data"] = d;
    json split = json::object();
    if (cfg.train_end) split["train_end"] = format_month(*cfg.train_end);
    if (cfg.test_end) split["test_end"] = format_month(*cfg.test_end);
    j["split"] = split;

    json s1 = {{"kernel", cfg.stage1.kernel},
               {"opt", opt_to_json(cfg.stage1.opt)},
               {"mpe_mode", task_stage::to_string(cfg.stage1.mpe_mode)}};
    if (cfg.stage1.backtest_horizon) s1["backtest_horizon"] = *cfg.stage1.backtest_horizon;
    j["stage1"] = s1;

    json groups = json::object();
    for (const auto& [name, spec] : cfg.stage2.group_kernels) groups[name] = spec;
    j["stage2"] = {{"signal_variance", cfg.stage2.signal_variance},
                   {"lengthscale", cfg.stage2.lengthscale},
                   {"group_kernels", groups},
                   {"opt", opt_to_json(cfg.stage2.opt)}};
    j["tau"] = cfg.tau;
    const auto& l = cfg.layout;
    j["layout"] = {{"p", l.p},
                   {"include_variance", l.include_variance},
                   {"include_stage1", l.include_stage1},
                   {"include_weather", l.include_weather},
                   {"include_demographics", l.include_demographics},
                   {"include_region", l.include_region},
                   {"min_history", l.min_history},
                   {"train_stage1", stacking::to_string(l.train_stage1)}};
    j["ar"] = {{"order", cfg.ar.order}, {"difference", cfg.ar.difference}};
    j["method"] = to_string(cfg.method);
    j["out_dir"] = cfg.out_dir.string();
    return j;
}

PipelineConfig load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

void validate(const PipelineConfig& cfg) {
    const int sources = int(cfg.synth.has_value()) + int(cfg.panel.has_value()) + int(cfg.csv.has_value());
    if (sources != 1)
        throw ConfigError("exactly one data source (synth, panel or csv) is required, got " + std::to_string(sources));
    if (cfg.synth) data::validate(*cfg.synth);
    if (cfg.train_end && cfg.test_end && *cfg.test_end <= *cfg.train_end)
        throw ConfigError("split test_end must come after train_end");
    if (!(std::isfinite(cfg.tau) && cfg.tau >= 0.0)) throw ConfigError("tau must be a finite value >= 0");
    if (cfg.layout.p < 0) throw ConfigError("layout.p must be >= 0");
    if (cfg.layout.min_history < 0 || cfg.layout.min_history > cfg.layout.p)
        throw ConfigError("layout.min_history must lie in [0, p]");
    if (cfg.ar.order < 1) throw ConfigError("ar.order must be >= 1");
    if (cfg.stage1.backtest_horizon && *cfg.stage1.backtest_horizon < 1)
        throw ConfigError("stage1.backtest_horizon must be >= 1");
    if (!(cfg.stage2.signal_variance > 0.0) || !(cfg.stage2.lengthscale > 0.0))
        throw ConfigError("stage2 signal_variance and lengthscale must be positive");
    kernel_from_json(cfg.stage1.kernel);
    for (const auto& [name, spec] : cfg.stage2.group_kernels) kernel_from_json(spec);
}

task_stage::TaskStageConfig stage1_settings(const PipelineConfig& cfg, int horizon_months) {
    task_stage::TaskStageConfig tc;
    tc.kernel = kernel_from_json(cfg.stage1.kernel);
    tc.opt = cfg.stage1.opt;
    tc.opt.seed = cfg.seed;
    tc.mpe_mode = cfg.stage1.mpe_mode;
    tc.backtest_horizon = cfg.stage1.backtest_horizon.value_or(std::max(horizon_months, 1));
    return tc;
}

}  // namespace stackgp::config

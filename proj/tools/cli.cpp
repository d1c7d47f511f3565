#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "stackgp/errors.hpp"
#include "stackgp/pipeline.hpp"

namespace stackgp::cli {
namespace {

namespace fs = std::filesystem;
using pipeline::json;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Overrides {
    std::string config;
    std::optional<std::string> method;
    std::optional<double> tau;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> data;
};

config::PipelineConfig load_config(const Overrides& o) {
    auto cfg = config::load(o.config);
    if (o.method) cfg.method = config::parse_method(*o.method);
    if (o.tau) cfg.tau = *o.tau;
    if (o.seed) {
        cfg.seed = *o.seed;
        if (cfg.synth) cfg.synth->seed = *o.seed;
    }
    if (o.out) cfg.out_dir = *o.out;
    if (o.data) {
        cfg.synth.reset();
        cfg.csv.reset();
        cfg.panel = fs::absolute(*o.data);
    }
    config::validate(cfg);
    return cfg;
}

fs::path output_dir(const std::optional<std::string>& flag, const fs::path& fallback) {
    return flag ? fs::path(*flag) : fallback;
}

int cmd_synth(const Overrides& o, std::ostream& out) {
    const auto cfg = load_config(o);
    if (!cfg.synth) throw ConfigError("'synth' needs a data.synth section in the config");
    const auto panel = data::generate_synthetic(*cfg.synth);
    const auto path = cfg.out_dir / "dataset.json";
    pipeline::write_file_atomic(path, data::serialize_panel(panel));
    out << "wrote " << path.string() << " (" << panel.tasks.size() << " tasks)\n";
    return kOk;
}

int cmd_fit(const Overrides& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto panel = pipeline::load_dataset(cfg);
    const auto artifact = pipeline::fit(cfg, panel);
    const auto path = cfg.out_dir / "model.json";
    pipeline::write_file_atomic(path, pipeline::to_json(artifact).dump(2) + "\n");
    const auto passed = std::count_if(artifact.gate.begin(), artifact.gate.end(), [](const auto& g) { return g.passed; });
    out << "wrote " << path.string() << " (method " << config::to_string(cfg.method);
    if (!artifact.gate.empty()) out << ", " << passed << "/" << artifact.gate.size() << " tasks passed the gate";
    out << ")\n";
    return kOk;
}

int cmd_forecast(const std::string& model, const Overrides& o, std::optional<int> horizon, std::ostream& out) {
    json j;
    try {
        j = json::parse(pipeline::read_text(model));
    } catch (const json::exception& e) {
        throw ArtifactMismatch(model + " is not valid JSON: " + e.what());
    }
    const auto artifact = pipeline::artifact_from_json(j);
    auto cfg = artifact.config;
    if (o.data) {
        cfg.synth.reset();
        cfg.csv.reset();
        cfg.panel = fs::absolute(*o.data);
    }
    const auto panel = pipeline::load_dataset(cfg);
    const auto forecasts = pipeline::forecast(artifact, panel, horizon);
    const auto path = output_dir(o.out, cfg.out_dir) / "forecast.csv";
    pipeline::write_file_atomic(path, pipeline::forecasts_to_csv(forecasts));
    out << "wrote " << path.string() << " (" << forecasts.size() << " rows)\n";
    return kOk;
}

int cmd_evaluate(const std::string& forecast_path, const Overrides& o, std::ostream& out) {
    const auto forecasts = pipeline::forecasts_from_csv(pipeline::read_text(forecast_path));
    data::PanelDataset actuals;
    fs::path dir = fs::path(forecast_path).parent_path();
    if (o.data) {
        actuals = data::read_panel(*o.data);
    } else if (!o.config.empty()) {
        const auto cfg = load_config(o);
        actuals = pipeline::load_dataset(cfg);
        dir = cfg.out_dir;
    } else {
        throw ConfigError("evaluate needs --actuals or --config");
    }
    const auto report = pipeline::evaluate(forecasts, actuals);
    const auto path = output_dir(o.out, dir) / "report.json";
    pipeline::write_file_atomic(path, pipeline::report_to_json(report).dump(2) + "\n");
    out << "wrote " << path.string() << " (MAE " << report.pooled.mae << ", n " << report.pooled.n << ")\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stacked Gaussian-process forecasting for panels of short series", "stackgp"};
    app.require_subcommand(1);

    Overrides o;
    std::string model, forecast_path;
    std::optional<int> horizon;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", o.config, "pipeline config (JSON)");
        if (config_required) c->required();
        sub->add_option("--method", o.method, "stacked, task_gp or ar");
        sub->add_option("--tau", o.tau, "MPE gate threshold");
        sub->add_option("--seed", o.seed, "seed for generation and optimizer restarts");
        sub->add_option("--out", o.out, "output directory");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic panel");
    add_common(synth, true);

    auto* fit = app.add_subcommand("fit", "fit a model and write model.json");
    add_common(fit, true);
    fit->add_option("--data", o.data, "panel file to use instead of the config's data source");

    auto* forecast = app.add_subcommand("forecast", "forecast from a fitted model");
    forecast->add_option("--model", model, "model.json from fit")->required();
    forecast->add_option("--data", o.data, "panel file to use instead of the artifact's data source");
    forecast->add_option("--horizon", horizon, "months ahead (default: the test span)");
    forecast->add_option("--out", o.out, "output directory");

    auto* evaluate = app.add_subcommand("evaluate", "score a forecast against actual loads");
    evaluate->add_option("--forecast", forecast_path, "forecast.csv")->required();
    evaluate->add_option("--actuals", o.data, "panel file holding the actual loads");
    evaluate->add_option("--config", o.config, "config whose data source holds the actual loads");
    evaluate->add_option("--out", o.out, "output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    }

    try {
        if (*synth) return cmd_synth(o, out);
        if (*fit) return cmd_fit(o, out);
        if (*forecast) return cmd_forecast(model, o, horizon, out);
        return cmd_evaluate(forecast_path, o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        switch (e.category()) {
            case ErrorCategory::Config: return kConfig;
            case ErrorCategory::Data: return kData;
            case ErrorCategory::Numerical: return kNumerical;
        }
        return kOther;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOther;
    }
}

}  // namespace stackgp::cli

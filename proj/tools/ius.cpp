#include "ius/pipeline.hpp"
#include "ius/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

using namespace ius;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out_root() {
    const char* env = std::getenv("IUS_OUT_ROOT");
    return env && *env ? env : "ius-out";
}

/// "a.b.c=value": value is read as JSON when it parses, as a string otherwise.
void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(fmt::format("--set expects key=value, got '{}'", assignment));
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    std::string pointer;
    for (const auto& part : split_delimited(key, '.')) pointer += "/" + part;
    doc[json::json_pointer(pointer)] = value;
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::string families;
    std::optional<int> trials;
    std::vector<int> windows;
    std::vector<int> counts;
};

RunConfig load_config(const Options& o) {
    if (o.config.empty()) throw Error("--config is required");
    json doc;
    try {
        doc = json::parse(read_text_file(o.config));
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: {}", o.config, e.what()));
    }
    for (const auto& s : o.sets) apply_override(doc, s);
    if (!o.families.empty()) doc["families"] = o.families == "none" ? "" : o.families;
    if (o.trials) doc["tune"]["trials"] = *o.trials;
    if (!o.windows.empty()) doc["sweep"]["windows"] = o.windows;
    if (!o.counts.empty()) doc["sweep"]["counts"] = o.counts;
    if (o.seed) doc["seed"] = *o.seed;
    return parse_run_config(doc, fs::absolute(o.config).parent_path().string());
}

std::string csv_of(const std::vector<std::pair<int, double>>& rows, std::string_view header) {
    std::string out = fmt::format("{}\n", header);
    for (const auto& [k, v] : rows) out += fmt::format("{},{}\n", k, format_real(v));
    return out;
}

/// Stage artifacts named <stage>-<tag>.<ext> in one directory. Prerequisites
/// are read back when present and computed (and written) otherwise.
class Runner {
public:
    Runner(RunConfig cfg, std::string dir)
        : cfg_(std::move(cfg)), dir_(std::move(dir)), tag_(fmt::format("s{}-{}", cfg_.seed, config_hash(cfg_))) {
        fs::create_directories(dir_);
    }

    [[nodiscard]] std::string path(std::string_view stage, std::string_view ext) const {
        return (fs::path(dir_) / fmt::format("{}-{}.{}", stage, tag_, ext)).string();
    }
    [[nodiscard]] const RunConfig& config() const { return cfg_; }

    AlignedFrame aligned(bool force = false) {
        const auto file = path("aligned", "csv");
        if (!force && fs::exists(file)) return frame_from_csv(read_text_file(file));
        auto frame = ingest_frame(cfg_);
        write_text_file(file, frame_to_csv(frame));
        json info{{"days", frame.day_count()},
                  {"first_day", frame.calendar.front().iso()},
                  {"last_day", frame.calendar.back().iso()},
                  {"features", frame.features},
                  {"edge_policy", to_string(cfg_.edge_policy)},
                  {"metadata", frame.metadata}};
        write_text_file(path("ingest", "json"), info.dump(2) + "\n");
        return frame;
    }

    AlignedFrame textual(bool force = false) {
        const auto file = path("textual", "csv");
        if (!force && fs::exists(file)) return frame_from_csv(read_text_file(file));
        const auto calendar = aligned().calendar;
        const auto stage = build_text_features(cfg_, calendar);
        write_text_file(file, frame_to_csv(stage.features));
        json topics{{"records", stage.records}, {"vocabulary_size", stage.vocab.size()}, {"features", stage.features.features}};
        if (stage.scan.best_k > 0) {
            topics["best_k"] = stage.scan.best_k;
            topics["model"] = topic_model_summary(stage.scan.best_model, cfg_.text.top_n);
            std::vector<std::pair<int, double>> rows;
            for (std::size_t i = 0; i < stage.scan.ks.size(); ++i)
                rows.emplace_back(stage.scan.ks[i], stage.scan.mean_coherence[i]);
            write_text_file(path("coherence", "csv"), csv_of(rows, "k,mean_coherence"));
        }
        write_text_file(path("topics", "json"), topics.dump(2) + "\n");
        return stage.features;
    }

    LagTable lags(bool force = false) {
        const auto file = path("lags", "json");
        if (!force && fs::exists(file)) return lag_table_from_json(json::parse(read_text_file(file)));
        const std::vector<AlignedFrame> parts{aligned(), textual()};
        const auto table = scan_lags(concat(parts), cfg_);
        write_text_file(file, lag_table_to_json(table).dump(2) + "\n");
        write_text_file(path("aic-curves", "csv"), aic_curves_csv(table));
        const auto data = prepare_data(parts[0], parts[1], table, cfg_);
        write_text_file(path("lagged", "csv"), frame_to_csv(data.frame));
        return table;
    }

    PreparedData prepared(bool force_ranking = false) {
        const auto table = lags();
        auto data = prepare_data(aligned(), textual(), table, cfg_);
        const auto file = path("ranking", "json");
        if (!force_ranking && fs::exists(file)) {
            data.ranking = ranking_from_json(json::parse(read_text_file(file)));
        } else {
            data.ranking = rank_quantitative(data, cfg_);
            write_text_file(file, ranking_to_json(data.ranking).dump(2) + "\n");
        }
        return data;
    }

    [[nodiscard]] FeatureSelection selection(const PreparedData& data) const {
        return {data.ranking.kept(), data.textual.empty() ? std::string{} : cfg_.families};
    }

    /// Tuned configuration when a study exists for this config, the configured model otherwise.
    [[nodiscard]] ModelConfig model_config() const {
        const auto file = path("tuned-config", "json");
        if (!fs::exists(file)) return cfg_.model;
        auto c = config_from_json(json::parse(read_text_file(file)), cfg_.model);
        c.epochs = cfg_.model.epochs;
        c.patience = cfg_.model.patience;
        c.seed = cfg_.seed;
        return c;
    }

private:
    RunConfig cfg_;
    std::string dir_;
    std::string tag_;
};

json model_document(const ModelConfig& c, const FeatureSelection& sel, const EvalOutcome& out) {
    return {{"format", "ius.model/1"},
            {"config", config_to_json(c)},
            {"quantitative", sel.quantitative},
            {"families", sel.families},
            {"rows", out.rows},
            {"scaling", scaling_to_json(out.scaling)},
            {"best_epoch", out.training.best_epoch},
            {"stopped_early", out.training.stopped_early},
            {"params", params_to_json(out.training.params)}};
}

void say(std::string_view command, const std::string& file, const std::string& detail) {
    fmt::print("ius {}: wrote {} ({})\n", command, file, detail);
}

int run(const std::string& command, const Options& o) {
    const auto cfg = load_config(o);
    Runner r(cfg, o.out.empty() ? default_out_root() : o.out);

    if (command == "ingest") {
        const auto f = r.aligned(true);
        say(command, r.path("aligned", "csv"), fmt::format("{} features x {} days", f.feature_count(), f.day_count()));
    } else if (command == "features") {
        const auto f = r.textual(true);
        say(command, r.path("textual", "csv"), fmt::format("{} textual features", f.feature_count()));
    } else if (command == "lags") {
        const auto t = r.lags(true);
        say(command, r.path("lags", "json"), fmt::format("{} features, max lag {}", t.entries.size(), t.max_lag()));
    } else if (command == "rfe") {
        const auto d = r.prepared(true);
        say(command, r.path("ranking", "json"), fmt::format("kept {}", fmt::join(d.ranking.kept(), " ")));
    } else if (command == "tune") {
        const auto d = r.prepared();
        std::string journal;
        const auto study = tune_model(d, r.selection(d), cfg, [&](const json& j) { journal += j.dump() + "\n"; });
        write_text_file(r.path("journal", "jsonl"), journal);
        auto study_doc = study_to_json(study);
        study_doc["settings"] = {{"trials", cfg.tune.trials}, {"epochs", cfg.tune.epochs}};
        write_text_file(r.path("study", "json"), study_doc.dump(2) + "\n");
        write_text_file(r.path("trials", "csv"), trial_table_csv(study));
        const auto& best = study.trials[*study.best()];
        write_text_file(r.path("tuned-config", "json"), config_to_json(best.config).dump(2) + "\n");
        say(command, r.path("study", "json"),
            fmt::format("best trial {} validation MAE {}", best.id, format_real(*best.value)));
    } else if (command == "train") {
        const auto d = r.prepared();
        const auto sel = r.selection(d);
        const auto c = r.model_config();
        const auto out = evaluate_feature_set(d, sel, c);
        write_text_file(r.path("model", "json"), model_document(c, sel, out).dump() + "\n");
        write_text_file(r.path("loss", "csv"), loss_history_csv(out.training));
        say(command, r.path("model", "json"),
            fmt::format("best epoch {} of {}", out.training.best_epoch, out.training.train_loss.size()));
    } else if (command == "evaluate") {
        const auto d = r.prepared();
        const auto file = r.path("model", "json");
        if (!fs::exists(file)) throw Error(fmt::format("no trained model at {}; run train first", file));
        const auto doc = json::parse(read_text_file(file));
        if (doc.value("format", std::string{}) != "ius.model/1") throw Error(file + " is not an ius.model/1 document");
        const auto c = config_from_json(doc.at("config"));
        const FeatureSelection sel{doc.at("quantitative").get<std::vector<std::string>>(),
                                   doc.at("families").get<std::string>()};
        const auto inputs = model_inputs(d, sel, c.window);
        auto report = forecast_report(d, inputs, params_from_json(doc.at("params")), "bilstm",
                                      {{"model", config_to_json(c)}, {"features", inputs.normalized.frame.features}});
        ForestParams fp = cfg.rfe.forest;
        fp.n_trees = cfg.comparator_trees;
        const std::vector<ForecastReport> comparators{persistence_report(d, c.window),
                                                      forest_report(d, sel, c.window, fp)};
        const auto summary = comparison_json(report, comparators, cfg);
        write_text_file(r.path("forecast", "csv"), report_curve_csv(report));
        write_text_file(r.path("report", "json"), summary.dump(2) + "\n");
        say(command, r.path("report", "json"),
            fmt::format("MAE {} RMSE {}", format_real(report.mae), format_real(report.rmse)));
    } else if (command == "ablate") {
        const auto d = r.prepared();
        const auto cells = ablation_run(d, d.ranking.kept(), r.model_config());
        write_text_file(r.path("ablation", "csv"), ablation_csv(cells));
        say(command, r.path("ablation", "csv"), fmt::format("{} combinations", cells.size()));
    } else if (command == "sweep-window") {
        const auto d = r.prepared();
        const auto rows = window_sweep(d, r.selection(d), r.model_config(), cfg.sweep_windows);
        write_text_file(r.path("window-sweep", "csv"), sweep_csv(rows, "window"));
        say(command, r.path("window-sweep", "csv"), fmt::format("{} window sizes", rows.size()));
    } else if (command == "sweep-rfe") {
        const auto d = r.prepared();
        auto counts = cfg.sweep_counts;
        if (counts.empty())
            for (std::size_t k = 1; k <= d.quantitative.size(); ++k) counts.push_back(static_cast<int>(k));
        const auto rows = rfe_sweep(d, r.selection(d).families, r.model_config(), counts);
        write_text_file(r.path("rfe-sweep", "csv"), sweep_csv(rows, "features"));
        say(command, r.path("rfe-sweep", "csv"), fmt::format("{} feature counts", rows.size()));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exchange-rate forecasting with fused quantitative and textual features"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "Output directory (default: $IUS_OUT_ROOT or ./ius-out)");
        sub->add_option("--seed", o.seed, "Overrides the configured seed");
        sub->add_option("--set", o.sets, "Config override key.path=value (repeatable)");
        return sub;
    };
    common(app.add_subcommand("ingest", "Align every series onto the trading calendar"));
    common(app.add_subcommand("features", "Topic scan and daily textual features"));
    common(app.add_subcommand("lags", "AIC lag scan per feature"));
    common(app.add_subcommand("rfe", "Rank quantitative features by recursive elimination"));
    common(app.add_subcommand("tune", "Hyperparameter search"))->add_option("--trials", o.trials, "Number of trials");
    for (const char* name : {"train", "evaluate"})
        common(app.add_subcommand(name, name == std::string("train") ? "Train the Bi-LSTM" : "Score the trained model"))
            ->add_option("--families", o.families, "Textual families, e.g. ABCD, or 'none'");
    common(app.add_subcommand("ablate", "All 16 textual family combinations"));
    common(app.add_subcommand("sweep-window", "Test error per window size"))
        ->add_option("--windows", o.windows, "Window sizes")
        ->delimiter(',');
    common(app.add_subcommand("sweep-rfe", "Test error per retained feature count"))
        ->add_option("--counts", o.counts, "Feature counts")
        ->delimiter(',');

    auto* simgen = app.add_subcommand("simgen", "Write a synthetic workspace");
    std::uint64_t sim_seed = 1;
    std::optional<int> sim_days;
    std::optional<double> sim_rho;
    simgen->add_option("--out", o.out, "Workspace directory (default: <out root>/simgen-s<seed>)");
    simgen->add_option("--seed", sim_seed, "Generator seed");
    simgen->add_option("--days", sim_days, "Number of trading days");
    simgen->add_option("--rho", sim_rho, "Text signal strength in [0, 1]");

    CLI11_PARSE(app, argc, argv);
    const auto* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    try {
        if (command == "simgen") {
            auto spec = default_synth_spec(sim_seed);
            if (sim_days) spec.n_days = *sim_days;
            if (sim_rho) spec.rho = *sim_rho;
            const auto dir = o.out.empty() ? (fs::path(default_out_root()) / fmt::format("simgen-s{}", sim_seed)).string() : o.out;
            const auto ws = write_workspace(spec, dir);
            say(command, ws.config_path, fmt::format("{} days, seed {}", spec.n_days, spec.seed));
            return 0;
        }
        return run(command, o);
    } catch (const std::exception& e) {
        std::cerr << fmt::format("ius {}: error: {}\n", command, e.what());
        return 1;
    }
}

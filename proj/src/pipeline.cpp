#include "ius/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace ius {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw Error(fmt::format("config: '{}' must be an object", where));
    for (const auto& [key, _] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw Error(fmt::format("config: unknown key '{}' in {}", key, where));
}

json section(const json& doc, const char* key) { return doc.contains(key) ? doc.at(key) : json::object(); }

json forest_json(const ForestParams& f) {
    return {{"n_trees", f.n_trees},
            {"max_depth", f.max_depth},
            {"min_leaf", f.min_leaf},
            {"features_per_split", f.features_per_split},
            {"bootstrap", f.bootstrap}};
}

ForestParams forest_from(const json& doc, ForestParams base) {
    check_keys(doc, {"n_trees", "max_depth", "min_leaf", "features_per_split", "bootstrap"}, "rfe.forest");
    base.n_trees = doc.value("n_trees", base.n_trees);
    base.max_depth = doc.value("max_depth", base.max_depth);
    base.min_leaf = doc.value("min_leaf", base.min_leaf);
    base.features_per_split = doc.value("features_per_split", base.features_per_split);
    base.bootstrap = doc.value("bootstrap", base.bootstrap);
    return base;
}

std::string_view to_string(AicSampleSize s) { return s == AicSampleSize::Raw ? "raw" : "effective"; }

AicSampleSize parse_sample_size(const std::string& s) {
    if (s == "raw") return AicSampleSize::Raw;
    if (s == "effective") return AicSampleSize::Effective;
    throw Error(fmt::format("config: unknown AIC sample size '{}'", s));
}

}  // namespace

std::string_view to_string(LagAlignment a) { return a == LagAlignment::Lag ? "lag" : "next-day"; }

LagAlignment parse_lag_alignment(std::string_view s) {
    if (s == "lag") return LagAlignment::Lag;
    if (s == "next-day") return LagAlignment::NextDay;
    throw Error(fmt::format("config: unknown lag alignment '{}'", s));
}

std::string RunConfig::resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).string();
}

json RunConfig::to_json() const {
    json series_doc = json::array();
    for (const auto& s : series)
        series_doc.push_back(
            {{"name", s.name}, {"path", s.path}, {"date_column", s.date_column}, {"value_column", s.value_column}});
    json text_doc{{"min_count", text.min_count},
                  {"k_min", text.k_min},
                  {"k_max", text.k_max},
                  {"iterations", text.lda.iterations},
                  {"alpha", text.lda.alpha},
                  {"beta", text.lda.beta},
                  {"top_n", text.top_n},
                  {"selected_topics", text.selected_topics},
                  {"fill_sentiment", text.fill.sentiment},
                  {"fill_movement", text.fill.movement}};
    json model_doc = config_to_json(model);
    model_doc.erase("seed");
    return {{"series", series_doc},
            {"target", target},
            {"texts", texts},
            {"calendar", {{"source", calendar_source}, {"edge_policy", ius::to_string(edge_policy)}}},
            {"text", text_doc},
            {"lags",
             {{"p_min", lags.p_min},
              {"p_max", lags.p_max},
              {"sample_size", to_string(lags.sample_size)},
              {"alignment", to_string(lags.alignment)}}},
            {"rfe", {{"keep", rfe.keep}, {"step", rfe.step}, {"forest", forest_json(rfe.forest)}}},
            {"split", {{"train_days", train_days}, {"validation_share", validation_share}}},
            {"model", model_doc},
            {"tune",
             {{"trials", tune.trials},
              {"epochs", tune.epochs},
              {"pruning", tune.pruner.enabled},
              {"n_startup", tune.pruner.n_startup},
              {"n_warmup", tune.pruner.n_warmup}}},
            {"families", families},
            {"comparators", {{"forest_trees", comparator_trees}}},
            {"dm", {{"loss", ius::to_string(dm_loss)}, {"horizon", dm_horizon}, {"small_sample", dm_small_sample}}},
            {"sweep", {{"windows", sweep_windows}, {"counts", sweep_counts}}},
            {"seed", seed}};
}

void RunConfig::validate() const {
    if (series.empty()) throw Error("config: no series");
    std::set<std::string> names;
    for (const auto& s : series) {
        if (s.name.empty() || s.path.empty()) throw Error("config: every series needs a name and a path");
        if (!names.insert(s.name).second) throw Error(fmt::format("config: duplicate series '{}'", s.name));
    }
    if (!names.contains(target)) throw Error(fmt::format("config: target '{}' is not among the series", target));
    if (!calendar_source.empty() && !names.contains(calendar_source))
        throw Error(fmt::format("config: calendar source '{}' is not among the series", calendar_source));
    if (text.k_min < 2 || text.k_max < text.k_min) throw Error("config: topic range must satisfy 2 <= k_min <= k_max");
    if (text.min_count < 1) throw Error("config: min_count must be >= 1");
    if (lags.p_min < 0 || lags.p_max < lags.p_min) throw Error("config: lag range must satisfy 0 <= p_min <= p_max");
    if (rfe.keep < 1 || rfe.step < 1) throw Error("config: rfe keep and step must be >= 1");
    rfe.forest.validate();
    if (train_days < 2) throw Error("config: train_days must be >= 2");
    if (!(validation_share >= 0.0 && validation_share < 1.0)) throw Error("config: validation_share must lie in [0, 1)");
    model.validate();
    if (tune.trials < 1 || tune.epochs < 1) throw Error("config: tune trials and epochs must be >= 1");
    for (char f : families)
        if (f < 'A' || f > 'D') throw Error(fmt::format("config: unknown textual family '{}'", f));
    if (comparator_trees < 1) throw Error("config: comparator forest needs at least one tree");
    if (dm_horizon < 1) throw Error("config: DM horizon must be >= 1");
    for (int w : sweep_windows)
        if (!is_allowed_window(w)) throw Error(fmt::format("config: window {} is not allowed", w));
    for (int k : sweep_counts)
        if (k < 1) throw Error("config: sweep counts must be >= 1");
}

RunConfig parse_run_config(const json& doc, const std::string& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    try {
        check_keys(doc, {"series", "target", "texts", "calendar", "text", "lags", "rfe", "split", "model", "tune",
                         "families", "comparators", "dm", "sweep", "seed"},
                   "config");
        for (const auto& s : doc.at("series")) {
            check_keys(s, {"name", "path", "date_column", "value_column"}, "series");
            c.series.push_back({s.at("name").get<std::string>(), s.at("path").get<std::string>(),
                                s.value("date_column", "date"), s.value("value_column", "value")});
        }
        c.target = doc.at("target").get<std::string>();
        c.texts = doc.value("texts", std::string{});
        if (!doc.contains("seed") || !doc.at("seed").is_number_integer() || doc.at("seed").get<std::int64_t>() < 0)
            throw Error("config: a non-negative integer 'seed' is required");
        c.seed = doc.at("seed").get<std::uint64_t>();

        const auto cal = section(doc, "calendar");
        check_keys(cal, {"source", "edge_policy"}, "calendar");
        c.calendar_source = cal.value("source", std::string{});
        c.edge_policy = parse_edge_policy(cal.value("edge_policy", std::string(to_string(c.edge_policy))));

        const auto text = section(doc, "text");
        check_keys(text, {"min_count", "k_min", "k_max", "iterations", "alpha", "beta", "top_n", "selected_topics",
                          "fill_sentiment", "fill_movement"},
                   "text");
        c.text.min_count = text.value("min_count", c.text.min_count);
        c.text.k_min = text.value("k_min", c.text.k_min);
        c.text.k_max = text.value("k_max", c.text.k_max);
        c.text.lda.iterations = text.value("iterations", c.text.lda.iterations);
        c.text.lda.alpha = text.value("alpha", c.text.lda.alpha);
        c.text.lda.beta = text.value("beta", c.text.lda.beta);
        c.text.top_n = text.value("top_n", c.text.top_n);
        c.text.selected_topics = text.value("selected_topics", c.text.selected_topics);
        c.text.fill.sentiment = text.value("fill_sentiment", c.text.fill.sentiment);
        c.text.fill.movement = text.value("fill_movement", c.text.fill.movement);

        const auto lags = section(doc, "lags");
        check_keys(lags, {"p_min", "p_max", "sample_size", "alignment"}, "lags");
        c.lags.p_min = lags.value("p_min", c.lags.p_min);
        c.lags.p_max = lags.value("p_max", c.lags.p_max);
        c.lags.sample_size = parse_sample_size(lags.value("sample_size", std::string("raw")));
        c.lags.alignment = parse_lag_alignment(lags.value("alignment", std::string("lag")));

        const auto rfe = section(doc, "rfe");
        check_keys(rfe, {"keep", "step", "forest"}, "rfe");
        c.rfe.keep = rfe.value("keep", c.rfe.keep);
        c.rfe.step = rfe.value("step", c.rfe.step);
        c.rfe.forest = forest_from(section(rfe, "forest"), c.rfe.forest);

        const auto split = section(doc, "split");
        check_keys(split, {"train_days", "validation_share"}, "split");
        c.train_days = split.value("train_days", c.train_days);
        c.validation_share = split.value("validation_share", c.validation_share);

        const auto model = section(doc, "model");
        if (model.contains("seed")) throw Error("config: the model seed follows the top-level seed");
        c.model = config_from_json(model, c.model);

        const auto tune = section(doc, "tune");
        check_keys(tune, {"trials", "epochs", "pruning", "n_startup", "n_warmup"}, "tune");
        c.tune.trials = tune.value("trials", c.tune.trials);
        c.tune.epochs = tune.value("epochs", c.tune.epochs);
        c.tune.pruner.enabled = tune.value("pruning", c.tune.pruner.enabled);
        c.tune.pruner.n_startup = tune.value("n_startup", c.tune.pruner.n_startup);
        c.tune.pruner.n_warmup = tune.value("n_warmup", c.tune.pruner.n_warmup);

        c.families = doc.value("families", c.families);
        const auto comp = section(doc, "comparators");
        check_keys(comp, {"forest_trees"}, "comparators");
        c.comparator_trees = comp.value("forest_trees", c.comparator_trees);

        const auto dm = section(doc, "dm");
        check_keys(dm, {"loss", "horizon", "small_sample"}, "dm");
        c.dm_loss = parse_dm_loss(dm.value("loss", std::string(to_string(c.dm_loss))));
        c.dm_horizon = dm.value("horizon", c.dm_horizon);
        c.dm_small_sample = dm.value("small_sample", c.dm_small_sample);

        const auto sweep = section(doc, "sweep");
        check_keys(sweep, {"windows", "counts"}, "sweep");
        c.sweep_windows = sweep.value("windows", c.sweep_windows);
        c.sweep_counts = sweep.value("counts", c.sweep_counts);
    } catch (const json::exception& e) {
        throw Error(fmt::format("config: {}", e.what()));
    }
    c.model.seed = c.seed;
    c.text.lda.seed = c.seed;
    c.rfe.forest.seed = c.seed;
    c.validate();
    return c;
}

RunConfig read_run_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: {}", path, e.what()));
    }
    return parse_run_config(doc, fs::path(path).parent_path().string());
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    auto doc = cfg.to_json();
    doc.erase("tune");
    doc.erase("sweep");
    return fmt::format("{:016x}", fnv1a64(doc.dump()));
}

// ---------------------------------------------------------------------------

AlignedFrame ingest_frame(const RunConfig& cfg) {
    std::vector<RawSeries> series;
    for (const auto& s : cfg.series)
        series.push_back(read_series_file(cfg.resolve(s.path), s.date_column, s.value_column, s.name));
    const auto& source = cfg.calendar_source.empty() ? cfg.target : cfg.calendar_source;
    const auto it = std::find_if(series.begin(), series.end(), [&](const RawSeries& s) { return s.name == source; });
    const auto frame = align(series, it->calendar(), cfg.edge_policy);
    std::vector<std::string> order{cfg.target};
    for (const auto& f : frame.features)
        if (f != cfg.target) order.push_back(f);
    auto out = frame.select(order);
    out.metadata = frame.metadata;
    return out;
}

TextStage build_text_features(const RunConfig& cfg, const TradingCalendar& calendar) {
    TextStage out;
    if (cfg.texts.empty()) {
        out.features.calendar = calendar;
        out.features.values = Matrix(0, calendar.size());
        return out;
    }
    json doc;
    try {
        doc = json::parse(read_text_file(cfg.resolve(cfg.texts)));
    } catch (const json::exception& e) {
        throw Error(fmt::format("{}: {}", cfg.texts, e.what()));
    }
    auto records = records_from_json(doc);
    const auto vocab = tokenize_records(records, default_stopwords(), cfg.text.min_count);
    std::vector<std::vector<int>> bags;
    bags.reserve(records.size());
    for (const auto& r : records) bags.push_back(r.tokens);
    out.scan = select_topic_count(bags, vocab.size(), cfg.text.k_min, cfg.text.k_max, cfg.text.lda, cfg.text.top_n);
    std::vector<int> topics = cfg.text.selected_topics;
    if (topics.empty()) {
        topics.resize(static_cast<std::size_t>(out.scan.best_k));
        std::iota(topics.begin(), topics.end(), 1);
    }
    for (int k : topics)
        if (k < 1 || k > out.scan.best_k)
            throw Error(fmt::format("selected topic {} outside 1..{}", k, out.scan.best_k));
    out.features = assemble_textual_features(records, out.scan.best_model, topics, calendar, cfg.text.fill);
    out.vocab = vocab.words;
    out.records = records.size();
    return out;
}

LagTable scan_lags(const AlignedFrame& combined, const RunConfig& cfg) {
    return select_lags(combined, cfg.target, cfg.lags.p_min, cfg.lags.p_max, cfg.lags.sample_size);
}

LagTable aligned_lags(const LagTable& lags, LagAlignment alignment) {
    LagTable out = lags;
    if (alignment == LagAlignment::NextDay)
        for (auto& e : out.entries) e.lag = std::max(e.lag - 1, 0);
    return out;
}

PreparedData prepare_data(const AlignedFrame& quantitative, const AlignedFrame& textual, const LagTable& lags,
                          const RunConfig& cfg) {
    PreparedData d;
    d.target = cfg.target;
    d.validation_share = cfg.validation_share;
    for (const auto& f : quantitative.features)
        if (f != cfg.target) d.quantitative.push_back(f);
    d.textual = textual.features;
    std::vector<AlignedFrame> parts{quantitative};
    if (textual.feature_count() > 0) parts.push_back(textual);
    const auto combined = concat(parts);
    const auto applied = aligned_lags(lags, cfg.lags.alignment);
    d.frame = apply_lags(combined, applied, cfg.target);
    const int trimmed = applied.max_lag();
    d.train_end = cfg.train_days - trimmed;
    if (d.train_end < 2 || d.train_end >= d.frame.day_count())
        throw Error(fmt::format("train_days={} leaves no test days after trimming {} lagged days from {}",
                                cfg.train_days, trimmed, combined.day_count()));
    return d;
}

ImportanceRanking rank_quantitative(const PreparedData& data, const RunConfig& cfg) {
    if (data.quantitative.empty()) throw Error("no quantitative features to rank");
    const auto train = data.frame.days(0, data.train_end);
    const RowVector y = train.row(data.target);
    const int keep = std::min<int>(cfg.rfe.keep, static_cast<int>(data.quantitative.size()));
    return rfe(train.select(data.quantitative), {y.data(), static_cast<std::size_t>(y.size())}, keep, cfg.rfe.step,
               cfg.rfe.forest);
}

std::vector<std::string> selected_rows(const PreparedData& data, const FeatureSelection& sel) {
    std::vector<std::string> rows{data.target};
    for (const auto& q : sel.quantitative) {
        if (std::find(data.quantitative.begin(), data.quantitative.end(), q) == data.quantitative.end())
            throw Error(fmt::format("'{}' is not a quantitative feature", q));
        rows.push_back(q);
    }
    for (char fam : sel.families) {
        if (fam < 'A' || fam > 'D') throw Error(fmt::format("unknown textual family '{}'", fam));
        bool any = false;
        for (const auto& t : data.textual)
            if (textual_family(t) == fam) {
                rows.push_back(t);
                any = true;
            }
        if (!any) throw Error(fmt::format("no textual features of family {}", fam));
    }
    return rows;
}

ModelInputs model_inputs(const PreparedData& data, const FeatureSelection& sel, int window) {
    ModelInputs in;
    const auto rows = selected_rows(data, sel);
    in.normalized = minmax_normalize(data.frame.select(rows));
    auto samples = make_windows(in.normalized.frame, data.target, window);
    std::vector<WindowSample> fit;
    for (auto& s : samples) (s.t + 1 < data.train_end ? fit : in.samples.test).push_back(std::move(s));
    const auto n_val = static_cast<std::size_t>(std::lround(data.validation_share * static_cast<double>(fit.size())));
    if (fit.size() < 2 || n_val >= fit.size())
        throw Error(fmt::format("window {} leaves {} training samples", window, fit.size()));
    if (in.samples.test.empty()) throw Error(fmt::format("window {} leaves no test samples", window));
    in.samples.train.assign(std::make_move_iterator(fit.begin()),
                            std::make_move_iterator(fit.end() - static_cast<std::ptrdiff_t>(n_val)));
    in.samples.validation.assign(std::make_move_iterator(fit.end() - static_cast<std::ptrdiff_t>(n_val)),
                                 std::make_move_iterator(fit.end()));
    return in;
}

namespace {

std::vector<double> test_actuals(const PreparedData& data, std::span<const WindowSample> test,
                                 std::vector<std::string>& days) {
    const Index row = data.frame.require(data.target);
    std::vector<double> actual;
    for (const auto& s : test) {
        actual.push_back(data.frame.values(row, s.t + 1));
        days.push_back(data.frame.calendar[s.t + 1].iso());
    }
    return actual;
}

}  // namespace

ForecastReport forecast_report(const PreparedData& data, const ModelInputs& inputs, const LstmParams& params,
                               std::string label, json config) {
    std::vector<std::string> days;
    auto actual = test_actuals(data, inputs.samples.test, days);
    auto pred = predict_series(params, inputs.samples.test, inputs.normalized.scaling, data.target);
    return make_report(std::move(label), std::move(days), std::move(pred), std::move(actual), std::move(config));
}

EvalOutcome evaluate_feature_set(const PreparedData& data, const FeatureSelection& sel, const ModelConfig& model,
                                 std::string label) {
    model.validate();
    const auto inputs = model_inputs(data, sel, model.window);
    EvalOutcome out;
    out.rows = inputs.normalized.frame.features;
    out.scaling = inputs.normalized.scaling;
    out.training = train(inputs.samples.train, model, inputs.samples.validation);
    out.report = forecast_report(data, inputs, out.training.params, std::move(label),
                                 {{"model", config_to_json(model)}, {"features", out.rows}});
    return out;
}

ForecastReport persistence_report(const PreparedData& data, int window) {
    const Index row = data.frame.require(data.target);
    std::vector<std::string> days;
    std::vector<double> pred, actual;
    for (Index t = std::max<Index>(window - 1, data.train_end - 1); t + 1 < data.frame.day_count(); ++t) {
        pred.push_back(data.frame.values(row, t));
        actual.push_back(data.frame.values(row, t + 1));
        days.push_back(data.frame.calendar[t + 1].iso());
    }
    return make_report("persistence", std::move(days), std::move(pred), std::move(actual), {{"window", window}});
}

ForecastReport forest_report(const PreparedData& data, const FeatureSelection& sel, int window,
                             const ForestParams& params) {
    const auto inputs = model_inputs(data, sel, window);
    const auto flatten = [](std::span<const WindowSample> samples) {
        Matrix X(static_cast<Index>(samples.size()), samples.empty() ? 0 : samples[0].input.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            X.row(static_cast<Index>(i)) = samples[i].input.reshaped().transpose();
        return X;
    };
    std::vector<WindowSample> fit = inputs.samples.train;
    fit.insert(fit.end(), inputs.samples.validation.begin(), inputs.samples.validation.end());
    Vector y(static_cast<Index>(fit.size()));
    for (std::size_t i = 0; i < fit.size(); ++i) y(static_cast<Index>(i)) = fit[i].target;
    const auto forest = fit_forest(flatten(fit), y, params);
    const Vector z = predict_rows(forest, flatten(inputs.samples.test));
    std::vector<std::string> days;
    auto actual = test_actuals(data, inputs.samples.test, days);
    std::vector<double> pred;
    for (Index i = 0; i < z.size(); ++i) pred.push_back(inputs.normalized.scaling.denormalize(data.target, z(i)));
    return make_report("random-forest", std::move(days), std::move(pred), std::move(actual),
                       {{"window", window}, {"features", inputs.normalized.frame.features}, {"forest", forest_json(params)}});
}

json comparison_json(ForecastReport& model, const std::vector<ForecastReport>& comparators, const RunConfig& cfg) {
    if (comparators.empty()) throw Error("comparison needs at least one comparator");
    attach_improvement(model, comparators.front());
    json tests = json::array();
    json others = json::array();
    const auto errors = model.errors();
    for (const auto& c : comparators) {
        if (c.days != model.days) throw Error(fmt::format("comparator '{}' covers different days", c.label));
        const auto dm = dm_test(errors, c.errors(), cfg.dm_horizon, cfg.dm_loss, cfg.dm_small_sample);
        tests.push_back({{"model", model.label},
                         {"comparator", c.label},
                         {"statistic", dm.statistic},
                         {"p_value", dm.p_value},
                         {"loss", to_string(dm.loss)},
                         {"horizon", dm.horizon},
                         {"degenerate", dm.degenerate},
                         {"small_sample_corrected", dm.small_sample_corrected}});
        others.push_back(report_summary_json(c));
    }
    return {{"model", report_summary_json(model)},
            {"improvement_reference", comparators.front().label},
            {"comparators", others},
            {"diebold_mariano", tests}};
}

std::vector<AblationCell> ablation_run(const PreparedData& data, const std::vector<std::string>& quantitative,
                                       const ModelConfig& model) {
    if (data.textual.empty()) throw Error("ablation needs textual features");
    const std::vector<char> families{'A', 'B', 'C', 'D'};
    std::vector<AblationCell> cells;
    for (const auto& combo : family_combinations(families)) {
        const auto out = evaluate_feature_set(data, {quantitative, std::string(combo.begin(), combo.end())}, model);
        AblationCell cell;
        cell.label = combination_label(combo);
        cell.families = combo;
        cell.mae = out.report.mae;
        cell.rmse = out.report.rmse;
        cells.push_back(std::move(cell));
    }
    rank_cells(cells);
    return cells;
}

std::vector<SweepRow> window_sweep(const PreparedData& data, const FeatureSelection& sel, const ModelConfig& model,
                                   const std::vector<int>& sizes) {
    std::vector<SweepRow> out;
    for (int w : sizes) {
        ModelConfig c = model;
        c.window = w;
        const auto r = evaluate_feature_set(data, sel, c);
        out.push_back({w, r.report.mae, r.report.rmse});
    }
    return out;
}

std::vector<SweepRow> rfe_sweep(const PreparedData& data, const std::string& families, const ModelConfig& model,
                                const std::vector<int>& counts) {
    if (data.ranking.entries.empty()) throw Error("rfe sweep needs an importance ranking");
    std::vector<SweepRow> out;
    for (int k : counts) {
        if (k < 1 || static_cast<std::size_t>(k) > data.ranking.entries.size())
            throw Error(fmt::format("feature count {} outside 1..{}", k, data.ranking.entries.size()));
        const auto r = evaluate_feature_set(data, {data.ranking.top(static_cast<std::size_t>(k)), families}, model);
        out.push_back({k, r.report.mae, r.report.rmse});
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view column) {
    std::string out = fmt::format("{},mae,rmse\n", column);
    for (const auto& r : rows) out += fmt::format("{},{},{}\n", r.value, format_real(r.mae), format_real(r.rmse));
    return out;
}

StudyState tune_model(const PreparedData& data, const FeatureSelection& sel, const RunConfig& cfg,
                      const JournalSink& journal) {
    std::map<int, ModelInputs> cache;
    const Objective objective = [&](const ModelConfig& c, TrialContext& ctx) {
        auto it = cache.find(c.window);
        if (it == cache.end()) it = cache.emplace(c.window, model_inputs(data, sel, c.window)).first;
        const auto& in = it->second;
        const auto result = train(in.samples.train, c, in.samples.validation, [&](int epoch, double loss) {
            ctx.report(epoch, loss);
            return true;
        });
        const auto pred = predict_series(result.params, in.samples.validation, in.normalized.scaling, data.target);
        std::vector<double> actual;
        for (const auto& s : in.samples.validation)
            actual.push_back(in.normalized.scaling.denormalize(data.target, s.target));
        return mae(pred, actual);
    };
    ModelConfig base = cfg.model;
    base.epochs = cfg.tune.epochs;
    return optimize(objective, SearchSpace{}, cfg.tune.trials, cfg.seed, cfg.tune.pruner, base, {}, journal);
}

}  // namespace ius

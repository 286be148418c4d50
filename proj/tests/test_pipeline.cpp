#include "doctest.h"

#include "ius/pipeline.hpp"
#include "ius/synth.hpp"

#include <filesystem>

using namespace ius;
namespace fs = std::filesystem;

namespace {

nlohmann::json workspace_config(const std::string& dir, std::uint64_t seed) {
    auto spec = default_synth_spec(seed);
    spec.n_days = 200;
    spec.noise_features = 4;
    const auto ws = write_workspace(spec, dir);
    auto doc = nlohmann::json::parse(read_text_file(ws.config_path));
    doc["text"] = {{"k_max", 4}, {"iterations", 50}};
    doc["split"] = {{"train_days", 140}};
    doc["rfe"] = {{"keep", 4}, {"forest", {{"n_trees", 20}}}};
    doc["model"] = {{"hidden", 4}, {"fc", 4}, {"epochs", 3}, {"window", 5}, {"batch", 16}};
    return doc;
}

struct Fixture {
    RunConfig cfg;
    PreparedData data;
    LagTable lags;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        const auto dir = (fs::temp_directory_path() / "ius_test_pipeline").string();
        fs::remove_all(dir);
        Fixture out;
        out.cfg = parse_run_config(workspace_config(dir, 4), dir);
        const auto q = ingest_frame(out.cfg);
        const auto text = build_text_features(out.cfg, q.calendar);
        const std::vector<AlignedFrame> parts{q, text.features};
        out.lags = scan_lags(concat(parts), out.cfg);
        out.data = prepare_data(q, text.features, out.lags, out.cfg);
        out.data.ranking = rank_quantitative(out.data, out.cfg);
        return out;
    }();
    return f;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("run config parsing") {
    const nlohmann::json minimal{{"series", {{{"name", "y"}, {"path", "y.csv"}}}}, {"target", "y"}, {"seed", 3}};
    const auto c = parse_run_config(minimal, "/data");
    CHECK(c.resolve("y.csv") == "/data/y.csv");
    CHECK(c.resolve("/abs/y.csv") == "/abs/y.csv");
    CHECK(c.model.seed == 3);
    CHECK(c.text.lda.seed == 3);
    CHECK(c.rfe.forest.seed == 3);
    CHECK(c.lags.p_max == 10);
    CHECK(c.train_days == 315);
    CHECK(config_hash(c).size() == 16);

    // the effective document parses back to the same hash
    auto round = c.to_json();
    CHECK(config_hash(parse_run_config(round, "/elsewhere")) == config_hash(c));
    round["tune"]["trials"] = 7;
    round["sweep"]["windows"] = {3};
    CHECK(config_hash(parse_run_config(round, "/data")) == config_hash(c));
    round["lags"]["p_max"] = 5;
    CHECK(config_hash(parse_run_config(round, "/data")) != config_hash(c));

    auto bad = minimal;
    bad.erase("seed");
    CHECK_THROWS_WITH_AS(parse_run_config(bad, ""), doctest::Contains("seed"), Error);
    bad = minimal;
    bad["lagz"] = 1;
    CHECK_THROWS_WITH_AS(parse_run_config(bad, ""), doctest::Contains("unknown key 'lagz'"), Error);
    bad = minimal;
    bad["target"] = "x";
    CHECK_THROWS_AS(parse_run_config(bad, ""), Error);
    bad = minimal;
    bad["model"] = {{"fc", 64}, {"hidden", 8}};
    CHECK_THROWS_AS(parse_run_config(bad, ""), Error);
    bad = minimal;
    bad["lags"] = {{"alignment", "sideways"}};
    CHECK_THROWS_AS(parse_run_config(bad, ""), Error);
    CHECK_THROWS_AS(read_run_config("/nonexistent/config.json"), Error);
}

TEST_CASE("prepared data layout") {
    const auto& f = fixture();
    const auto& d = f.data;
    CHECK(d.frame.features.front() == "target");
    CHECK(d.quantitative.size() == 9);
    CHECK(d.textual.size() >= 8);
    CHECK(d.frame.day_count() == 200 - f.lags.max_lag());
    CHECK(d.train_end == 140 - f.lags.max_lag());
    CHECK(d.ranking.kept().size() == 4);
    for (const auto& e : d.ranking.entries) CHECK(textual_family(e.feature) == 0);

    const auto applied = aligned_lags(f.lags, LagAlignment::NextDay);
    for (std::size_t i = 0; i < applied.entries.size(); ++i)
        CHECK(applied.entries[i].lag == std::max(f.lags.entries[i].lag - 1, 0));
}

TEST_CASE("feature selection and sample split") {
    const auto& d = fixture().data;
    const auto rows = selected_rows(d, {{d.quantitative[0]}, "AC"});
    CHECK(rows.front() == d.target);
    CHECK(rows[1] == d.quantitative[0]);
    CHECK(rows.size() == 2 + 4);  // families A and C hold two source rows each
    CHECK_THROWS_AS(selected_rows(d, {{"news-sentiment"}, ""}), Error);
    CHECK_THROWS_AS(selected_rows(d, {{}, "E"}), Error);

    const auto in = model_inputs(d, {{}, "ABCD"}, 5);
    const auto& s = in.samples;
    REQUIRE(!s.train.empty());
    REQUIRE(!s.validation.empty());
    CHECK(s.train.back().t < s.validation.front().t);
    CHECK(s.validation.back().t + 1 < d.train_end);
    CHECK(s.test.front().t + 1 == d.train_end);
    CHECK(s.test.back().t + 2 == d.frame.day_count());
    const auto fit = s.train.size() + s.validation.size();
    CHECK(s.validation.size() == static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(fit))));
    CHECK(in.normalized.frame.values.minCoeff() >= 0.0);
    CHECK(in.normalized.frame.values.maxCoeff() <= 1.0);
}

TEST_CASE("evaluation and comparators share the test days") {
    const auto& f = fixture();
    const auto out = evaluate_feature_set(f.data, {f.data.ranking.kept(), "ABCD"}, f.cfg.model);
    const auto& r = out.report;
    CHECK(std::isfinite(r.mae));
    CHECK(r.mae <= r.rmse);
    CHECK(out.training.train_loss.size() == 3);
    const auto again = evaluate_feature_set(f.data, {f.data.ranking.kept(), "ABCD"}, f.cfg.model);
    CHECK(again.report.predictions == r.predictions);

    const auto naive = persistence_report(f.data, f.cfg.model.window);
    CHECK(naive.days == r.days);
    CHECK(naive.actuals == r.actuals);
    const Index row = f.data.frame.require("target");
    CHECK(naive.predictions.front() == f.data.frame.values(row, f.data.train_end - 1));

    ForestParams fp;
    fp.n_trees = 10;
    const auto rf = forest_report(f.data, {f.data.ranking.kept(), ""}, f.cfg.model.window, fp);
    CHECK(rf.days == r.days);
    CHECK(rf.mae <= rf.rmse);
}

TEST_CASE("sweeps and tuning on a small budget") {
    const auto& f = fixture();
    ModelConfig m = f.cfg.model;
    m.epochs = 1;
    const auto ws = window_sweep(f.data, {{}, "A"}, m, {2, 4});
    REQUIRE(ws.size() == 2);
    CHECK(ws[1].value == 4);
    const auto rs = rfe_sweep(f.data, "", m, {1, 3});
    REQUIRE(rs.size() == 2);
    CHECK(sweep_csv(rs, "features").rfind("features,mae,rmse\n1,", 0) == 0);
    CHECK_THROWS_AS(rfe_sweep(f.data, "", m, {10}), Error);

    RunConfig cfg = f.cfg;
    cfg.tune.trials = 3;
    cfg.tune.epochs = 2;
    int records = 0;
    const auto study = tune_model(f.data, {{}, ""}, cfg, [&](const nlohmann::json&) { ++records; });
    CHECK(study.trials.size() == 3);
    CHECK(records == 6);
    for (const auto& t : study.trials) {
        CHECK(SearchSpace{}.contains(t.config));
        CHECK(t.config.epochs == 2);
        if (t.state == TrialState::Completed) CHECK(t.intermediate.size() <= 2);
    }
}

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 when any fails.
// Usage: acceptance [--cli <path to ius>] [--only N[,N...]] [--workdir DIR]

#include "oracles.hpp"

#include "ius/eval.hpp"
#include "ius/featsel.hpp"
#include "ius/forest.hpp"
#include "ius/ingest.hpp"
#include "ius/net.hpp"
#include "ius/pipeline.hpp"
#include "ius/synth.hpp"
#include "ius/textfeat.hpp"
#include "ius/tuner.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>

using namespace ius;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Settings {
    std::string cli;
    fs::path workdir;
};

// Reports collected along the way for the metric identity check.
std::vector<std::pair<double, double>> g_reports;

Outcome pi_arithmetic(const Settings&) {
    const struct {
        double reference, combined, expected;
    } rows[] = {{0.004270, 0.003746, 12.27}, {0.005502, 0.004982, 9.45}, {0.004736, 0.004511, 4.75},
                {0.005747, 0.005471, 4.80}, {0.005816, 0.005814, 0.03}, {0.007813, 0.007672, 1.8}};
    double worst = 0.0;
    for (const auto& r : rows)
        worst = std::max(worst, std::abs(percentage_improvement(r.reference, r.combined) - r.expected));
    return {worst <= 0.01, fmt::format("max deviation {:.4f} points over 6 pairs (tolerance 0.01)", worst)};
}

Outcome gradient_correctness(const Settings&) {
    double worst = 0.0;
    std::string where;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = oracle::random_instance(seed, 4, 4, 2, 3);
        const auto r = oracle::gradient_check(g.params, g.x, g.y, 0.0, seed);
        if (r.max_rel > worst) {
            worst = r.max_rel;
            where = fmt::format("seed {} {}", seed, r.worst);
        }
    }
    return {worst < 1e-4, fmt::format("max relative error {:.3e} at {} (tolerance 1e-4)", worst, where)};
}

Outcome lag_recovery(const Settings&) {
    int hits = 0, oracle_agree = 0;
    double curve_gap = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec = default_synth_spec(seed);
        spec.n_days = 500;
        spec.informative = {{"lead", 2, 1.0, 0.004}};
        spec.noise_features = 0;
        const auto panel = gen_panel(spec);
        const RowVector a = panel.frame.values.row(0), b = panel.frame.values.row(1);
        const std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
        const auto sel = select_lag(x, y, 0, 10);
        const auto brute = oracle::brute_force_aic(x, y, 10);
        hits += sel.best_lag == 2;
        oracle_agree += sel.best_lag == brute.best;
        for (std::size_t i = 0; i < brute.curve.size(); ++i)
            curve_gap = std::max(curve_gap, std::abs(sel.aic[i] - brute.curve[i]));
    }
    const bool pass = hits >= 18 && oracle_agree == 20 && curve_gap <= 1e-10;
    return {pass, fmt::format("p*=2 in {}/20 seeds (need 18); oracle lag agrees in {}/20; max AIC gap {:.2e}", hits,
                              oracle_agree, curve_gap)};
}

Outcome rfe_recovery(const Settings&) {
    int good = 0;
    std::string counts;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec = default_synth_spec(seed);
        const auto panel = gen_panel(spec);
        const auto lags = select_lags(panel.frame, panel.target);
        const auto lagged = apply_lags(panel.frame, lags, panel.target);
        std::vector<std::string> features(lagged.features.begin() + 1, lagged.features.end());
        const auto train = lagged.days(0, 315 - lags.max_lag());
        const RowVector y = train.row(panel.target);
        ForestParams fp;
        fp.n_trees = 100;
        fp.seed = seed;
        const auto ranking = rfe(train.select(features), {y.data(), static_cast<std::size_t>(y.size())}, 5, 1, fp);
        int informative = 0;
        for (const auto& f : ranking.kept()) informative += f.rfind("lead", 0) == 0;
        good += informative >= 4;
        counts += std::to_string(informative);
    }
    return {good >= 18, fmt::format("top-5 holds >= 4 informative in {}/20 seeds (need 18); per seed {}", good, counts)};
}

Outcome root_split_oracle(const Settings&) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> rows(4, 64);
    std::normal_distribution<double> z;
    ForestParams stump;
    stump.n_trees = 1;
    stump.max_depth = 1;
    stump.min_leaf = 1;
    stump.features_per_split = 1e9;
    stump.bootstrap = false;
    int agree = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rows(rng);
        Matrix X(n, 4);
        for (Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = X(i, trial % 4) + 0.5 * z(rng);
        const auto forest = fit_forest(X, y, stump);
        const auto& root = forest.trees[0].nodes[0];
        const auto brute = oracle::brute_force_split(X, y, 1);
        agree += root.feature == brute.feature && std::abs(root.threshold - brute.threshold) <= 1e-12 &&
                 std::abs(root.impurity_decrease - brute.gain) <= 1e-9 * std::max(1.0, brute.gain);
    }
    return {agree == 50, fmt::format("{}/50 root splits equal the brute-force split", agree)};
}

Outcome overfit_capacity(const Settings&) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<WindowSample> samples;
    for (int i = 0; i < 10; ++i) {
        WindowSample s;
        s.input.resize(2, 3);
        for (Index k = 0; k < s.input.size(); ++k) s.input.data()[k] = u(rng);
        s.target = u(rng);
        s.t = i;
        samples.push_back(s);
    }
    ModelConfig c;
    c.hidden = 16;
    c.fc = 16;
    c.dropout = 0.0;
    c.learning_rate = 5e-3;
    c.batch = 10;
    c.window = 3;
    c.epochs = 2000;
    c.patience = 0;
    const auto r = train(samples, c);
    const double mse = evaluate_mse(r.params, samples);
    return {mse < 1e-5, fmt::format("training MSE {:.3e} after {} epochs (need < 1e-5)", mse, r.train_loss.size())};
}

Outcome tuner_soundness(const Settings&) {
    const SearchSpace space;
    std::mt19937_64 rng(7);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto c = suggest(space, rng);
        violations += !space.contains(c) || c.fc > c.hidden;
    }
    const Objective surrogate = [](const ModelConfig& c, TrialContext& ctx) {
        const double v = std::pow(std::log10(c.learning_rate) + 3.0, 2.0);
        for (int step = 1; step <= 10; ++step) ctx.report(step, v * (1.0 + 1.0 / step));
        return v;
    };
    int close = 0, pruned_best = 0, pruned_total = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto study = optimize(surrogate, space, 50, seed);
        const auto& best = study.trials[*study.best()];
        close += best.config.learning_rate >= 1e-3 / 3.0 && best.config.learning_rate <= 3e-3;
        pruned_best += best.state != TrialState::Completed;
        pruned_total += static_cast<int>(study.count(TrialState::Pruned));
    }
    const bool pass = violations == 0 && close >= 18 && pruned_best == 0;
    return {pass, fmt::format("{} violations in 10^4 draws; best lr within x/3 of 1e-3 in {}/20 seeds (need 18); "
                              "pruned best {} ({} trials pruned overall)",
                              violations, close, pruned_best, pruned_total)};
}

Outcome dm_calibration(const Settings&) {
    int size_rejections = 0, power_rejections = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(10000 + rep));
        std::normal_distribution<double> z;
        std::vector<double> a(155), b(155), c(155);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = z(rng);
            b[i] = z(rng);
            c[i] = 2.0 * z(rng);
        }
        size_rejections += dm_test(a, b).p_value < 0.05;
        power_rejections += dm_test(a, c).p_value < 0.05;
    }
    const double size = size_rejections / 200.0, power = power_rejections / 200.0;
    return {size <= 0.10 && power >= 0.90,
            fmt::format("size {:.3f} (need <= 0.10), power at 2x scale {:.3f} (need >= 0.90), 200 replications", size,
                        power)};
}

struct FusionRun {
    double quant = 0.0;
    double combined = 0.0;
};

FusionRun fusion_seed(const Settings& s, std::uint64_t seed, LagAlignment alignment) {
    const auto dir = (s.workdir / fmt::format("fusion-s{}", seed)).string();
    const auto ws = write_workspace(default_synth_spec(seed), dir);
    auto doc = nlohmann::json::parse(read_text_file(ws.config_path));
    doc["model"] = {{"hidden", 16}, {"fc", 8}, {"learning_rate", 3e-3}, {"batch", 16},
                    {"window", 5},  {"epochs", 200}, {"patience", 20}};
    doc["lags"] = {{"alignment", to_string(alignment)}};
    const auto cfg = parse_run_config(doc, dir);
    const auto quant = ingest_frame(cfg);
    const auto text = build_text_features(cfg, quant.calendar);
    const std::vector<AlignedFrame> parts{quant, text.features};
    auto data = prepare_data(quant, text.features, scan_lags(concat(parts), cfg), cfg);
    data.ranking = rank_quantitative(data, cfg);
    const auto q = evaluate_feature_set(data, {data.ranking.kept(), ""}, cfg.model);
    const auto c = evaluate_feature_set(data, {data.ranking.kept(), "ABCD"}, cfg.model);
    g_reports.emplace_back(q.report.mae, q.report.rmse);
    g_reports.emplace_back(c.report.mae, c.report.rmse);
    return {q.report.mae, c.report.mae};
}

Outcome data_fusion(const Settings& s) {
    int wins = 0, next_day_wins = 0;
    std::string pis;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = fusion_seed(s, seed, LagAlignment::Lag);
        const double pi = percentage_improvement(r.quant, r.combined);
        wins += pi > 0.0;
        pis += fmt::format("{}{:+.1f}", pis.empty() ? "" : " ", pi);
        const auto n = fusion_seed(s, seed, LagAlignment::NextDay);
        next_day_wins += percentage_improvement(n.quant, n.combined) > 0.0;
    }
    return {wins >= 8, fmt::format("PI_MAE > 0 in {}/10 seeds (need 8); PI per seed [{}]%; "
                                   "diagnostic, next-day lag alignment: {}/10",
                                   wins, pis, next_day_wins)};
}

Outcome lda_recovery(const Settings&) {
    int right_k = 0, pure = 0;
    double worst = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const TopicCorpusSpec spec;
        const auto corpus = gen_topic_corpus(spec, 300, seed);
        LdaParams base;
        base.seed = seed;
        const auto scan = select_topic_count(corpus.bags, static_cast<int>(corpus.vocab.size()), 2, 6, base);
        right_k += scan.best_k == 3;
        LdaParams three = base;
        three.topics = 3;
        const auto model = fit_lda(corpus.bags, static_cast<int>(corpus.vocab.size()), three);
        const double purity = topic_purity(model.assignment, corpus.planted, 3, 3);
        pure += purity > 0.8;
        worst = std::min(worst, purity);
    }
    return {right_k >= 16 && pure >= 16,
            fmt::format("K*=3 in {}/20 seeds, purity > 0.8 in {}/20 (need 16 each); lowest purity {:.3f}", right_k,
                        pure, worst)};
}

int shell(const std::string& command) { return std::system((command + " > /dev/null").c_str()); }

Outcome pipeline_determinism(const Settings& s) {
    if (s.cli.empty() || !fs::exists(s.cli)) return {false, "ius executable not found (pass --cli)"};
    const auto root = s.workdir / "determinism";
    fs::remove_all(root);
    const auto ws = root / "ws";
    if (shell(fmt::format("'{}' simgen --seed 5 --out '{}'", s.cli, ws.string())) != 0) return {false, "simgen failed"};
    const std::string small =
        "--set model.hidden=8 --set model.fc=8 --set model.window=5 --set model.epochs=15 --set model.batch=16 "
        "--set tune.epochs=4";
    const char* commands[] = {"ingest", "features", "lags", "rfe", "tune --trials 4", "train", "evaluate", "ablate",
                              "sweep-window --windows 3,6", "sweep-rfe --counts 2,4"};
    for (const char* run : {"a", "b"}) {
        for (const char* c : commands) {
            const auto line = fmt::format("'{}' {} --config '{}' --out '{}' {}", s.cli, c, (ws / "config.json").string(),
                                          (root / run).string(), small);
            if (shell(line) != 0) return {false, fmt::format("command failed: {}", c)};
        }
    }
    int files = 0, different = 0;
    for (const auto& e : fs::directory_iterator(root / "a")) {
        ++files;
        const auto other = root / "b" / e.path().filename();
        if (!fs::exists(other) || read_text_file(e.path().string()) != read_text_file(other.string())) ++different;
        if (e.path().filename().string().rfind("report-", 0) == 0) {
            const auto doc = nlohmann::json::parse(read_text_file(e.path().string()));
            g_reports.emplace_back(doc["model"]["mae"].get<double>(), doc["model"]["rmse"].get<double>());
            for (const auto& c : doc["comparators"]) g_reports.emplace_back(c["mae"].get<double>(), c["rmse"].get<double>());
        }
    }
    const std::size_t files_b = static_cast<std::size_t>(std::distance(fs::directory_iterator(root / "b"), {}));
    const bool pass = files > 0 && different == 0 && files_b == static_cast<std::size_t>(files);
    return {pass, fmt::format("{} files from 10 commands, {} differ between the two runs", files, different)};
}

Outcome metric_identities(const Settings&) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    // generated reports plus random error vectors
    int reports = 0, mae_violations = 0;
    for (const auto& [m, r] : g_reports) {
        ++reports;
        mae_violations += m > r;
    }
    for (int i = 0; i < 200; ++i) {
        std::vector<double> p(50), a(50);
        for (std::size_t k = 0; k < p.size(); ++k) {
            p[k] = z(rng);
            a[k] = z(rng) * (1 + i % 5);
        }
        const auto rep = make_report("random", std::vector<std::string>(50, "2021-01-04"), p, a);
        ++reports;
        mae_violations += rep.mae > rep.rmse;
    }

    // interpolation on affine series
    double interp_gap = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const double slope = u(rng), intercept = u(rng);
        RawSeries s;
        s.name = "x";
        std::vector<Date> days;
        for (int d = 0; d < 60; ++d) {
            const Date day(19000 + d);
            days.push_back(day);
            const bool present = d == 0 || d == 59 || (d % 7 != 3 && d % 5 != 1);
            s.points.push_back({day, present ? std::optional<double>(intercept + slope * d) : std::nullopt});
        }
        const auto filled = interpolate_linear(s, TradingCalendar(days));
        for (int d = 0; d < 60; ++d)
            interp_gap = std::max(interp_gap, std::abs(filled[static_cast<std::size_t>(d)] - (intercept + slope * d)));
    }

    // min-max bounds
    int bound_violations = 0;
    Matrix rows(1000, 30);
    for (Index i = 0; i < rows.size(); ++i) rows.data()[i] = u(rng) * std::exp(u(rng));
    for (Index r = 0; r < 1000; r += 97) rows.row(r).setConstant(u(rng));
    const Matrix scaled = minmax_rows(rows);
    for (Index i = 0; i < scaled.size(); ++i) bound_violations += !(scaled.data()[i] >= 0.0 && scaled.data()[i] <= 1.0);

    const bool pass = mae_violations == 0 && interp_gap <= 1e-12 && bound_violations == 0;
    return {pass, fmt::format("MAE > RMSE in {}/{} reports; affine interpolation max error {:.2e}; "
                              "{} min-max values outside [0, 1] over 1000 rows",
                              mae_violations, reports, interp_gap, bound_violations)};
}

}  // namespace

int main(int argc, char** argv) {
    Settings settings;
#ifdef IUS_CLI_PATH
    settings.cli = IUS_CLI_PATH;
#endif
    settings.workdir = fs::temp_directory_path() / "ius_acceptance";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) {
            settings.cli = argv[++i];
        } else if (arg == "--workdir" && i + 1 < argc) {
            settings.workdir = argv[++i];
        } else if (arg == "--only" && i + 1 < argc) {
            for (const auto& part : split_delimited(argv[++i], ',')) only.insert(std::stoi(part));
        } else {
            fmt::print(stderr, "usage: acceptance [--cli PATH] [--workdir DIR] [--only N[,N...]]\n");
            return 2;
        }
    }
    fs::create_directories(settings.workdir);

    const struct {
        int id;
        const char* name;
        std::function<Outcome(const Settings&)> run;
    } criteria[] = {
        {1, "PI arithmetic", pi_arithmetic},
        {2, "gradient correctness", gradient_correctness},
        {3, "lag recovery", lag_recovery},
        {4, "RFE recovery", rfe_recovery},
        {5, "root-split oracle", root_split_oracle},
        {6, "overfit capacity", overfit_capacity},
        {7, "tuner soundness", tuner_soundness},
        {8, "DM calibration", dm_calibration},
        {9, "data-fusion direction", data_fusion},
        {10, "LDA recovery", lda_recovery},
        {11, "pipeline determinism", pipeline_determinism},
        {12, "metric identities", metric_identities},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run(settings);
        } catch (const std::exception& e) {
            out = {false, fmt::format("error: {}", e.what())};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !out.pass;
        fmt::print("{} {:2d} {}: {} [{:.1f} s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail, secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}

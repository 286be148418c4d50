#pragma once

#include "ius/eval.hpp"
#include "ius/featsel.hpp"
#include "ius/forest.hpp"
#include "ius/ingest.hpp"
#include "ius/net.hpp"
#include "ius/textfeat.hpp"
#include "ius/tuner.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ius {

struct SeriesSource {
    std::string name;
    std::string path;
    std::string date_column = "date";
    std::string value_column = "value";
};

struct TextSettings {
    int min_count = 2;
    int k_min = 2;
    int k_max = 6;
    LdaParams lda;  // topics is ignored, the scan picks K
    int top_n = 10;
    std::vector<int> selected_topics;  // empty means every topic of the chosen model
    TextFill fill;
};

/// Lag: shift every feature by its selected lag. NextDay: shift by lag - 1 (at
/// least 0), so a window ending at day t sees the values aligned with day t+1.
enum class LagAlignment { Lag, NextDay };

std::string_view to_string(LagAlignment a);
LagAlignment parse_lag_alignment(std::string_view s);

struct LagSettings {
    int p_min = 0;
    int p_max = 10;
    AicSampleSize sample_size = AicSampleSize::Raw;
    LagAlignment alignment = LagAlignment::Lag;
};

struct RfeSettings {
    int keep = 10;
    int step = 1;
    ForestParams forest{.n_trees = 100};
};

struct TuneSettings {
    int trials = 20;
    int epochs = 50;
    PrunerSettings pruner;
};

struct RunConfig {
    std::string base_dir;  // relative paths resolve against it
    std::vector<SeriesSource> series;
    std::string target;
    std::string texts;  // optional corpus path
    std::string calendar_source;  // series whose dates form the calendar; target when empty
    EdgePolicy edge_policy = EdgePolicy::HoldNearest;
    TextSettings text;
    LagSettings lags;
    RfeSettings rfe;
    int train_days = 315;
    double validation_share = 0.2;
    ModelConfig model;
    TuneSettings tune;
    std::string families = "ABCD";
    int comparator_trees = 100;
    DmLoss dm_loss = DmLoss::Squared;
    int dm_horizon = 1;
    bool dm_small_sample = false;
    std::vector<int> sweep_windows = allowed_windows();
    std::vector<int> sweep_counts;  // empty means 1..number of quantitative features
    std::uint64_t seed = 0;

    [[nodiscard]] std::string resolve(const std::string& path) const;
    /// Canonical document of the effective settings (paths as given).
    [[nodiscard]] nlohmann::json to_json() const;
    void validate() const;
};

/// Parses a config document; `base_dir` anchors relative paths. A seed is required.
RunConfig parse_run_config(const nlohmann::json& doc, const std::string& base_dir);
RunConfig read_run_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);
/// 16 hex digits of the FNV-1a hash of the canonical config document, leaving
/// out the tune and sweep sections (they only shape their own command's files).
std::string config_hash(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Stages

/// Reads and aligns every series; the target row comes first.
AlignedFrame ingest_frame(const RunConfig& cfg);

struct TextStage {
    AlignedFrame features;  // no rows when the config has no corpus
    TopicScan scan;
    std::vector<std::string> vocab;
    std::size_t records = 0;
};

TextStage build_text_features(const RunConfig& cfg, const TradingCalendar& calendar);

LagTable scan_lags(const AlignedFrame& combined, const RunConfig& cfg);

struct PreparedData {
    AlignedFrame frame;  // lagged: target, quantitative rows, textual rows
    std::string target;
    std::vector<std::string> quantitative;
    std::vector<std::string> textual;
    ImportanceRanking ranking;  // quantitative rows only
    Index train_end = 0;  // first test day in `frame`
    double validation_share = 0.2;
};

/// Lags actually applied to the frame under an alignment.
LagTable aligned_lags(const LagTable& lags, LagAlignment alignment);

/// Lagged frame and the split position for a calendar-level training length.
PreparedData prepare_data(const AlignedFrame& quantitative, const AlignedFrame& textual, const LagTable& lags,
                          const RunConfig& cfg);

/// RFE over the quantitative rows, fitted on training days only.
ImportanceRanking rank_quantitative(const PreparedData& data, const RunConfig& cfg);

struct FeatureSelection {
    std::vector<std::string> quantitative;
    std::string families;  // subset of "ABCD"
};

/// Target row, the listed quantitative rows and every textual row of the families.
std::vector<std::string> selected_rows(const PreparedData& data, const FeatureSelection& sel);

struct SplitSamples {
    std::vector<WindowSample> train;       // fitting part
    std::vector<WindowSample> validation;  // chronological tail of the training days
    std::vector<WindowSample> test;
};

struct ModelInputs {
    NormalizedFrame normalized;
    SplitSamples samples;
};

ModelInputs model_inputs(const PreparedData& data, const FeatureSelection& sel, int window);

struct EvalOutcome {
    ForecastReport report;
    TrainResult training;
    std::vector<std::string> rows;
    MinMaxScaling scaling;
};

/// One train/predict cycle. Metrics are in the target's original units.
EvalOutcome evaluate_feature_set(const PreparedData& data, const FeatureSelection& sel, const ModelConfig& model,
                                 std::string label = "bilstm");

/// Reports for a trained model on the test days.
ForecastReport forecast_report(const PreparedData& data, const ModelInputs& inputs, const LstmParams& params,
                               std::string label, nlohmann::json config);

/// y_{t+1} = y_t on the same test days as a model with this window.
ForecastReport persistence_report(const PreparedData& data, int window);
/// Random forest on flattened normalized windows.
ForecastReport forest_report(const PreparedData& data, const FeatureSelection& sel, int window,
                             const ForestParams& params);

/// Summary of a model report against comparators: DM test of the model versus
/// each comparator and PI of the model relative to the first one.
nlohmann::json comparison_json(ForecastReport& model, const std::vector<ForecastReport>& comparators,
                               const RunConfig& cfg);

std::vector<AblationCell> ablation_run(const PreparedData& data, const std::vector<std::string>& quantitative,
                                       const ModelConfig& model);

struct SweepRow {
    int value = 0;
    double mae = 0.0;
    double rmse = 0.0;
};

std::vector<SweepRow> window_sweep(const PreparedData& data, const FeatureSelection& sel, const ModelConfig& model,
                                   const std::vector<int>& sizes);
/// Top-k quantitative rows by RFE importance plus all textual families.
std::vector<SweepRow> rfe_sweep(const PreparedData& data, const std::string& families, const ModelConfig& model,
                                const std::vector<int>& counts);
std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view column);

/// Optimizes the model config on the validation tail of the training days.
StudyState tune_model(const PreparedData& data, const FeatureSelection& sel, const RunConfig& cfg,
                      const JournalSink& journal = {});

}  // namespace ius

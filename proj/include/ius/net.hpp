#pragma once

#include "ius/featsel.hpp"
#include "ius/ingest.hpp"
#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ius {

struct ModelConfig {
    int hidden = 32;
    int fc = 16;
    double dropout = 0.1;
    double learning_rate = 1e-3;
    int batch = 32;
    int window = 10;
    int epochs = 200;
    int patience = 20;  // 0 disables early stopping
    std::uint64_t seed = 1;

    /// Structural checks: positive sizes, fc <= hidden, dropout in [0, 0.5],
    /// finite non-negative learning rate, window in the allowed set.
    void validate() const;
};

bool is_allowed_window(int w);
/// {1..24} followed by {30, 40, 50, 60}.
std::vector<int> allowed_windows();

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& doc, ModelConfig base = {});

// ---------------------------------------------------------------------------
// Parameters

/// One LSTM direction. Gate blocks are stacked i, f, g, o.
struct LstmCell {
    Matrix W;  // 4H x input
    Matrix U;  // 4H x H
    Matrix b;  // 4H x 1

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".W", W);
        f(prefix + ".U", U);
        f(prefix + ".b", b);
    }
};

struct LstmParams {
    int input_dim = 0;
    int hidden = 0;
    int fc = 0;
    LstmCell l1_fwd, l1_bwd, l2_fwd, l2_bwd;
    Matrix fc_W;   // fc x 2H
    Matrix fc_b;   // fc x 1
    Matrix out_W;  // 1 x fc
    Matrix out_b;  // 1 x 1

    /// Calls f(name, Matrix&) for every tensor in a fixed order.
    template <typename F>
    void for_each_tensor(F&& f) {
        l1_fwd.visit("layer1.forward", f);
        l1_bwd.visit("layer1.backward", f);
        l2_fwd.visit("layer2.forward", f);
        l2_bwd.visit("layer2.backward", f);
        f(std::string("fc.W"), fc_W);
        f(std::string("fc.b"), fc_b);
        f(std::string("out.W"), out_W);
        f(std::string("out.b"), out_b);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<LstmParams*>(this)->for_each_tensor(
            [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
    }

    [[nodiscard]] Index parameter_count() const;
    /// Same shapes, all zeros.
    [[nodiscard]] LstmParams zeros_like() const;
};

LstmParams init_params(int input_dim, int hidden, int fc, std::uint64_t seed);

nlohmann::json params_to_json(const LstmParams& p);
LstmParams params_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Data

struct WindowSample {
    Matrix input;  // features x w, days t-w+1..t
    double target = 0.0;  // target at t+1
    Index t = 0;
};

std::vector<WindowSample> make_windows(const AlignedFrame& frame, std::string_view target, int w);

/// Inputs of a batch as one (features x batch) matrix per window step.
using Sequence = std::vector<Matrix>;

Sequence stack_inputs(std::span<const WindowSample> samples);

// ---------------------------------------------------------------------------
// Forward / backward

struct DirectionCache {
    std::vector<Matrix> x, i, f, g, o, c, h;  // per processed step, in processing order
};

struct ForwardCache {
    Sequence inputs;
    DirectionCache l1_fwd, l1_bwd, l2_fwd, l2_bwd;
    std::vector<Matrix> mask1;  // per step, 2H x B (already scaled), empty when no dropout
    Matrix mask2;
    Matrix h;       // 2H x B, after dropout
    Matrix hidden;  // fc x B (tanh output)
    RowVector prediction;
    bool valid = false;
};

/// Inverted dropout mask: entries are 0 or 1/(1-rate).
Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng);

/// Batched forward pass. Dropout is applied when `rng` is given and rate > 0.
RowVector forward(const LstmParams& p, const Sequence& x, double dropout = 0.0, std::mt19937_64* rng = nullptr,
                  ForwardCache* cache = nullptr);
double forward(const LstmParams& p, const WindowSample& sample);

/// Mean squared error of the cached prediction.
double mse_loss(const ForwardCache& cache, const RowVector& targets);

/// Gradient of the batch MSE with respect to every parameter.
LstmParams backward(const LstmParams& p, const ForwardCache& cache, const RowVector& targets);

// ---------------------------------------------------------------------------
// Training

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LstmParams m, v;
    long step = 0;

    void init(const LstmParams& like);
    void update(LstmParams& p, const LstmParams& grad, double lr);
};

struct TrainResult {
    LstmParams params;  // parameters of the best monitored epoch
    std::vector<double> train_loss;
    std::vector<double> validation_loss;  // empty without a validation set
    int best_epoch = 0;                   // 1-based
    bool stopped_early = false;
};

/// Reports the monitored loss after each epoch; returning false stops training.
using EpochCallback = std::function<bool(int epoch, double monitored_loss)>;

TrainResult train(std::span<const WindowSample> train_set, const ModelConfig& config,
                  std::span<const WindowSample> validation_set = {}, const EpochCallback& on_epoch = {});

/// Mean squared error over samples in inference mode.
double evaluate_mse(const LstmParams& p, std::span<const WindowSample> samples);

/// Normalized-space predictions, one per sample.
std::vector<double> predict_normalized(const LstmParams& p, std::span<const WindowSample> samples);

/// Predictions mapped back to the target's original scale.
std::vector<double> predict_series(const LstmParams& p, std::span<const WindowSample> samples,
                                   const MinMaxScaling& scaling, std::string_view target);

std::string loss_history_csv(const TrainResult& r);

}  // namespace ius

#pragma once

#include "ius/net.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ius {

struct SearchSpace {
    std::vector<int> hidden{8, 16, 32, 64, 128};
    std::vector<int> fc{8, 16, 32, 64};
    double dropout_min = 0.0;
    double dropout_max = 0.5;
    double lr_min = 1e-5;
    double lr_max = 1e-2;
    std::vector<int> batch{8, 16, 32, 48, 64, 80, 96, 112, 128};
    std::vector<int> window = allowed_windows();

    void validate() const;
    [[nodiscard]] bool contains(const ModelConfig& c) const;
};

/// Independent random draw. Epochs, patience and seed are copied from `base`.
ModelConfig suggest(const SearchSpace& space, std::mt19937_64& rng, const ModelConfig& base = {});

enum class TrialState { Running, Completed, Pruned, Failed };

std::string_view to_string(TrialState s);
TrialState parse_trial_state(std::string_view s);

struct Trial {
    int id = 0;
    ModelConfig config;
    std::vector<std::pair<int, double>> intermediate;
    TrialState state = TrialState::Running;
    std::optional<double> value;
    std::string message;

    [[nodiscard]] std::optional<double> value_at(int step) const;
};

struct PrunerSettings {
    bool enabled = true;
    int n_startup = 5;  // completed trials before pruning starts
    int n_warmup = 5;   // reported steps exempt from pruning
};

struct StudyState {
    std::vector<Trial> trials;
    std::uint64_t seed = 0;
    PrunerSettings pruner;

    /// Index of the completed trial with the lowest value, earliest on ties.
    [[nodiscard]] std::optional<std::size_t> best() const;
    [[nodiscard]] std::size_t count(TrialState s) const;
};

/// Median rule: true when `value` at `step` is strictly above the median of the
/// completed trials' values at that step.
bool should_prune(const StudyState& study, int step, double value, const PrunerSettings& settings);

/// Thrown by TrialContext::report when the pruner stops the trial.
class TrialPruned : public Error {
public:
    explicit TrialPruned(int step) : Error("trial pruned"), step_(step) {}
    [[nodiscard]] int step() const { return step_; }

private:
    int step_;
};

class TrialContext {
public:
    TrialContext(const StudyState& study, Trial& trial) : study_(study), trial_(trial) {}

    /// Records an intermediate value; throws TrialPruned when the pruner fires.
    void report(int step, double value);
    [[nodiscard]] int trial_id() const { return trial_.id; }

private:
    const StudyState& study_;
    Trial& trial_;
};

using Objective = std::function<double(const ModelConfig&, TrialContext&)>;
/// Called once per trial state transition with the journal record.
using JournalSink = std::function<void(const nlohmann::json&)>;

/// Runs trials until the study holds `n_trials`. An existing study resumes: the
/// sampler of trial i depends only on (seed, i).
StudyState optimize(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed,
                    const PrunerSettings& pruner = {}, const ModelConfig& base = {}, StudyState study = {},
                    const JournalSink& journal = {});

nlohmann::json trial_to_json(const Trial& t);
Trial trial_from_json(const nlohmann::json& doc);
nlohmann::json study_to_json(const StudyState& s);
StudyState study_from_json(const nlohmann::json& doc);
/// id,state,value,hidden,fc,dropout,learning_rate,batch,window,steps rows.
std::string trial_table_csv(const StudyState& s);

}  // namespace ius

#include "ius/tuner.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ius {

void SearchSpace::validate() const {
    if (hidden.empty() || fc.empty() || batch.empty() || window.empty()) throw Error("search space has an empty set");
    if (!(dropout_min >= 0.0 && dropout_min <= dropout_max && dropout_max <= 0.5))
        throw Error("dropout range must lie within [0, 0.5]");
    if (!(lr_min > 0.0 && lr_min <= lr_max)) throw Error("learning rate range must be positive and ordered");
    for (int h : hidden)
        if (std::none_of(fc.begin(), fc.end(), [h](int f) { return f <= h; }))
            throw Error(fmt::format("no fc size fits hidden size {}", h));
}

bool SearchSpace::contains(const ModelConfig& c) const {
    const auto in = [](const std::vector<int>& set, int v) { return std::find(set.begin(), set.end(), v) != set.end(); };
    return in(hidden, c.hidden) && in(fc, c.fc) && c.fc <= c.hidden && c.dropout >= dropout_min &&
           c.dropout <= dropout_max && c.learning_rate >= lr_min && c.learning_rate <= lr_max && in(batch, c.batch) &&
           in(window, c.window);
}

ModelConfig suggest(const SearchSpace& space, std::mt19937_64& rng, const ModelConfig& base) {
    const auto pick = [&](const std::vector<int>& set) {
        std::uniform_int_distribution<std::size_t> u(0, set.size() - 1);
        return set[u(rng)];
    };
    ModelConfig c = base;
    c.hidden = pick(space.hidden);
    std::vector<int> fits;
    std::copy_if(space.fc.begin(), space.fc.end(), std::back_inserter(fits), [&](int f) { return f <= c.hidden; });
    if (fits.empty()) throw Error(fmt::format("no fc size fits hidden size {}", c.hidden));
    c.fc = pick(fits);
    c.dropout = std::uniform_real_distribution<double>(space.dropout_min, space.dropout_max)(rng);
    const double lr = std::exp(std::uniform_real_distribution<double>(std::log(space.lr_min), std::log(space.lr_max))(rng));
    c.learning_rate = std::clamp(lr, space.lr_min, space.lr_max);
    c.batch = pick(space.batch);
    c.window = pick(space.window);
    return c;
}

std::string_view to_string(TrialState s) {
    switch (s) {
        case TrialState::Running: return "running";
        case TrialState::Completed: return "completed";
        case TrialState::Pruned: return "pruned";
        case TrialState::Failed: return "failed";
    }
    return "unknown";
}

TrialState parse_trial_state(std::string_view s) {
    for (auto st : {TrialState::Running, TrialState::Completed, TrialState::Pruned, TrialState::Failed})
        if (to_string(st) == s) return st;
    throw Error(fmt::format("unknown trial state '{}'", s));
}

std::optional<double> Trial::value_at(int step) const {
    for (const auto& [s, v] : intermediate)
        if (s == step) return v;
    return std::nullopt;
}

std::optional<std::size_t> StudyState::best() const {
    std::optional<std::size_t> out;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        if (t.state != TrialState::Completed || !t.value) continue;
        if (!out || *t.value < *trials[*out].value) out = i;
    }
    return out;
}

std::size_t StudyState::count(TrialState s) const {
    return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [s](const Trial& t) { return t.state == s; }));
}

bool should_prune(const StudyState& study, int step, double value, const PrunerSettings& settings) {
    if (!settings.enabled) return false;
    if (static_cast<int>(study.count(TrialState::Completed)) < settings.n_startup) return false;
    if (step <= settings.n_warmup) return false;
    std::vector<double> values;
    for (const auto& t : study.trials)
        if (t.state == TrialState::Completed)
            if (auto v = t.value_at(step)) values.push_back(*v);
    if (values.empty()) return false;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return value > median;
}

void TrialContext::report(int step, double value) {
    if (!trial_.intermediate.empty() && step <= trial_.intermediate.back().first)
        throw Error(fmt::format("trial {}: reported step {} does not increase", trial_.id, step));
    trial_.intermediate.emplace_back(step, value);
    if (should_prune(study_, step, value, study_.pruner)) throw TrialPruned(step);
}

namespace {

std::mt19937_64 trial_rng(std::uint64_t seed, int trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), 0x7e11u};
    return std::mt19937_64(seq);
}

}  // namespace

StudyState optimize(const Objective& objective, const SearchSpace& space, int n_trials, std::uint64_t seed,
                    const PrunerSettings& pruner, const ModelConfig& base, StudyState study,
                    const JournalSink& journal) {
    space.validate();
    if (n_trials < 1) throw Error("a study needs at least one trial");
    if (!study.trials.empty() && study.seed != seed)
        throw Error(fmt::format("resumed study was seeded with {}, not {}", study.seed, seed));
    study.seed = seed;
    study.pruner = pruner;
    // trials left running by an interrupted session are re-run from scratch
    std::erase_if(study.trials, [](const Trial& t) { return t.state == TrialState::Running; });

    while (static_cast<int>(study.trials.size()) < n_trials) {
        Trial trial;
        trial.id = static_cast<int>(study.trials.size());
        auto rng = trial_rng(seed, trial.id);
        trial.config = suggest(space, rng, base);
        trial.config.seed = base.seed;
        if (journal) journal({{"trial", trial.id}, {"state", "running"}, {"config", config_to_json(trial.config)}});
        try {
            TrialContext ctx(study, trial);
            const double v = objective(trial.config, ctx);
            if (!std::isfinite(v)) throw Error("objective returned a non-finite value");
            trial.value = v;
            trial.state = TrialState::Completed;
        } catch (const TrialPruned& p) {
            trial.state = TrialState::Pruned;
            trial.message = fmt::format("pruned at step {}", p.step());
        } catch (const std::exception& e) {
            trial.state = TrialState::Failed;
            trial.message = e.what();
        }
        if (journal) journal(trial_to_json(trial));
        study.trials.push_back(std::move(trial));
    }
    if (!study.best()) {
        std::string diag;
        for (const auto& t : study.trials) diag += fmt::format("\n  trial {}: {} {}", t.id, to_string(t.state), t.message);
        throw Error("no trial completed:" + diag);
    }
    return study;
}

nlohmann::json trial_to_json(const Trial& t) {
    nlohmann::json inter = nlohmann::json::array();
    for (const auto& [s, v] : t.intermediate) inter.push_back({s, v});
    nlohmann::json doc{{"trial", t.id},
                       {"state", to_string(t.state)},
                       {"config", config_to_json(t.config)},
                       {"intermediate", inter}};
    if (t.value) doc["value"] = *t.value;
    if (!t.message.empty()) doc["message"] = t.message;
    return doc;
}

Trial trial_from_json(const nlohmann::json& doc) {
    Trial t;
    t.id = doc.at("trial").get<int>();
    t.state = parse_trial_state(doc.at("state").get<std::string>());
    t.config = config_from_json(doc.at("config"));
    for (const auto& p : doc.value("intermediate", nlohmann::json::array()))
        t.intermediate.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
    if (doc.contains("value")) t.value = doc.at("value").get<double>();
    t.message = doc.value("message", std::string{});
    return t;
}

nlohmann::json study_to_json(const StudyState& s) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : s.trials) trials.push_back(trial_to_json(t));
    nlohmann::json doc{{"format", "ius.study/1"},
                       {"seed", s.seed},
                       {"pruner", {{"enabled", s.pruner.enabled}, {"n_startup", s.pruner.n_startup}, {"n_warmup", s.pruner.n_warmup}}},
                       {"trials", trials}};
    if (auto b = s.best()) doc["best_trial"] = s.trials[*b].id;
    return doc;
}

StudyState study_from_json(const nlohmann::json& doc) {
    if (doc.value("format", std::string{}) != "ius.study/1") throw Error("not an ius.study/1 document");
    StudyState s;
    try {
        s.seed = doc.at("seed").get<std::uint64_t>();
        const auto& p = doc.at("pruner");
        s.pruner = {p.value("enabled", true), p.value("n_startup", 5), p.value("n_warmup", 5)};
        for (const auto& t : doc.at("trials")) s.trials.push_back(trial_from_json(t));
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("study document: {}", e.what()));
    }
    return s;
}

std::string trial_table_csv(const StudyState& s) {
    std::string out = "id,state,value,hidden,fc,dropout,learning_rate,batch,window,steps\n";
    for (const auto& t : s.trials)
        out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t.id, to_string(t.state),
                           t.value ? format_real(*t.value) : std::string{}, t.config.hidden, t.config.fc,
                           format_real(t.config.dropout), format_real(t.config.learning_rate), t.config.batch,
                           t.config.window, t.intermediate.size());
    return out;
}

}  // namespace ius

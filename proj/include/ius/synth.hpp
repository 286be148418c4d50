#pragma once

#include "ius/ingest.hpp"
#include "ius/textfeat.hpp"
#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ius {

struct InformativeFeature {
    std::string name;
    int lag = 1;  // feature[d] = loading * target[d + lag] + noise
    double loading = 1.0;
    double noise = 0.0;
};

struct TopicCorpusSpec {
    int topics = 3;
    int words_per_topic = 20;
    double zipf_exponent = 1.0;
    int doc_length = 20;  // mean, Poisson
    double mix = 0.05;    // chance a token comes from another topic
};

struct SynthSpec {
    int n_days = 470;
    Date start = Date::from_ymd(2021, 1, 4);
    std::string target_name = "target";
    double level = 1.1;
    std::vector<double> ar{0.9};
    double noise_scale = 0.005;
    std::vector<InformativeFeature> informative;
    int noise_features = 0;
    double noise_feature_scale = 1.0;

    double rho = 0.8;
    double texts_per_day = 3.0;  // Poisson mean
    double news_share = 0.5;
    double sentiment_gain = 100.0;  // return -> sentiment scale before clipping
    TopicCorpusSpec topic_corpus;
    double missing_share = 0.0;  // blanks written into the series files

    std::uint64_t seed = 1;

    /// Throws Error when the AR part is not stationary or a field is out of range.
    void validate() const;
};

/// Largest eigenvalue modulus of the AR companion matrix.
double companion_spectral_radius(std::span<const double> ar);

/// Weekdays from `start`.
TradingCalendar weekday_calendar(Date start, int n_days);

struct Panel {
    AlignedFrame frame;  // target row first, then informative, then noise features
    std::string target;
};

Panel gen_panel(const SynthSpec& spec);

struct TopicCorpus {
    std::vector<std::string> texts;
    std::vector<std::vector<int>> bags;  // word ids into `vocab`
    std::vector<std::string> vocab;
    std::vector<int> planted;  // 0-based planted topic per document
};

TopicCorpus gen_topic_corpus(const TopicCorpusSpec& spec, int documents, std::uint64_t seed);

struct SynthTexts {
    std::vector<TextRecord> records;
    std::vector<int> planted;  // 0-based planted topic per record
};

/// Texts on days 0..n-2, scored against the next-day movement of `target`.
SynthTexts gen_texts(const SynthSpec& spec, const TradingCalendar& calendar, std::span<const double> target);

/// Share of documents whose found topic maps to their planted topic under the
/// best one-to-one matching (exhaustive over permutations).
double topic_purity(std::span<const int> found_1based, std::span<const int> planted, int found_topics,
                    int planted_topics);

struct Workspace {
    std::string dir;
    std::string config_path;
};

/// Series files, text corpus, truth record and a ready-to-run config.
Workspace write_workspace(const SynthSpec& spec, const std::string& dir);

SynthSpec default_synth_spec(std::uint64_t seed = 1);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& doc);

}  // namespace ius

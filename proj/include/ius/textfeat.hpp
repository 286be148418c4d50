#pragma once

#include "ius/ingest.hpp"
#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ius {

enum class Source { News, Analysis };

Source parse_source(std::string_view s);
std::string_view to_string(Source s);

struct TextRecord {
    std::string id;
    Date date;
    Source source = Source::News;
    double sentiment = 0.0;  // [-1, 1]
    double movement = 0.5;   // [0, 1]
    std::string text;
    std::vector<int> tokens;  // word ids into the corpus vocabulary

    void validate() const;
};

/// One flag per record. A record is selected on its own date only.
struct ExtractorMask {
    std::string name;
    std::vector<bool> selected;

    [[nodiscard]] std::size_t count() const;
};

struct SourceMasks {
    ExtractorMask news;
    ExtractorMask analysis;
};

SourceMasks classify_source(std::span<const TextRecord> records);

struct Vocabulary {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> ids;

    [[nodiscard]] int size() const { return static_cast<int>(words.size()); }
    int add(const std::string& w);
};

/// Lowercased words with punctuation stripped and stopwords removed.
std::vector<std::string> split_words(std::string_view raw_text, const std::set<std::string>& stopwords);

/// Single-text tokenization: the text is its own corpus for the min_count rule.
std::vector<std::string> tokenize(std::string_view raw_text, const std::set<std::string>& stopwords,
                                  int min_count = 1);

struct TokenizedCorpus {
    Vocabulary vocab;
    std::vector<std::vector<int>> bags;
};

/// Words occurring fewer than `min_count` times across the whole corpus are dropped.
TokenizedCorpus tokenize_corpus(std::span<const std::string> texts, const std::set<std::string>& stopwords,
                                int min_count);

/// Tokenizes every record's text in place and returns the shared vocabulary.
Vocabulary tokenize_records(std::vector<TextRecord>& records, const std::set<std::string>& stopwords,
                            int min_count);

std::set<std::string> default_stopwords();

struct LdaParams {
    int topics = 3;
    int iterations = 200;
    double alpha = -1.0;  // <= 0 means 50 / topics
    double beta = 0.01;
    std::uint64_t seed = 0;

    [[nodiscard]] double effective_alpha() const { return alpha > 0.0 ? alpha : 50.0 / topics; }
};

struct TopicModel {
    int K = 0;
    Matrix phi;    // K x V
    Matrix theta;  // D x K
    Matrix word_counts;  // final topic-word counts, K x V
    std::vector<int> assignment;  // 1-based dominant topic per document
    std::vector<std::string> vocab;
    double alpha = 0.0;
    double beta = 0.0;

    [[nodiscard]] int vocab_size() const { return static_cast<int>(phi.cols()); }
    /// Word ids of topic k (1-based) in descending phi order.
    [[nodiscard]] std::vector<int> top_words(int k, int n) const;
};

/// Collapsed Gibbs sampling. `vocab_size` bounds the word ids in `bags`.
TopicModel fit_lda(std::span<const std::vector<int>> bags, int vocab_size, const LdaParams& params);
TopicModel fit_lda(const TokenizedCorpus& corpus, const LdaParams& params);

/// 1-based argmax per row, ties to the lowest index.
std::vector<int> dominant_topics(const Matrix& theta);

struct Coherence {
    std::vector<double> per_topic;
    double mean = 0.0;
    std::vector<std::string> warnings;
};

/// UMass coherence over each topic's top words:
/// sum_{i<j} log((D(w_i, w_j) + 1) / D(w_i)), w_i ranked above w_j.
Coherence coherence(const TopicModel& model, std::span<const std::vector<int>> bags, int top_n = 10);
Coherence coherence_of_topics(std::span<const std::vector<int>> top_words, std::span<const std::vector<int>> bags);

struct TopicScan {
    int best_k = 0;
    std::vector<int> ks;
    std::vector<double> mean_coherence;
    TopicModel best_model;
};

TopicScan select_topic_count(std::span<const std::vector<int>> bags, int vocab_size, int k_min, int k_max,
                             const LdaParams& base, int top_n = 10);

/// Records with a non-empty token bag whose dominant topic is k (1-based).
ExtractorMask topic_mask(std::span<const TextRecord> records, const TopicModel& model, int k);

enum class TextField { Sentiment, Movement };

/// Per-day mean of the field over selected records; `fill` on empty days.
std::vector<double> pool_daily(std::span<const TextRecord> records, const ExtractorMask& mask, TextField field,
                               const TradingCalendar& calendar, double fill);

struct TextFill {
    double sentiment = 0.0;
    double movement = 0.5;
};

/// news/analysis x sentiment/movement rows followed by topic-k-sentiment and
/// topic-k-movement for each selected topic.
AlignedFrame assemble_textual_features(std::span<const TextRecord> records, const TopicModel& model,
                                       std::span<const int> selected_topics, const TradingCalendar& calendar,
                                       TextFill fill = {});

/// Feature family of a textual row: A source sentiment, B topic sentiment,
/// C source movement, D topic movement. Returns 0 for non-textual names.
char textual_family(std::string_view feature);

// Corpus document: array of {id, date, source, sentiment, movement, text}.
std::vector<TextRecord> records_from_json(const nlohmann::json& doc);
nlohmann::json records_to_json(std::span<const TextRecord> records);

nlohmann::json topic_model_summary(const TopicModel& model, int top_n = 10);

}  // namespace ius

#include "ius/textfeat.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace ius {

Source parse_source(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "news") return Source::News;
    if (lower == "analysis") return Source::Analysis;
    throw Error(fmt::format("unknown text source '{}'", s));
}

std::string_view to_string(Source s) { return s == Source::News ? "news" : "analysis"; }

void TextRecord::validate() const {
    if (!(sentiment >= -1.0 && sentiment <= 1.0))
        throw Error(fmt::format("text '{}': sentiment {} outside [-1, 1]", id, sentiment));
    if (!(movement >= 0.0 && movement <= 1.0))
        throw Error(fmt::format("text '{}': movement {} outside [0, 1]", id, movement));
}

std::size_t ExtractorMask::count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true)); }

SourceMasks classify_source(std::span<const TextRecord> records) {
    SourceMasks out{{"news", std::vector<bool>(records.size())}, {"analysis", std::vector<bool>(records.size())}};
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].source == Source::News)
            out.news.selected[i] = true;
        else
            out.analysis.selected[i] = true;
    }
    return out;
}

int Vocabulary::add(const std::string& w) {
    auto [it, inserted] = ids.try_emplace(w, size());
    if (inserted) words.push_back(w);
    return it->second;
}

std::vector<std::string> split_words(std::string_view raw_text, const std::set<std::string>& stopwords) {
    std::vector<std::string> out;
    std::string word;
    const auto flush = [&] {
        if (!word.empty() && !stopwords.contains(word)) out.push_back(word);
        word.clear();
    };
    for (char ch : raw_text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c))
            flush();
        else if (!std::ispunct(c))
            word.push_back(static_cast<char>(std::tolower(c)));
    }
    flush();
    return out;
}

std::vector<std::string> tokenize(std::string_view raw_text, const std::set<std::string>& stopwords, int min_count) {
    auto words = split_words(raw_text, stopwords);
    std::unordered_map<std::string, int> counts;
    for (const auto& w : words) ++counts[w];
    std::erase_if(words, [&](const std::string& w) { return counts[w] < min_count; });
    return words;
}

TokenizedCorpus tokenize_corpus(std::span<const std::string> texts, const std::set<std::string>& stopwords,
                                int min_count) {
    std::vector<std::vector<std::string>> split;
    split.reserve(texts.size());
    std::unordered_map<std::string, int> counts;
    for (const auto& t : texts) {
        split.push_back(split_words(t, stopwords));
        for (const auto& w : split.back()) ++counts[w];
    }
    TokenizedCorpus out;
    out.bags.reserve(texts.size());
    for (const auto& words : split) {
        std::vector<int> bag;
        for (const auto& w : words)
            if (counts[w] >= min_count) bag.push_back(out.vocab.add(w));
        out.bags.push_back(std::move(bag));
    }
    return out;
}

Vocabulary tokenize_records(std::vector<TextRecord>& records, const std::set<std::string>& stopwords, int min_count) {
    std::vector<std::string> texts;
    texts.reserve(records.size());
    for (const auto& r : records) texts.push_back(r.text);
    auto corpus = tokenize_corpus(texts, stopwords, min_count);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].tokens = std::move(corpus.bags[i]);
    return std::move(corpus.vocab);
}

std::set<std::string> default_stopwords() {
    return {"a",    "an",   "and",   "are",  "as",   "at",   "be",    "been", "but",  "by",   "for",
            "from", "has",  "have",  "he",   "her",  "his",  "in",    "is",   "it",   "its",  "of",
            "on",   "or",   "that",  "the",  "their", "there", "they", "this", "to",  "was",  "were",
            "which", "while", "will", "with", "would", "we",  "our",  "you",  "not",  "after", "over"};
}

std::vector<int> TopicModel::top_words(int k, int n) const {
    if (k < 1 || k > K) throw Error(fmt::format("topic {} outside 1..{}", k, K));
    std::vector<int> ids(static_cast<std::size_t>(phi.cols()));
    std::iota(ids.begin(), ids.end(), 0);
    const auto row = phi.row(k - 1);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return row(a) > row(b); });
    ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(std::max(n, 0))));
    return ids;
}

std::vector<int> dominant_topics(const Matrix& theta) {
    std::vector<int> out(static_cast<std::size_t>(theta.rows()));
    for (Index d = 0; d < theta.rows(); ++d) {
        Index best = 0;
        for (Index k = 1; k < theta.cols(); ++k)
            if (theta(d, k) > theta(d, best)) best = k;
        out[static_cast<std::size_t>(d)] = static_cast<int>(best) + 1;
    }
    return out;
}

TopicModel fit_lda(std::span<const std::vector<int>> bags, int vocab_size, const LdaParams& params) {
    const int K = params.topics;
    if (K < 2) throw Error("LDA needs at least 2 topics");
    if (params.iterations < 1) throw Error("LDA needs at least one iteration");
    if (bags.empty()) throw Error("LDA corpus is empty");
    if (!(params.beta > 0.0)) throw Error("LDA beta must be positive");
    std::size_t total = 0;
    for (const auto& b : bags) {
        for (int w : b)
            if (w < 0 || w >= vocab_size) throw Error(fmt::format("word id {} outside vocabulary of {}", w, vocab_size));
        total += b.size();
    }
    if (vocab_size == 0 || total == 0) throw Error("LDA vocabulary is empty after tokenization");

    const double alpha = params.effective_alpha();
    const double beta = params.beta;
    const auto D = bags.size();
    const auto V = static_cast<std::size_t>(vocab_size);
    const auto Ku = static_cast<std::size_t>(K);

    std::mt19937_64 rng(params.seed);
    std::vector<int> n_dk(D * Ku, 0), n_kw(Ku * V, 0), n_k(Ku, 0);
    std::vector<std::vector<int>> z(D);
    std::uniform_int_distribution<int> initial(0, K - 1);
    for (std::size_t d = 0; d < D; ++d) {
        z[d].resize(bags[d].size());
        for (std::size_t i = 0; i < bags[d].size(); ++i) {
            const int k = initial(rng);
            z[d][i] = k;
            ++n_dk[d * Ku + k];
            ++n_kw[k * V + bags[d][i]];
            ++n_k[k];
        }
    }

    const double v_beta = beta * static_cast<double>(V);
    std::vector<double> cumulative(Ku);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int it = 0; it < params.iterations; ++it) {
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t i = 0; i < bags[d].size(); ++i) {
                const auto w = static_cast<std::size_t>(bags[d][i]);
                int k = z[d][i];
                --n_dk[d * Ku + k];
                --n_kw[k * V + w];
                --n_k[k];
                double acc = 0.0;
                for (std::size_t j = 0; j < Ku; ++j) {
                    acc += (n_dk[d * Ku + j] + alpha) * (n_kw[j * V + w] + beta) / (n_k[j] + v_beta);
                    cumulative[j] = acc;
                }
                const double u = unit(rng) * acc;
                k = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
                k = std::min(k, K - 1);
                z[d][i] = k;
                ++n_dk[d * Ku + k];
                ++n_kw[k * V + w];
                ++n_k[k];
            }
        }
    }

    TopicModel m;
    m.K = K;
    m.alpha = alpha;
    m.beta = beta;
    m.phi.resize(K, vocab_size);
    m.word_counts.resize(K, vocab_size);
    for (std::size_t k = 0; k < Ku; ++k)
        for (std::size_t w = 0; w < V; ++w) {
            m.word_counts(static_cast<Index>(k), static_cast<Index>(w)) = n_kw[k * V + w];
            m.phi(static_cast<Index>(k), static_cast<Index>(w)) = (n_kw[k * V + w] + beta) / (n_k[k] + v_beta);
        }
    m.theta.resize(static_cast<Index>(D), K);
    for (std::size_t d = 0; d < D; ++d) {
        const double len = static_cast<double>(bags[d].size());
        for (std::size_t k = 0; k < Ku; ++k)
            m.theta(static_cast<Index>(d), static_cast<Index>(k)) = (n_dk[d * Ku + k] + alpha) / (len + K * alpha);
    }
    m.phi.array().colwise() /= m.phi.rowwise().sum().array();
    m.theta.array().colwise() /= m.theta.rowwise().sum().array();
    m.assignment = dominant_topics(m.theta);
    return m;
}

TopicModel fit_lda(const TokenizedCorpus& corpus, const LdaParams& params) {
    auto m = fit_lda(corpus.bags, corpus.vocab.size(), params);
    m.vocab = corpus.vocab.words;
    return m;
}

Coherence coherence_of_topics(std::span<const std::vector<int>> top_words, std::span<const std::vector<int>> bags) {
    Coherence out;
    std::unordered_map<int, std::vector<std::uint32_t>> docs_of;
    for (const auto& words : top_words)
        for (int w : words) docs_of.try_emplace(w);
    for (std::size_t d = 0; d < bags.size(); ++d) {
        for (int w : bags[d]) {
            auto it = docs_of.find(w);
            if (it != docs_of.end() && (it->second.empty() || it->second.back() != d))
                it->second.push_back(static_cast<std::uint32_t>(d));
        }
    }
    const auto co_count = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
        std::size_t i = 0, j = 0, n = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] < b[j])
                ++i;
            else if (b[j] < a[i])
                ++j;
            else {
                ++n;
                ++i;
                ++j;
            }
        }
        return n;
    };
    for (std::size_t t = 0; t < top_words.size(); ++t) {
        const auto& words = top_words[t];
        double score = 0.0;
        for (std::size_t j = 1; j < words.size(); ++j) {
            for (std::size_t i = 0; i < j; ++i) {
                const auto& di = docs_of[words[i]];
                if (di.empty()) {
                    out.warnings.push_back(fmt::format("topic {}: word {} occurs in no document", t + 1, words[i]));
                    continue;
                }
                const auto co = co_count(di, docs_of[words[j]]);
                score += std::log((static_cast<double>(co) + 1.0) / static_cast<double>(di.size()));
            }
        }
        out.per_topic.push_back(score);
    }
    if (!out.per_topic.empty())
        out.mean = std::accumulate(out.per_topic.begin(), out.per_topic.end(), 0.0) /
                   static_cast<double>(out.per_topic.size());
    return out;
}

Coherence coherence(const TopicModel& model, std::span<const std::vector<int>> bags, int top_n) {
    if (top_n < 2) throw Error("coherence needs top_n >= 2");
    std::vector<std::vector<int>> tops;
    std::vector<std::string> warnings;
    for (int k = 1; k <= model.K; ++k) {
        auto words = model.top_words(k, top_n);
        std::erase_if(words, [&](int w) { return model.word_counts(k - 1, w) <= 0.0; });
        if (static_cast<int>(words.size()) < top_n)
            warnings.push_back(fmt::format("topic {} has {} words with nonzero count, fewer than {}", k, words.size(), top_n));
        tops.push_back(std::move(words));
    }
    auto out = coherence_of_topics(tops, bags);
    warnings.insert(warnings.end(), out.warnings.begin(), out.warnings.end());
    out.warnings = std::move(warnings);
    return out;
}

TopicScan select_topic_count(std::span<const std::vector<int>> bags, int vocab_size, int k_min, int k_max,
                             const LdaParams& base, int top_n) {
    if (k_min < 2 || k_max > 50 || k_min > k_max)
        throw Error(fmt::format("topic count range {}..{} must lie within 2..50", k_min, k_max));
    TopicScan scan;
    for (int k = k_min; k <= k_max; ++k) {
        LdaParams p = base;
        p.topics = k;
        auto model = fit_lda(bags, vocab_size, p);
        const double c = coherence(model, bags, top_n).mean;
        scan.ks.push_back(k);
        scan.mean_coherence.push_back(c);
        if (scan.best_k == 0 || c > scan.mean_coherence[static_cast<std::size_t>(scan.best_k - k_min)]) {
            scan.best_k = k;
            scan.best_model = std::move(model);
        }
    }
    return scan;
}

ExtractorMask topic_mask(std::span<const TextRecord> records, const TopicModel& model, int k) {
    if (k < 1 || k > model.K) throw Error(fmt::format("selected topic {} outside 1..{}", k, model.K));
    if (model.assignment.size() != records.size())
        throw Error(fmt::format("topic model covers {} documents, corpus has {}", model.assignment.size(), records.size()));
    ExtractorMask m{fmt::format("topic-{}", k), std::vector<bool>(records.size())};
    for (std::size_t i = 0; i < records.size(); ++i)
        m.selected[i] = !records[i].tokens.empty() && model.assignment[i] == k;
    return m;
}

std::vector<double> pool_daily(std::span<const TextRecord> records, const ExtractorMask& mask, TextField field,
                               const TradingCalendar& calendar, double fill) {
    if (mask.selected.size() != records.size())
        throw Error(fmt::format("mask '{}' has {} entries for {} records", mask.name, mask.selected.size(), records.size()));
    const auto n = static_cast<std::size_t>(calendar.size());
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!mask.selected[i]) continue;
        const auto pos = calendar.find(records[i].date);
        if (!pos) continue;
        const auto d = static_cast<std::size_t>(*pos);
        sum[d] += field == TextField::Sentiment ? records[i].sentiment : records[i].movement;
        ++count[d];
    }
    for (std::size_t d = 0; d < n; ++d) sum[d] = count[d] ? sum[d] / count[d] : fill;
    return sum;
}

AlignedFrame assemble_textual_features(std::span<const TextRecord> records, const TopicModel& model,
                                       std::span<const int> selected_topics, const TradingCalendar& calendar,
                                       TextFill fill) {
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    const auto masks = classify_source(records);
    rows.emplace_back("news-sentiment", pool_daily(records, masks.news, TextField::Sentiment, calendar, fill.sentiment));
    rows.emplace_back("analysis-sentiment",
                      pool_daily(records, masks.analysis, TextField::Sentiment, calendar, fill.sentiment));
    rows.emplace_back("news-movement", pool_daily(records, masks.news, TextField::Movement, calendar, fill.movement));
    rows.emplace_back("analysis-movement",
                      pool_daily(records, masks.analysis, TextField::Movement, calendar, fill.movement));
    for (int k : selected_topics) {
        const auto mask = topic_mask(records, model, k);
        rows.emplace_back(fmt::format("topic-{}-sentiment", k),
                          pool_daily(records, mask, TextField::Sentiment, calendar, fill.sentiment));
        rows.emplace_back(fmt::format("topic-{}-movement", k),
                          pool_daily(records, mask, TextField::Movement, calendar, fill.movement));
    }
    AlignedFrame f;
    f.calendar = calendar;
    f.values.resize(static_cast<Index>(rows.size()), calendar.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        f.features.push_back(rows[r].first);
        for (std::size_t d = 0; d < rows[r].second.size(); ++d)
            f.values(static_cast<Index>(r), static_cast<Index>(d)) = rows[r].second[d];
    }
    return f;
}

char textual_family(std::string_view feature) {
    const bool source = feature.starts_with("news-") || feature.starts_with("analysis-");
    const bool topic = feature.starts_with("topic-");
    if (!source && !topic) return 0;
    if (feature.ends_with("-sentiment")) return source ? 'A' : 'B';
    if (feature.ends_with("-movement")) return source ? 'C' : 'D';
    return 0;
}

std::vector<TextRecord> records_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw Error("text corpus must be a JSON array");
    std::vector<TextRecord> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& o = doc[i];
        try {
            TextRecord r;
            r.id = o.contains("id") ? o.at("id").get<std::string>() : fmt::format("text-{}", i);
            r.date = Date::parse(o.at("date").get<std::string>());
            r.source = parse_source(o.at("source").get<std::string>());
            r.sentiment = o.at("sentiment").get<double>();
            r.movement = o.at("movement").get<double>();
            r.text = o.value("text", std::string{});
            r.validate();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error(fmt::format("text corpus entry {}: {}", i, e.what()));
        }
    }
    return out;
}

nlohmann::json records_to_json(std::span<const TextRecord> records) {
    auto doc = nlohmann::json::array();
    for (const auto& r : records)
        doc.push_back({{"id", r.id},
                       {"date", r.date.iso()},
                       {"source", to_string(r.source)},
                       {"sentiment", r.sentiment},
                       {"movement", r.movement},
                       {"text", r.text}});
    return doc;
}

nlohmann::json topic_model_summary(const TopicModel& model, int top_n) {
    nlohmann::json topics = nlohmann::json::array();
    for (int k = 1; k <= model.K; ++k) {
        nlohmann::json words = nlohmann::json::array();
        for (int w : model.top_words(k, top_n))
            words.push_back(static_cast<std::size_t>(w) < model.vocab.size() ? model.vocab[static_cast<std::size_t>(w)]
                                                                            : std::to_string(w));
        topics.push_back({{"topic", k},
                          {"documents", std::count(model.assignment.begin(), model.assignment.end(), k)},
                          {"top_words", words}});
    }
    return {{"K", model.K}, {"alpha", model.alpha}, {"beta", model.beta}, {"topics", topics}};
}

}  // namespace ius

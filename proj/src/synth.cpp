#include "ius/synth.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace ius {

double companion_spectral_radius(std::span<const double> ar) {
    const auto p = static_cast<Index>(ar.size());
    if (p == 0) return 0.0;
    Matrix C = Matrix::Zero(p, p);
    for (Index i = 0; i < p; ++i) C(0, i) = ar[static_cast<std::size_t>(i)];
    if (p > 1) C.bottomLeftCorner(p - 1, p - 1).setIdentity();
    Eigen::EigenSolver<Matrix> es(C, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

void SynthSpec::validate() const {
    if (n_days < 2) throw Error("synthetic panel needs at least 2 days");
    const double radius = companion_spectral_radius(ar);
    if (!(radius < 1.0)) throw Error(fmt::format("AR coefficients are not stationary (spectral radius {})", radius));
    if (!(rho >= 0.0 && rho <= 1.0)) throw Error(fmt::format("text signal strength {} outside [0, 1]", rho));
    if (!(noise_scale >= 0.0) || !(noise_feature_scale >= 0.0)) throw Error("noise scales must be non-negative");
    if (!(texts_per_day >= 0.0)) throw Error("texts_per_day must be non-negative");
    if (!(news_share >= 0.0 && news_share <= 1.0)) throw Error("news_share outside [0, 1]");
    if (!(missing_share >= 0.0 && missing_share < 0.5)) throw Error("missing_share outside [0, 0.5)");
    if (noise_features < 0) throw Error("noise_features must be non-negative");
    if (topic_corpus.topics < 1 || topic_corpus.words_per_topic < 1 || topic_corpus.doc_length < 1)
        throw Error("topic corpus sizes must be positive");
    for (const auto& f : informative) {
        if (f.lag < 0) throw Error(fmt::format("feature '{}' has a negative lag", f.name));
        if (!(f.noise >= 0.0)) throw Error(fmt::format("feature '{}' has a negative noise scale", f.name));
    }
}

TradingCalendar weekday_calendar(Date start, int n_days) {
    using namespace std::chrono;
    std::vector<Date> days;
    days.reserve(static_cast<std::size_t>(std::max(n_days, 0)));
    for (std::int32_t ord = start.ordinal(); static_cast<int>(days.size()) < n_days; ++ord) {
        const weekday wd{sys_days{std::chrono::days{ord}}};
        if (wd != Saturday && wd != Sunday) days.emplace_back(ord);
    }
    return TradingCalendar(std::move(days));
}

namespace {

// Stream separation so that panel, texts and gaps draw from unrelated generators.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), 0x5eedu};
    return std::mt19937_64(seq);
}

std::string_view topic_stem(int k) {
    static constexpr std::string_view stems[] = {"rates", "trade", "energy", "labor", "housing", "credit", "fiscal", "tech"};
    return stems[static_cast<std::size_t>(k) % std::size(stems)];
}

struct TopicSampler {
    const TopicCorpusSpec& spec;
    std::discrete_distribution<int> zipf;

    explicit TopicSampler(const TopicCorpusSpec& s) : spec(s) {
        std::vector<double> w(static_cast<std::size_t>(s.words_per_topic));
        for (std::size_t r = 0; r < w.size(); ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), s.zipf_exponent);
        zipf = std::discrete_distribution<int>(w.begin(), w.end());
    }

    std::string word(int topic, int rank) const {
        const int round = topic / 8;
        return round ? fmt::format("{}{}w{:02}", topic_stem(topic), round, rank) : fmt::format("{}{:02}", topic_stem(topic), rank);
    }

    std::string document(int topic, std::mt19937_64& rng) {
        std::poisson_distribution<int> length(spec.doc_length);
        std::bernoulli_distribution stray(spec.topics > 1 ? spec.mix : 0.0);
        std::uniform_int_distribution<int> other(0, std::max(spec.topics - 2, 0));
        const int n = std::max(1, length(rng));
        std::string text = "The";
        for (int i = 0; i < n; ++i) {
            int k = topic;
            if (stray(rng)) {
                k = other(rng);
                if (k >= topic) ++k;
            }
            text += ' ';
            text += word(k, zipf(rng));
        }
        text += '.';
        return text;
    }
};

}  // namespace

Panel gen_panel(const SynthSpec& spec) {
    spec.validate();
    auto rng = stream(spec.seed, 1);
    std::normal_distribution<double> z(0.0, 1.0);

    int lead = 0;
    for (const auto& f : spec.informative) lead = std::max(lead, f.lag);
    const int burn_in = 200;
    const int total = burn_in + spec.n_days + lead;
    const auto p = spec.ar.size();
    std::vector<double> x(static_cast<std::size_t>(total), 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double v = spec.noise_scale * z(rng);
        for (std::size_t i = 0; i < p && i < t; ++i) v += spec.ar[i] * x[t - 1 - i];
        x[t] = v;
    }
    const auto target = [&](int d) { return spec.level + x[static_cast<std::size_t>(burn_in + d)]; };

    const auto n_rows = static_cast<Index>(1 + spec.informative.size()) + spec.noise_features;
    Panel out;
    out.target = spec.target_name;
    out.frame.calendar = weekday_calendar(spec.start, spec.n_days);
    out.frame.values.resize(n_rows, spec.n_days);
    out.frame.features.push_back(spec.target_name);
    for (int d = 0; d < spec.n_days; ++d) out.frame.values(0, d) = target(d);
    Index row = 1;
    for (const auto& f : spec.informative) {
        out.frame.features.push_back(f.name);
        for (int d = 0; d < spec.n_days; ++d)
            out.frame.values(row, d) = f.loading * target(d + f.lag) + f.noise * z(rng);
        ++row;
    }
    for (int j = 0; j < spec.noise_features; ++j) {
        out.frame.features.push_back(fmt::format("noise{:02}", j + 1));
        for (int d = 0; d < spec.n_days; ++d) out.frame.values(row, d) = spec.noise_feature_scale * z(rng);
        ++row;
    }
    out.frame.validate();
    return out;
}

TopicCorpus gen_topic_corpus(const TopicCorpusSpec& spec, int documents, std::uint64_t seed) {
    auto rng = stream(seed, 3);
    TopicSampler sampler(spec);
    std::uniform_int_distribution<int> pick(0, spec.topics - 1);
    TopicCorpus out;
    for (int i = 0; i < documents; ++i) {
        const int k = pick(rng);
        out.planted.push_back(k);
        out.texts.push_back(sampler.document(k, rng));
    }
    auto tok = tokenize_corpus(out.texts, default_stopwords(), 1);
    out.bags = std::move(tok.bags);
    out.vocab = std::move(tok.vocab.words);
    return out;
}

SynthTexts gen_texts(const SynthSpec& spec, const TradingCalendar& calendar, std::span<const double> target) {
    if (!(spec.rho >= 0.0 && spec.rho <= 1.0)) throw Error(fmt::format("text signal strength {} outside [0, 1]", spec.rho));
    if (static_cast<Index>(target.size()) != calendar.size()) throw Error("target length differs from the calendar");
    auto rng = stream(spec.seed, 2);
    TopicSampler sampler(spec.topic_corpus);
    std::poisson_distribution<int> per_day(spec.texts_per_day);
    std::bernoulli_distribution is_news(spec.news_share);
    std::uniform_int_distribution<int> pick(0, spec.topic_corpus.topics - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0), u11(-1.0, 1.0);
    const auto labels = label_movement(target);

    SynthTexts out;
    for (std::size_t d = 0; d + 1 < target.size(); ++d) {
        const int n = spec.texts_per_day > 0.0 ? per_day(rng) : 0;
        const double ret = (target[d + 1] - target[d]) / target[d];
        const double signed_signal = std::clamp(spec.sentiment_gain * ret, -1.0, 1.0);
        for (int i = 0; i < n; ++i) {
            TextRecord r;
            r.id = fmt::format("t{:05}-{}", d, i);
            r.date = calendar[static_cast<Index>(d)];
            r.source = is_news(rng) ? Source::News : Source::Analysis;
            r.movement = spec.rho * labels[d] + (1.0 - spec.rho) * u01(rng);
            r.sentiment = std::clamp(spec.rho * signed_signal + (1.0 - spec.rho) * u11(rng), -1.0, 1.0);
            const int k = pick(rng);
            r.text = sampler.document(k, rng);
            out.planted.push_back(k);
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

double topic_purity(std::span<const int> found_1based, std::span<const int> planted, int found_topics,
                    int planted_topics) {
    if (found_1based.size() != planted.size()) throw Error("purity: label vectors differ in length");
    if (planted.empty()) return 0.0;
    const int m = std::max(found_topics, planted_topics);
    if (m > 9) throw Error("purity: too many topics for exhaustive matching");
    std::vector<std::vector<int>> table(static_cast<std::size_t>(m), std::vector<int>(static_cast<std::size_t>(m), 0));
    for (std::size_t i = 0; i < planted.size(); ++i)
        ++table[static_cast<std::size_t>(found_1based[i] - 1)][static_cast<std::size_t>(planted[i])];
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    int best = 0;
    do {
        int hit = 0;
        for (int k = 0; k < m; ++k) hit += table[static_cast<std::size_t>(k)][static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(planted.size());
}

SynthSpec default_synth_spec(std::uint64_t seed) {
    SynthSpec s;
    s.seed = seed;
    s.informative = {{"lead1", 2, 1.0, 0.004},
                     {"lead2", 1, -0.8, 0.004},
                     {"lead3", 3, 0.5, 0.003},
                     {"lead4", 1, 1.2, 0.006},
                     {"lead5", 2, 0.7, 0.004}};
    s.noise_features = 15;
    s.noise_feature_scale = 0.01;
    s.missing_share = 0.02;
    return s;
}

nlohmann::json synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::json inf = nlohmann::json::array();
    for (const auto& f : spec.informative)
        inf.push_back({{"name", f.name}, {"lag", f.lag}, {"loading", f.loading}, {"noise", f.noise}});
    return {{"n_days", spec.n_days},
            {"start", spec.start.iso()},
            {"target_name", spec.target_name},
            {"level", spec.level},
            {"ar", spec.ar},
            {"noise_scale", spec.noise_scale},
            {"informative", inf},
            {"noise_features", spec.noise_features},
            {"noise_feature_scale", spec.noise_feature_scale},
            {"rho", spec.rho},
            {"texts_per_day", spec.texts_per_day},
            {"news_share", spec.news_share},
            {"sentiment_gain", spec.sentiment_gain},
            {"topic_corpus",
             {{"topics", spec.topic_corpus.topics},
              {"words_per_topic", spec.topic_corpus.words_per_topic},
              {"zipf_exponent", spec.topic_corpus.zipf_exponent},
              {"doc_length", spec.topic_corpus.doc_length},
              {"mix", spec.topic_corpus.mix}}},
            {"missing_share", spec.missing_share},
            {"seed", spec.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& doc) {
    SynthSpec s = default_synth_spec(doc.value("seed", std::uint64_t{1}));
    try {
        s.n_days = doc.value("n_days", s.n_days);
        if (doc.contains("start")) s.start = Date::parse(doc.at("start").get<std::string>());
        s.target_name = doc.value("target_name", s.target_name);
        s.level = doc.value("level", s.level);
        s.ar = doc.value("ar", s.ar);
        s.noise_scale = doc.value("noise_scale", s.noise_scale);
        if (doc.contains("informative")) {
            s.informative.clear();
            for (const auto& f : doc.at("informative"))
                s.informative.push_back({f.at("name").get<std::string>(), f.value("lag", 1), f.value("loading", 1.0),
                                         f.value("noise", 0.0)});
        }
        s.noise_features = doc.value("noise_features", s.noise_features);
        s.noise_feature_scale = doc.value("noise_feature_scale", s.noise_feature_scale);
        s.rho = doc.value("rho", s.rho);
        s.texts_per_day = doc.value("texts_per_day", s.texts_per_day);
        s.news_share = doc.value("news_share", s.news_share);
        s.sentiment_gain = doc.value("sentiment_gain", s.sentiment_gain);
        if (doc.contains("topic_corpus")) {
            const auto& t = doc.at("topic_corpus");
            s.topic_corpus.topics = t.value("topics", s.topic_corpus.topics);
            s.topic_corpus.words_per_topic = t.value("words_per_topic", s.topic_corpus.words_per_topic);
            s.topic_corpus.zipf_exponent = t.value("zipf_exponent", s.topic_corpus.zipf_exponent);
            s.topic_corpus.doc_length = t.value("doc_length", s.topic_corpus.doc_length);
            s.topic_corpus.mix = t.value("mix", s.topic_corpus.mix);
        }
        s.missing_share = doc.value("missing_share", s.missing_share);
    } catch (const nlohmann::json::exception& e) {
        throw Error(fmt::format("synthetic spec: {}", e.what()));
    }
    s.validate();
    return s;
}

Workspace write_workspace(const SynthSpec& spec, const std::string& dir) {
    namespace fs = std::filesystem;
    const auto panel = gen_panel(spec);
    const auto& frame = panel.frame;
    fs::create_directories(fs::path(dir) / "series");

    auto gaps = stream(spec.seed, 4);
    std::bernoulli_distribution blank(spec.missing_share);
    nlohmann::json series = nlohmann::json::array();
    for (Index r = 0; r < frame.feature_count(); ++r) {
        const auto& name = frame.features[static_cast<std::size_t>(r)];
        std::string csv = "date,value\n";
        for (Index d = 0; d < frame.day_count(); ++d) {
            const bool edge = d == 0 || d + 1 == frame.day_count();
            if (!edge && blank(gaps))
                csv += fmt::format("{},\n", frame.calendar[d].iso());
            else
                csv += fmt::format("{},{}\n", frame.calendar[d].iso(), format_real(frame.values(r, d)));
        }
        const auto rel = fmt::format("series/{}.csv", name);
        write_text_file((fs::path(dir) / rel).string(), csv);
        series.push_back({{"name", name}, {"path", rel}, {"date_column", "date"}, {"value_column", "value"}});
    }

    const std::vector<double> target(frame.values.row(0).begin(), frame.values.row(0).end());
    const auto texts = gen_texts(spec, frame.calendar, target);
    write_text_file((fs::path(dir) / "texts.json").string(), records_to_json(texts.records).dump(1) + "\n");

    nlohmann::json lags = nlohmann::json::object();
    for (const auto& f : spec.informative) lags[f.name] = f.lag;
    const nlohmann::json truth{{"target", panel.target},
                               {"planted_lags", lags},
                               {"planted_topics", spec.topic_corpus.topics},
                               {"planted_topic_of_text", texts.planted},
                               {"spec", synth_spec_to_json(spec)}};
    write_text_file((fs::path(dir) / "truth.json").string(), truth.dump(1) + "\n");

    const nlohmann::json config{{"series", series},
                                {"target", panel.target},
                                {"texts", "texts.json"},
                                {"seed", spec.seed}};
    Workspace ws{dir, (fs::path(dir) / "config.json").string()};
    write_text_file(ws.config_path, config.dump(2) + "\n");
    return ws;
}

}  // namespace ius

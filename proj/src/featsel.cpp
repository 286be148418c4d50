#include "ius/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace ius {

Matrix var_design(const Matrix& Y, int p) {
    const Index n = Y.rows();
    const Index T = Y.cols();
    if (p < 0) throw Error("VAR lag order must be >= 0");
    if (T <= p) throw Error(fmt::format("VAR({}) needs more than {} observations", p, p));
    Matrix X(T - p, 1 + n * p);
    X.col(0).setOnes();
    for (int k = 1; k <= p; ++k) X.middleCols(1 + (k - 1) * n, n) = Y.middleCols(p - k, T - p).transpose();
    return X;
}

VarFit fit_var(const Matrix& Y, int p) {
    const Index n = Y.rows();
    const Index T = Y.cols();
    if (n < 1) throw Error("VAR needs at least one series");
    if (T <= p * n + 1)
        throw Error(fmt::format("VAR({}) on {} series needs T > {}, have {}", p, n, p * n + 1, T));
    if (!Y.allFinite()) throw Error("VAR input must be finite");

    const Matrix X = var_design(Y, p);
    const Matrix Z = Y.rightCols(T - p).transpose();  // T_eff x n

    if (p > 0) {
        // Attribute rank loss to a row of Y where we can: a constant regressor
        // column duplicates the intercept.
        for (Index j = 1; j < X.cols(); ++j) {
            if (X.col(j).maxCoeff() == X.col(j).minCoeff()) {
                const Index feature = (j - 1) % n;
                throw RankDeficientError(
                    fmt::format("VAR({}): regressor for series {} is constant (rank deficient)", p, feature), feature);
            }
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < X.cols()) {
        const Index col = qr.colsPermutation().indices()(qr.rank());
        const Index feature = col == 0 ? -1 : (col - 1) % n;
        throw RankDeficientError(
            fmt::format("VAR({}): regressor matrix has rank {} < {} (series {})", p, qr.rank(), X.cols(), feature),
            feature);
    }
    const Matrix B = qr.solve(Z);  // (1 + n p) x n
    const Matrix E = Z - X * B;

    VarFit fit;
    fit.p = p;
    fit.T_eff = T - p;
    fit.c = B.row(0).transpose();
    for (int k = 1; k <= p; ++k) fit.A.push_back(B.middleRows(1 + (k - 1) * n, n).transpose());
    fit.residuals = E.transpose();
    fit.sigma = (E.transpose() * E) / static_cast<double>(fit.T_eff);
    return fit;
}

AicValue aic(const VarFit& fit, Index n, Index T) {
    if (T <= 0) throw Error("AIC needs T > 0");
    AicValue out;
    double det = fit.sigma.determinant();
    if (!(det > 0.0)) {
        det = (fit.sigma + 1e-12 * Matrix::Identity(fit.sigma.rows(), fit.sigma.cols())).determinant();
        out.regularized = true;
    }
    if (!(det > 0.0) || !std::isfinite(det)) throw Error("AIC: residual covariance determinant is not positive");
    out.value = std::log(det) + 2.0 * fit.p * static_cast<double>(n * n) / static_cast<double>(T);
    return out;
}

LagSelection select_lag(std::span<const double> target, std::span<const double> feature, int p_min, int p_max,
                        AicSampleSize sample_size) {
    if (target.size() != feature.size()) throw Error("select_lag: series lengths differ");
    if (p_min < 0 || p_max < p_min) throw Error("select_lag: invalid lag range");
    const auto T = static_cast<Index>(target.size());
    Matrix Y(2, T);
    Y.row(0) = Eigen::Map<const RowVector>(target.data(), T);
    Y.row(1) = Eigen::Map<const RowVector>(feature.data(), T);

    LagSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (int p = p_min; p <= p_max; ++p) {
        const auto fit = fit_var(Y, p);
        const auto a = aic(fit, 2, sample_size == AicSampleSize::Raw ? T : fit.T_eff);
        sel.lags.push_back(p);
        sel.aic.push_back(a.value);
        sel.regularized = sel.regularized || a.regularized;
        if (a.value < best) {
            best = a.value;
            sel.best_lag = p;
        }
    }
    return sel;
}

std::optional<int> LagTable::lag_of(std::string_view feature) const {
    for (const auto& e : entries)
        if (e.feature == feature) return e.lag;
    return std::nullopt;
}

int LagTable::max_lag() const {
    int m = 0;
    for (const auto& e : entries) m = std::max(m, e.lag);
    return m;
}

LagTable select_lags(const AlignedFrame& frame, std::string_view target, int p_min, int p_max,
                     AicSampleSize sample_size) {
    const Index t = frame.require(target);
    const RowVector y = frame.values.row(t);
    LagTable table;
    for (Index r = 0; r < frame.feature_count(); ++r) {
        if (r == t) continue;
        const RowVector x = frame.values.row(r);
        const auto& name = frame.features[static_cast<std::size_t>(r)];
        LagSelection sel;
        try {
            sel = select_lag({y.data(), static_cast<std::size_t>(y.size())},
                             {x.data(), static_cast<std::size_t>(x.size())}, p_min, p_max, sample_size);
        } catch (const Error& e) {
            throw Error(fmt::format("lag scan for '{}': {}", name, e.what()));
        }
        LagEntry entry;
        entry.feature = name;
        entry.lag = sel.best_lag;
        entry.aic = sel.aic[static_cast<std::size_t>(sel.best_lag - p_min)];
        entry.regularized = sel.regularized;
        entry.lags = std::move(sel.lags);
        entry.curve = std::move(sel.aic);
        table.entries.push_back(std::move(entry));
    }
    return table;
}

AlignedFrame apply_lags(const AlignedFrame& frame, const LagTable& lags, std::string_view target) {
    const Index t = frame.require(target);
    std::vector<int> shift(static_cast<std::size_t>(frame.feature_count()), 0);
    for (Index r = 0; r < frame.feature_count(); ++r) {
        if (r == t) continue;
        const auto& name = frame.features[static_cast<std::size_t>(r)];
        const auto lag = lags.lag_of(name);
        if (!lag) throw Error(fmt::format("apply_lags: no lag for feature '{}'", name));
        if (*lag < 0) throw Error(fmt::format("apply_lags: negative lag for '{}'", name));
        if (*lag >= frame.day_count())
            throw Error(fmt::format("apply_lags: lag {} for '{}' exceeds calendar length {}", *lag, name,
                                    frame.day_count()));
        shift[static_cast<std::size_t>(r)] = *lag;
    }
    const int trim = *std::max_element(shift.begin(), shift.end());
    const Index days = frame.day_count() - trim;

    AlignedFrame out;
    out.features = frame.features;
    out.metadata = frame.metadata;
    out.metadata["lag_trim_days"] = std::to_string(trim);
    out.calendar = frame.calendar.slice(trim, frame.day_count() - 1);
    out.values.resize(frame.feature_count(), days);
    for (Index r = 0; r < frame.feature_count(); ++r)
        out.values.row(r) = frame.values.row(r).segment(trim - shift[static_cast<std::size_t>(r)], days);
    return out;
}

nlohmann::json lag_table_to_json(const LagTable& table) {
    nlohmann::json doc;
    doc["format"] = "ius.lag-table/1";
    auto& rows = doc["entries"] = nlohmann::json::array();
    for (const auto& e : table.entries) {
        rows.push_back({{"feature", e.feature},
                        {"lag", e.lag},
                        {"aic", e.aic},
                        {"regularized", e.regularized},
                        {"lags", e.lags},
                        {"curve", e.curve}});
    }
    return doc;
}

LagTable lag_table_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ius.lag-table/1") throw Error("not a lag table document");
    LagTable table;
    for (const auto& r : doc.at("entries")) {
        LagEntry e;
        e.feature = r.at("feature");
        e.lag = r.at("lag");
        e.aic = r.at("aic");
        e.regularized = r.value("regularized", false);
        e.lags = r.value("lags", std::vector<int>{});
        e.curve = r.value("curve", std::vector<double>{});
        table.entries.push_back(std::move(e));
    }
    return table;
}

std::string aic_curves_csv(const LagTable& table) {
    std::string out = "feature,lag,aic\n";
    for (const auto& e : table.entries)
        for (std::size_t i = 0; i < e.lags.size(); ++i)
            out += fmt::format("{},{},{}\n", e.feature, e.lags[i], format_real(e.curve[i]));
    return out;
}

std::vector<std::string> ImportanceRanking::top(std::size_t k) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) out.push_back(entries[i].feature);
    return out;
}

std::vector<std::string> ImportanceRanking::kept() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        if (e.round == 0) out.push_back(e.feature);
    return out;
}

ImportanceRanking rfe(const AlignedFrame& features, std::span<const double> target, int keep, int step,
                      const ForestParams& forest_params) {
    const Index p = features.feature_count();
    if (keep < 1) throw Error("rfe: keep must be >= 1");
    if (step < 1) throw Error("rfe: step must be >= 1");
    if (keep > p) throw Error(fmt::format("rfe: keep={} exceeds feature count {}", keep, p));
    if (static_cast<Index>(target.size()) != features.day_count()) throw Error("rfe: target length mismatch");

    const Vector y = Eigen::Map<const Vector>(target.data(), static_cast<Index>(target.size()));
    std::vector<Index> active(static_cast<std::size_t>(p));
    std::iota(active.begin(), active.end(), Index{0});
    std::vector<RankedFeature> eliminated;  // in elimination order
    ImportanceRanking ranking;

    for (int round = 1;; ++round) {
        Matrix X(features.day_count(), static_cast<Index>(active.size()));
        for (std::size_t j = 0; j < active.size(); ++j)
            X.col(static_cast<Index>(j)) = features.values.row(active[j]).transpose();
        const Vector imp = importance(fit_forest(X, y, forest_params));

        // Least important first; equal importances drop the higher feature index first.
        std::vector<std::size_t> order(active.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ia = imp(static_cast<Index>(a));
            const double ib = imp(static_cast<Index>(b));
            if (ia != ib) return ia < ib;
            return active[a] > active[b];
        });

        const auto excess = static_cast<int>(active.size()) - keep;
        if (excess <= 0) {
            // Retained set, most important first.
            for (auto it = order.rbegin(); it != order.rend(); ++it)
                ranking.entries.push_back(
                    {features.features[static_cast<std::size_t>(active[*it])], imp(static_cast<Index>(*it)), 0});
            ranking.rounds = round - 1;
            break;
        }
        const auto drop = static_cast<std::size_t>(std::min(step, excess));
        std::vector<bool> remove(active.size(), false);
        for (std::size_t k = 0; k < drop; ++k) {
            remove[order[k]] = true;
            eliminated.push_back(
                {features.features[static_cast<std::size_t>(active[order[k]])], imp(static_cast<Index>(order[k])), round});
        }
        std::vector<Index> next;
        for (std::size_t j = 0; j < active.size(); ++j)
            if (!remove[j]) next.push_back(active[j]);
        active = std::move(next);
    }
    ranking.entries.insert(ranking.entries.end(), eliminated.rbegin(), eliminated.rend());
    return ranking;
}

nlohmann::json ranking_to_json(const ImportanceRanking& ranking) {
    nlohmann::json doc;
    doc["format"] = "ius.importance-ranking/1";
    doc["rounds"] = ranking.rounds;
    auto& rows = doc["entries"] = nlohmann::json::array();
    for (const auto& e : ranking.entries)
        rows.push_back({{"feature", e.feature}, {"importance", e.importance}, {"round", e.round}});
    return doc;
}

ImportanceRanking ranking_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "ius.importance-ranking/1") throw Error("not an importance ranking document");
    ImportanceRanking r;
    r.rounds = doc.at("rounds");
    for (const auto& e : doc.at("entries")) r.entries.push_back({e.at("feature"), e.at("importance"), e.at("round")});
    return r;
}

double MinMaxScaling::normalize(std::string_view feature, double v) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i] != feature) continue;
        const double range = max(static_cast<Index>(i)) - min(static_cast<Index>(i));
        return range > 0.0 ? (v - min(static_cast<Index>(i))) / range : 0.0;
    }
    throw Error(fmt::format("no normalization metadata for '{}'", feature));
}

double MinMaxScaling::denormalize(std::string_view feature, double v) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i] != feature) continue;
        return min(static_cast<Index>(i)) + v * (max(static_cast<Index>(i)) - min(static_cast<Index>(i)));
    }
    throw Error(fmt::format("no normalization metadata for '{}'", feature));
}

NormalizedFrame minmax_normalize(const AlignedFrame& frame) {
    NormalizedFrame out;
    out.frame = frame;
    out.frame.values = minmax_rows(frame.values);
    out.scaling.features = frame.features;
    out.scaling.min = frame.values.rowwise().minCoeff();
    out.scaling.max = frame.values.rowwise().maxCoeff();
    for (Index r = 0; r < frame.feature_count(); ++r) {
        if (out.scaling.max(r) == out.scaling.min(r))
            out.warnings.push_back(
                fmt::format("feature '{}' is constant; normalized to 0", frame.features[static_cast<std::size_t>(r)]));
    }
    return out;
}

nlohmann::json scaling_to_json(const MinMaxScaling& s) {
    return {{"features", s.features},
            {"min", std::vector<double>(s.min.begin(), s.min.end())},
            {"max", std::vector<double>(s.max.begin(), s.max.end())}};
}

MinMaxScaling scaling_from_json(const nlohmann::json& doc) {
    MinMaxScaling s;
    s.features = doc.at("features").get<std::vector<std::string>>();
    const auto lo = doc.at("min").get<std::vector<double>>();
    const auto hi = doc.at("max").get<std::vector<double>>();
    if (lo.size() != s.features.size() || hi.size() != s.features.size()) throw Error("scaling document size mismatch");
    s.min = Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size()));
    s.max = Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size()));
    return s;
}

}  // namespace ius

#include "ius/eval.hpp"
#include "ius/ingest.hpp"

#include <algorithm>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace ius {

void detail::check_metric_lengths(Index predicted, Index actual) {
    if (predicted != actual) throw Error(fmt::format("metric: {} predictions vs {} actuals", predicted, actual));
    if (predicted == 0) throw Error("metric: empty series");
}

namespace {
Eigen::Map<const Vector> view(std::span<const double> s) {
    return {s.data(), static_cast<Index>(s.size())};
}
}  // namespace

double mae(std::span<const double> predicted, std::span<const double> actual) {
    return mae(view(predicted), view(actual));
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
    return rmse(view(predicted), view(actual));
}

double percentage_improvement(double metric_reference, double metric_combined) {
    if (!(metric_reference > 0.0)) throw Error("percentage improvement needs a positive reference metric");
    return (metric_reference - metric_combined) / metric_reference * 100.0;
}

DmResult dm_test_differential(std::span<const double> differential, int horizon, bool small_sample_correction) {
    const auto n = static_cast<Index>(differential.size());
    if (n < 10) throw Error(fmt::format("DM test needs at least 10 observations, have {}", n));
    if (horizon < 1) throw Error("DM test horizon must be >= 1");

    DmResult out;
    out.horizon = horizon;
    out.small_sample_corrected = small_sample_correction;
    const Vector d = view(differential);
    const double mean = d.mean();
    const Vector centered = d.array() - mean;
    const auto autocov = [&](Index k) {
        return centered.tail(n - k).dot(centered.head(n - k)) / static_cast<double>(n);
    };
    double lrv = autocov(0);
    for (int k = 1; k < horizon && k < n; ++k) lrv += 2.0 * autocov(k);
    if (!(lrv > 0.0)) {
        out.degenerate = true;
        out.statistic = 0.0;
        out.p_value = 1.0;
        return out;
    }
    double stat = mean / std::sqrt(lrv / static_cast<double>(n));
    const double h = horizon;
    const double nn = static_cast<double>(n);
    if (small_sample_correction) {
        stat *= std::sqrt((nn + 1.0 - 2.0 * h + h * (h - 1.0) / nn) / nn);
        const boost::math::students_t dist(nn - 1.0);
        out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat)));
    } else {
        out.p_value = std::erfc(std::abs(stat) / std::sqrt(2.0));
    }
    out.statistic = stat;
    out.p_value = std::clamp(out.p_value, 0.0, 1.0);
    return out;
}

DmResult dm_test(std::span<const double> errors_a, std::span<const double> errors_b, int horizon, DmLoss loss,
                 bool small_sample_correction) {
    if (errors_a.size() != errors_b.size()) throw Error("DM test: error series lengths differ");
    std::vector<double> d(errors_a.size());
    for (std::size_t t = 0; t < d.size(); ++t) {
        if (loss == DmLoss::Squared)
            d[t] = errors_a[t] * errors_a[t] - errors_b[t] * errors_b[t];
        else
            d[t] = std::abs(errors_a[t]) - std::abs(errors_b[t]);
    }
    auto out = dm_test_differential(d, horizon, small_sample_correction);
    out.loss = loss;
    return out;
}

std::string_view to_string(DmLoss loss) { return loss == DmLoss::Squared ? "squared" : "absolute"; }

DmLoss parse_dm_loss(std::string_view s) {
    if (s == "squared") return DmLoss::Squared;
    if (s == "absolute") return DmLoss::Absolute;
    throw Error(fmt::format("unknown DM loss '{}'", s));
}

std::vector<double> ForecastReport::errors() const {
    std::vector<double> e(predictions.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = predictions[i] - actuals[i];
    return e;
}

ForecastReport make_report(std::string label, std::vector<std::string> days, std::vector<double> predictions,
                           std::vector<double> actuals, nlohmann::json config) {
    if (days.size() != predictions.size()) throw Error("report: day and prediction counts differ");
    ForecastReport r;
    r.label = std::move(label);
    r.days = std::move(days);
    r.predictions = std::move(predictions);
    r.actuals = std::move(actuals);
    r.mae = mae(r.predictions, r.actuals);
    r.rmse = rmse(r.predictions, r.actuals);
    r.config = std::move(config);
    return r;
}

void attach_improvement(ForecastReport& combined, const ForecastReport& reference) {
    combined.pi_mae = percentage_improvement(reference.mae, combined.mae);
    combined.pi_rmse = percentage_improvement(reference.rmse, combined.rmse);
}

std::string report_curve_csv(const ForecastReport& report) {
    std::string out = "date,prediction,actual\n";
    for (std::size_t i = 0; i < report.predictions.size(); ++i)
        out += fmt::format("{},{},{}\n", report.days[i], format_real(report.predictions[i]),
                           format_real(report.actuals[i]));
    return out;
}

nlohmann::json report_summary_json(const ForecastReport& report) {
    nlohmann::json doc{{"label", report.label},
                       {"n", report.predictions.size()},
                       {"mae", report.mae},
                       {"rmse", report.rmse},
                       {"config", report.config}};
    if (report.pi_mae) doc["pi_mae_percent"] = *report.pi_mae;
    if (report.pi_rmse) doc["pi_rmse_percent"] = *report.pi_rmse;
    return doc;
}

std::vector<std::vector<char>> family_combinations(std::span<const char> families) {
    const auto k = families.size();
    if (k > 16) throw Error("too many feature families to enumerate");
    std::vector<std::vector<char>> out;
    for (std::size_t size = 0; size <= k; ++size) {
        // lexicographic subsets of the given size
        std::vector<bool> pick(k, false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size), true);
        do {
            std::vector<char> combo;
            for (std::size_t i = 0; i < k; ++i)
                if (pick[i]) combo.push_back(families[i]);
            out.push_back(std::move(combo));
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return out;
}

std::string combination_label(std::span<const char> families) {
    if (families.empty()) return "(0)";
    std::string out;
    for (std::size_t i = 0; i < families.size(); ++i) {
        if (i) out += '+';
        out += fmt::format("({})", families[i]);
    }
    return out;
}

void rank_cells(std::vector<AblationCell>& cells) {
    const auto n = cells.size();
    std::vector<std::size_t> order(n);
    const auto assign = [&](auto key, auto set) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
        for (std::size_t r = 0; r < n; ++r) set(order[r], static_cast<int>(r + 1));
    };
    assign([&](std::size_t i) { return cells[i].mae; }, [&](std::size_t i, int r) { cells[i].mae_rank = r; });
    assign([&](std::size_t i) { return cells[i].rmse; }, [&](std::size_t i, int r) { cells[i].rmse_rank = r; });
    for (auto& c : cells) c.weighted_score = 0.5 * c.mae_rank + 0.5 * c.rmse_rank;
    assign([&](std::size_t i) { return std::pair{cells[i].weighted_score, cells[i].mae_rank}; },
           [&](std::size_t i, int r) { cells[i].weighted_rank = r; });
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
    std::string out = "textual_features,mae,mae_rank,rmse,rmse_rank,weighted_score,weighted_rank\n";
    for (const auto& c : cells)
        out += fmt::format("{},{},{},{},{},{},{}\n", c.label, format_real(c.mae), c.mae_rank, format_real(c.rmse),
                           c.rmse_rank, format_real(c.weighted_score), c.weighted_rank);
    return out;
}

}  // namespace ius

#pragma once

#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ius {

namespace detail {
void check_metric_lengths(Index predicted, Index actual);
}

template <typename DerivedA, typename DerivedB>
double mae(const Eigen::MatrixBase<DerivedA>& predicted, const Eigen::MatrixBase<DerivedB>& actual) {
    detail::check_metric_lengths(predicted.size(), actual.size());
    return (predicted.derived().array() - actual.derived().array()).abs().mean();
}

template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& predicted, const Eigen::MatrixBase<DerivedB>& actual) {
    detail::check_metric_lengths(predicted.size(), actual.size());
    return std::sqrt((predicted.derived().array() - actual.derived().array()).square().mean());
}

double mae(std::span<const double> predicted, std::span<const double> actual);
double rmse(std::span<const double> predicted, std::span<const double> actual);

/// (reference - combined) / reference * 100.
double percentage_improvement(double metric_reference, double metric_combined);

enum class DmLoss { Squared, Absolute };

struct DmResult {
    double statistic = 0.0;  // positive when A has the larger loss
    double p_value = 1.0;
    DmLoss loss = DmLoss::Squared;
    int horizon = 1;
    bool degenerate = false;  // zero long-run variance of the loss differential
    bool small_sample_corrected = false;
};

/// Diebold-Mariano test on d_t = L(e_a,t) - L(e_b,t), rectangular long-run
/// variance with h-1 autocovariances, two-sided normal p-value. The
/// Harvey-Leybourne-Newbold correction switches to Student-t(n-1).
DmResult dm_test(std::span<const double> errors_a, std::span<const double> errors_b, int horizon = 1,
                 DmLoss loss = DmLoss::Squared, bool small_sample_correction = false);

/// Same test given the loss differential directly.
DmResult dm_test_differential(std::span<const double> differential, int horizon = 1,
                              bool small_sample_correction = false);

std::string_view to_string(DmLoss loss);
DmLoss parse_dm_loss(std::string_view s);

struct ForecastReport {
    std::string label;
    std::vector<std::string> days;
    std::vector<double> predictions;
    std::vector<double> actuals;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> pi_mae;
    std::optional<double> pi_rmse;
    nlohmann::json config;

    [[nodiscard]] std::vector<double> errors() const;
};

ForecastReport make_report(std::string label, std::vector<std::string> days, std::vector<double> predictions,
                           std::vector<double> actuals, nlohmann::json config = {});
/// Fills the PI fields against a reference report.
void attach_improvement(ForecastReport& combined, const ForecastReport& reference);

/// date,prediction,actual rows.
std::string report_curve_csv(const ForecastReport& report);
nlohmann::json report_summary_json(const ForecastReport& report);

struct AblationCell {
    std::string label;  // "(0)", "(A)", "(A)+(B)", ...
    std::vector<char> families;
    double mae = 0.0;
    double rmse = 0.0;
    int mae_rank = 0;
    int rmse_rank = 0;
    double weighted_score = 0.0;  // 0.5 * MAE rank + 0.5 * RMSE rank
    int weighted_rank = 0;        // order of weighted_score, ties by MAE rank
};

/// Every subset of `families` in size-then-lexicographic order, empty set first.
std::vector<std::vector<char>> family_combinations(std::span<const char> families);
std::string combination_label(std::span<const char> families);

/// Fills the four rank fields. Metric ties keep table order.
void rank_cells(std::vector<AblationCell>& cells);

std::string ablation_csv(const std::vector<AblationCell>& cells);

}  // namespace ius

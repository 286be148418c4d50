#pragma once

#include "ius/forest.hpp"
#include "ius/ingest.hpp"
#include "ius/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ius {

// ---------------------------------------------------------------------------
// Vector autoregression

/// Least-squares VAR(p): Y_t = c + A_1 Y_{t-1} + ... + A_p Y_{t-p} + e_t.
struct VarFit {
    int p = 0;
    std::vector<Matrix> A;  // p coefficient matrices, n x n
    Vector c;
    Matrix sigma;      // residual covariance, (1/T_eff) E E^T
    Matrix residuals;  // n x T_eff
    Index T_eff = 0;
};

/// Raised when the lagged regressor matrix is rank deficient.
class RankDeficientError : public Error {
public:
    RankDeficientError(const std::string& what, Index feature) : Error(what), feature_(feature) {}
    /// Row of Y responsible, -1 when it cannot be attributed to one row.
    [[nodiscard]] Index feature() const { return feature_; }

private:
    Index feature_;
};

/// Design matrix of a VAR(p) on `Y` (n x T): T-p rows of [1, Y_{t-1}^T, ..., Y_{t-p}^T].
Matrix var_design(const Matrix& Y, int p);

VarFit fit_var(const Matrix& Y, int p);

enum class AicSampleSize { Raw, Effective };

struct AicValue {
    double value = 0.0;
    bool regularized = false;  // 1e-12 added to the diagonal of sigma
};

/// ln det(sigma) + 2 p n^2 / T.
AicValue aic(const VarFit& fit, Index n, Index T);

struct LagSelection {
    int best_lag = 0;
    std::vector<int> lags;
    std::vector<double> aic;
    bool regularized = false;
};

/// Bivariate (target, feature) AIC scan over [p_min, p_max]; ties go to the smaller lag.
LagSelection select_lag(std::span<const double> target, std::span<const double> feature, int p_min = 0,
                        int p_max = 10, AicSampleSize sample_size = AicSampleSize::Raw);

struct LagEntry {
    std::string feature;
    int lag = 0;
    double aic = 0.0;
    bool regularized = false;
    std::vector<int> lags;
    std::vector<double> curve;
};

struct LagTable {
    std::vector<LagEntry> entries;

    [[nodiscard]] std::optional<int> lag_of(std::string_view feature) const;
    [[nodiscard]] int max_lag() const;
};

/// One lag scan per non-target row of the frame.
LagTable select_lags(const AlignedFrame& frame, std::string_view target, int p_min = 0, int p_max = 10,
                     AicSampleSize sample_size = AicSampleSize::Raw);

/// Shifts each feature so that day d holds its value from day d - lag, then
/// drops the first max-lag days from every row. The target row is not shifted.
AlignedFrame apply_lags(const AlignedFrame& frame, const LagTable& lags, std::string_view target);

nlohmann::json lag_table_to_json(const LagTable& table);
LagTable lag_table_from_json(const nlohmann::json& doc);
/// feature,lag,aic rows for plotting.
std::string aic_curves_csv(const LagTable& table);

// ---------------------------------------------------------------------------
// Recursive feature elimination

struct RankedFeature {
    std::string feature;
    double importance = 0.0;  // importance in the last fit the feature took part in
    int round = 0;            // elimination round (1-based); 0 for retained features
};

struct ImportanceRanking {
    /// Retained features first (by importance), then eliminated ones, latest round first.
    std::vector<RankedFeature> entries;
    int rounds = 0;

    [[nodiscard]] std::vector<std::string> top(std::size_t k) const;
    [[nodiscard]] std::vector<std::string> kept() const;
};

/// Samples are the frame's days; `target` has one value per day.
ImportanceRanking rfe(const AlignedFrame& features, std::span<const double> target, int keep, int step,
                      const ForestParams& forest_params);

nlohmann::json ranking_to_json(const ImportanceRanking& ranking);
ImportanceRanking ranking_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Min-max scaling

struct MinMaxScaling {
    std::vector<std::string> features;
    Vector min;
    Vector max;

    [[nodiscard]] double normalize(std::string_view feature, double v) const;
    [[nodiscard]] double denormalize(std::string_view feature, double v) const;
};

struct NormalizedFrame {
    AlignedFrame frame;
    MinMaxScaling scaling;
    std::vector<std::string> warnings;
};

/// Row-wise (x - min) / (max - min); constant rows map to zero.
template <typename Derived>
Matrix minmax_rows(const Eigen::MatrixBase<Derived>& m) {
    const Vector lo = m.rowwise().minCoeff();
    const Vector range = m.rowwise().maxCoeff() - lo;
    Matrix out = m.colwise() - lo;
    for (Index r = 0; r < out.rows(); ++r) {
        if (range(r) > 0.0)
            out.row(r) /= range(r);
        else
            out.row(r).setZero();
    }
    return out;
}

NormalizedFrame minmax_normalize(const AlignedFrame& frame);

nlohmann::json scaling_to_json(const MinMaxScaling& s);
MinMaxScaling scaling_from_json(const nlohmann::json& doc);

}  // namespace ius

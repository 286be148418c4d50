#include "doctest.h"

#include "ius/featsel.hpp"

#include <random>

using namespace ius;

namespace {

Matrix ar1(int T, double phi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Matrix Y(1, T);
    double y = 0.0;
    for (int t = 0; t < T + 100; ++t) {
        y = phi * y + z(rng);
        if (t >= 100) Y(0, t - 100) = y;
    }
    return Y;
}

// Normal-equation OLS oracle, element-by-element products.
Matrix normal_equation_coefficients(const Matrix& X, const Matrix& Z) {
    Matrix XtX = Matrix::Zero(X.cols(), X.cols());
    Matrix XtZ = Matrix::Zero(X.cols(), Z.cols());
    for (Index t = 0; t < X.rows(); ++t) {
        for (Index i = 0; i < X.cols(); ++i) {
            for (Index j = 0; j < X.cols(); ++j) XtX(i, j) += X(t, i) * X(t, j);
            for (Index k = 0; k < Z.cols(); ++k) XtZ(i, k) += X(t, i) * Z(t, k);
        }
    }
    return XtX.ldlt().solve(XtZ);
}

AlignedFrame frame_of(const Matrix& values, std::vector<std::string> names) {
    AlignedFrame f;
    std::vector<Date> days;
    for (Index d = 0; d < values.cols(); ++d) days.emplace_back(static_cast<std::int32_t>(19000 + d));
    f.calendar = TradingCalendar(std::move(days));
    f.features = std::move(names);
    f.values = values;
    return f;
}

}  // namespace

TEST_CASE("fit_var recovers an AR(1) coefficient and matches the OLS oracle") {
    const Matrix Y = ar1(500, 0.5, 42);
    const auto fit = fit_var(Y, 1);
    CHECK(fit.T_eff == 499);
    CHECK(std::abs(fit.A[0](0, 0) - 0.5) < 0.1);
    const Matrix B = normal_equation_coefficients(var_design(Y, 1), Y.rightCols(499).transpose());
    CHECK(fit.c(0) == doctest::Approx(B(0, 0)).epsilon(1e-9));
    CHECK(fit.A[0](0, 0) == doctest::Approx(B(1, 0)).epsilon(1e-9));
}

TEST_CASE("fit_var residuals are orthogonal to regressors") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    Matrix Y(3, 200);
    for (Index i = 0; i < Y.size(); ++i) Y.data()[i] = z(rng);
    for (Index t = 1; t < 200; ++t) Y.col(t) += 0.4 * Y.col(t - 1);
    for (int p : {0, 1, 3}) {
        const auto fit = fit_var(Y, p);
        const Matrix X = var_design(Y, p);
        const Matrix normal = X.transpose() * fit.residuals.transpose();
        CHECK(normal.cwiseAbs().maxCoeff() < 1e-8);
        // symmetric positive semidefinite covariance
        CHECK((fit.sigma - fit.sigma.transpose()).norm() < 1e-14);
        CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(fit.sigma).eigenvalues().minCoeff() >= -1e-14);
    }
}

TEST_CASE("fit_var edge cases") {
    SUBCASE("constant series is rank deficient") {
        Matrix Y(2, 50);
        Y.row(0).setConstant(1.2);
        Y.row(1) = ar1(50, 0.3, 1);
        try {
            fit_var(Y, 1);
            FAIL("expected rank deficiency");
        } catch (const RankDeficientError& e) {
            CHECK(e.feature() == 0);
        }
    }
    SUBCASE("p = 0 demeans") {
        const Matrix Y = ar1(100, 0.2, 5);
        const auto fit = fit_var(Y, 0);
        CHECK(fit.A.empty());
        CHECK(fit.c(0) == doctest::Approx(Y.mean()));
        const double var = (Y.array() - Y.mean()).square().sum() / 100.0;
        CHECK(fit.sigma(0, 0) == doctest::Approx(var).epsilon(1e-12));
        const Matrix demeaned = (Y.array() - Y.mean()).matrix();
        CHECK(fit.residuals.isApprox(demeaned, 1e-12));
    }
    SUBCASE("too few observations") { CHECK_THROWS_AS(fit_var(ar1(10, 0.1, 2), 9), Error); }
}

TEST_CASE("aic") {
    VarFit fit;
    fit.p = 1;
    fit.sigma = Matrix::Identity(2, 2);
    CHECK(aic(fit, 2, 100).value == doctest::Approx(0.08));
    fit.p = 0;
    CHECK(aic(fit, 2, 100).value == doctest::Approx(0.0));
    fit.p = 3;
    fit.sigma << 2.0, 0.5, 0.5, 1.0;
    const double ld = std::log(1.75);
    const double pen100 = aic(fit, 2, 100).value - ld;
    const double pen200 = aic(fit, 2, 200).value - ld;
    CHECK(pen200 == doctest::Approx(pen100 / 2.0));
    SUBCASE("singular covariance is regularized") {
        fit.sigma = Matrix::Zero(2, 2);
        fit.sigma(0, 0) = 1.0;
        const auto a = aic(fit, 2, 100);
        CHECK(a.regularized);
        CHECK(std::isfinite(a.value));
    }
}

TEST_CASE("select_lag") {
    const Matrix a = ar1(300, 0.5, 3), b = ar1(300, 0.5, 4);
    const std::vector<double> x(a.data(), a.data() + 300), y(b.data(), b.data() + 300);
    SUBCASE("singleton range") {
        const auto s = select_lag(x, y, 3, 3);
        CHECK(s.best_lag == 3);
        CHECK(s.aic.size() == 1);
    }
    SUBCASE("scan is invariant to the ordering of the pair") {
        const auto s1 = select_lag(x, y);
        const auto s2 = select_lag(y, x);
        CHECK(s1.best_lag == s2.best_lag);
        for (std::size_t i = 0; i < s1.aic.size(); ++i) CHECK(s1.aic[i] == doctest::Approx(s2.aic[i]).epsilon(1e-10));
    }
    SUBCASE("independent AR(1) pair picks a small lag") {
        const auto s = select_lag(x, y);
        CHECK(s.best_lag <= 2);
        CHECK(s.lags.size() == 11);
    }
    SUBCASE("length mismatch") { CHECK_THROWS_AS(select_lag(x, std::vector<double>(10)), Error); }
}

TEST_CASE("apply_lags") {
    Matrix v(3, 470);
    for (Index d = 0; d < 470; ++d) {
        v(0, d) = static_cast<double>(d);
        v(1, d) = 1000.0 + static_cast<double>(d);
        v(2, d) = 0.0;
    }
    const auto frame = frame_of(v, {"target", "x", "zero"});
    SUBCASE("lag 0 is identity") {
        LagTable t{{{"x", 0}, {"zero", 0}}};
        const auto out = apply_lags(frame, t, "target");
        CHECK(out.values == v);
    }
    SUBCASE("trim equals max lag") {
        LagTable t{{{"x", 2}, {"zero", 7}}};
        const auto out = apply_lags(frame, t, "target");
        CHECK(out.day_count() == 463);
        CHECK(out.calendar.front() == frame.calendar[7]);
        // target row untouched on retained days
        CHECK(out.values.row(0) == v.row(0).segment(7, 463));
        // day d holds the feature's value from day d - 2
        CHECK(out.values(1, 0) == v(1, 5));
        CHECK(out.values.row(2).isZero());
        CHECK(out.metadata.at("lag_trim_days") == "7");
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(apply_lags(frame, LagTable{{{"x", 1}}}, "target"), Error);
        CHECK_THROWS_AS(apply_lags(frame, LagTable{{{"x", 470}, {"zero", 0}}}, "target"), Error);
    }
}

TEST_CASE("select_lags and lag table document") {
    Matrix v(2, 200);
    v.row(0) = ar1(200, 0.6, 11);
    v.row(1) = ar1(200, 0.6, 12);
    const auto frame = frame_of(v, {"target", "x"});
    const auto table = select_lags(frame, "target", 0, 4);
    REQUIRE(table.entries.size() == 1);
    CHECK(table.entries[0].curve.size() == 5);
    const auto back = lag_table_from_json(lag_table_to_json(table));
    CHECK(back.lag_of("x") == table.lag_of("x"));
    CHECK(aic_curves_csv(table).rfind("feature,lag,aic\nx,0,", 0) == 0);
}

TEST_CASE("rfe") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    const int days = 200;
    Matrix v(6, days);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = z(rng);
    std::vector<double> y(days);
    for (int d = 0; d < days; ++d) y[d] = 3 * v(0, d) + 2 * v(1, d) + 0.1 * z(rng);
    const auto frame = frame_of(v, {"a", "b", "n1", "n2", "n3", "n4"});
    ForestParams fp{.n_trees = 40, .seed = 2};

    SUBCASE("keeps informative features") {
        const auto r = rfe(frame, y, 2, 1, fp);
        auto kept = r.kept();
        std::sort(kept.begin(), kept.end());
        CHECK(kept == std::vector<std::string>{"a", "b"});
        CHECK(r.rounds == 4);
        CHECK(r.entries.size() == 6);
        // later rounds rank above earlier ones
        for (std::size_t i = 3; i < r.entries.size(); ++i) CHECK(r.entries[i - 1].round > r.entries[i].round);
        CHECK(r.entries[0].feature == "a");
    }
    SUBCASE("keep equals feature count") {
        const auto r = rfe(frame, y, 6, 1, fp);
        CHECK(r.rounds == 0);
        for (const auto& e : r.entries) CHECK(e.round == 0);
        for (std::size_t i = 1; i < r.entries.size(); ++i) CHECK(r.entries[i - 1].importance >= r.entries[i].importance);
    }
    SUBCASE("large step only removes the excess") {
        const auto r = rfe(frame, y, 2, 3, fp);
        CHECK(r.rounds == 2);
        int first = 0, second = 0;
        for (const auto& e : r.entries) {
            first += e.round == 1;
            second += e.round == 2;
        }
        CHECK(first == 3);
        CHECK(second == 1);
    }
    SUBCASE("deterministic and serializable") {
        const auto a = ranking_to_json(rfe(frame, y, 3, 1, fp));
        CHECK(a == ranking_to_json(rfe(frame, y, 3, 1, fp)));
        CHECK(ranking_to_json(ranking_from_json(a)) == a);
    }
    SUBCASE("equal importances drop the higher index first") {
        Matrix c = Matrix::Zero(3, 20);
        const auto flat = frame_of(c, {"p", "q", "r"});
        const auto r = rfe(flat, std::vector<double>(20, 1.0), 1, 1, fp);
        CHECK(r.entries[0].feature == "p");
        CHECK(r.entries[1].feature == "q");
        CHECK(r.entries[2].feature == "r");
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(rfe(frame, y, 7, 1, fp), Error);
        CHECK_THROWS_AS(rfe(frame, y, 0, 1, fp), Error);
        CHECK_THROWS_AS(rfe(frame, y, 2, 0, fp), Error);
    }
}

TEST_CASE("min-max normalization") {
    Matrix v(3, 3);
    v << 1, 2, 3,  //
        2, 2, 2,   //
        0, 0.25, 1;
    const auto n = minmax_normalize(frame_of(v, {"a", "b", "c"}));
    CHECK(n.frame.values.row(0) == RowVector::LinSpaced(3, 0.0, 1.0));
    CHECK(n.frame.values.row(1).isZero());
    CHECK(n.frame.values.row(2) == v.row(2));
    REQUIRE(n.warnings.size() == 1);
    CHECK(n.warnings[0].find("'b'") != std::string::npos);
    CHECK(n.scaling.denormalize("a", 0.5) == 2.0);
    CHECK(n.scaling.normalize("a", 3.0) == 1.0);
    CHECK_THROWS_AS(n.scaling.denormalize("zz", 0.5), Error);

    std::mt19937_64 rng(77);
    std::normal_distribution<double> z;
    Matrix rows(1000, 25);
    for (Index i = 0; i < rows.size(); ++i) rows.data()[i] = 100.0 * z(rng);
    const Matrix out = minmax_rows(rows);
    CHECK(out.minCoeff() >= 0.0);
    CHECK(out.maxCoeff() <= 1.0);
    for (Index r = 0; r < 1000; ++r) {
        Index lo, hi;
        rows.row(r).minCoeff(&lo);
        rows.row(r).maxCoeff(&hi);
        CHECK(out(r, lo) == 0.0);
        CHECK(out(r, hi) == 1.0);
        for (Index c = 1; c < 25; ++c) CHECK((rows(r, c) < rows(r, c - 1)) == (out(r, c) < out(r, c - 1)));
    }
}

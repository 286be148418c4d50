#include "doctest.h"

#include "ius/synth.hpp"

#include <filesystem>

using namespace ius;

namespace {

double lag1_autocorrelation(const RowVector& x) {
    const double m = x.mean();
    const RowVector c = x.array() - m;
    const Index n = c.size();
    return c.head(n - 1).dot(c.tail(n - 1)) / c.squaredNorm();
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const Eigen::Map<const Vector> x(a.data(), static_cast<Index>(a.size())), y(b.data(), static_cast<Index>(b.size()));
    const Vector cx = x.array() - x.mean(), cy = y.array() - y.mean();
    return cx.dot(cy) / std::sqrt(cx.squaredNorm() * cy.squaredNorm());
}

}  // namespace

TEST_CASE("stationarity check") {
    CHECK(companion_spectral_radius(std::vector<double>{0.9}) == doctest::Approx(0.9));
    CHECK(companion_spectral_radius(std::vector<double>{0.5, 0.3}) < 1.0);
    CHECK(companion_spectral_radius(std::vector<double>{}) == 0.0);
    SynthSpec s;
    s.ar = {1.0};
    CHECK_THROWS_AS(gen_panel(s), Error);
    s.ar = {0.6, 0.5};
    CHECK_THROWS_AS(s.validate(), Error);
    s.ar = {0.5};
    s.rho = 1.5;
    CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("weekday calendar") {
    const auto cal = weekday_calendar(Date::from_ymd(2024, 3, 1), 3);  // Friday
    CHECK(cal[0].iso() == "2024-03-01");
    CHECK(cal[1].iso() == "2024-03-04");
    CHECK(cal[2].iso() == "2024-03-05");
}

TEST_CASE("AR(1) target autocorrelation") {
    int inside = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec s;
        s.n_days = 500;
        s.ar = {0.9};
        s.seed = seed;
        const auto p = gen_panel(s);
        const double r = lag1_autocorrelation(p.frame.values.row(0));
        inside += r >= 0.85 && r <= 0.95;
    }
    CHECK(inside >= 18);
}

TEST_CASE("planted lag construction and determinism") {
    SynthSpec s;
    s.informative = {{"f", 2, 1.0, 0.0}};
    s.noise_features = 2;
    const auto p = gen_panel(s);
    const auto& v = p.frame.values;
    CHECK(p.frame.features == std::vector<std::string>{"target", "f", "noise01", "noise02"});
    for (Index d = 0; d + 2 < v.cols(); ++d) CHECK(v(1, d) == v(0, d + 2));
    CHECK(gen_panel(s).frame.values == v);
    s.seed = 2;
    CHECK(gen_panel(s).frame.values != v);
}

TEST_CASE("text scores") {
    SynthSpec s;
    s.n_days = 120;
    s.rho = 1.0;
    const auto p = gen_panel(s);
    const std::vector<double> y(p.frame.values.row(0).begin(), p.frame.values.row(0).end());
    const auto labels = label_movement(y);
    const auto t = gen_texts(s, p.frame.calendar, y);
    REQUIRE(!t.records.empty());
    CHECK(t.planted.size() == t.records.size());
    for (const auto& r : t.records) {
        const auto d = *p.frame.calendar.find(r.date);
        CHECK(d + 1 < p.frame.day_count());
        CHECK(r.movement == labels[static_cast<std::size_t>(d)]);
        CHECK_NOTHROW(r.validate());
    }

    s.rho = 0.0;
    s.n_days = 400;
    const auto q = gen_panel(s);
    const std::vector<double> z(q.frame.values.row(0).begin(), q.frame.values.row(0).end());
    const auto zl = label_movement(z);
    const auto u = gen_texts(s, q.frame.calendar, z);
    REQUIRE(u.records.size() >= 1000);
    std::vector<double> mov, lab, sen, ret;
    for (const auto& r : u.records) {
        const auto d = static_cast<std::size_t>(*q.frame.calendar.find(r.date));
        mov.push_back(r.movement);
        lab.push_back(zl[d]);
        sen.push_back(r.sentiment);
        ret.push_back(z[d + 1] - z[d]);
    }
    CHECK(std::abs(correlation(mov, lab)) < 0.1);
    CHECK(std::abs(correlation(sen, ret)) < 0.1);
}

TEST_CASE("topic purity matching") {
    const std::vector<int> found{2, 2, 1, 1, 3};
    const std::vector<int> planted{0, 0, 1, 1, 2};
    CHECK(topic_purity(found, planted, 3, 3) == 1.0);
    const std::vector<int> merged{1, 1, 1, 1, 1};
    CHECK(topic_purity(merged, planted, 1, 3) == doctest::Approx(0.4));
}

TEST_CASE("workspace files parse with the real readers") {
    const auto dir = (std::filesystem::temp_directory_path() / "ius_test_workspace").string();
    std::filesystem::remove_all(dir);
    auto spec = default_synth_spec(3);
    spec.n_days = 60;
    const auto ws = write_workspace(spec, dir);
    const auto config = nlohmann::json::parse(read_text_file(ws.config_path));
    CHECK(config["series"].size() == 21);
    const auto target = read_series_file(dir + "/series/target.csv", "date", "value");
    CHECK(target.points.size() == 60);
    const auto texts = records_from_json(nlohmann::json::parse(read_text_file(dir + "/texts.json")));
    CHECK(!texts.empty());
    CHECK(synth_spec_from_json(synth_spec_to_json(spec)).informative.size() == 5);
    std::filesystem::remove_all(dir);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sawar/errors.hpp"
#include "sawar/survival.hpp"

using namespace sawar;

TEST_CASE("closed-form survival values") {
    CHECK(survival(0.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(survival(std::log(2.0), 3.0) == doctest::Approx(std::exp(-6.0)).epsilon(1e-14));
    CHECK(survival(5.0, 0.0) == 1.0);
    CHECK(hazard(0.0) == 1.0);
    CHECK(log_pdf(0.0, 2.0) == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(log_pdf(1.0, 1.0) == doctest::Approx(1.0 - std::exp(1.0)).epsilon(1e-15));
    CHECK(log_survival(-1.0, 2.0) == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-15));
    CHECK(cdf(0.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("survival is monotone in t and G") {
    double prev = 1.0;
    for (double t = 0.1; t < 5.0; t += 0.1) {
        const double s = survival(0.3, t);
        CHECK(s < prev);
        prev = s;
    }
    CHECK(survival(1.0, 2.0) < survival(0.5, 2.0));
}

TEST_CASE("survival underflows cleanly") {
    CHECK(survival(-700.0, 1.0) == doctest::Approx(1.0));
    CHECK(survival(700.0, 1.0) == 0.0);
    CHECK(std::isfinite(log_survival(-700.0, 1.0)));
    CHECK(cdf(-40.0, 1.0) > 0.0);
}

TEST_CASE("survival domain errors") {
    CHECK_THROWS_AS(survival(0.0, -1.0), DomainError);
    CHECK_THROWS_AS(log_pdf(0.0, 0.0), DomainError);
    CHECK_THROWS_AS(log_survival(0.0, std::nan("")), DomainError);
}

TEST_CASE("population curve of two instances") {
    Vector g(2);
    g << 0.0, std::log(2.0);
    const SampledCurve c = population_curve_from_outputs(g, {0.0, 1.0});
    CHECK(c.values[0] == 1.0);
    CHECK(c.values[1] == doctest::Approx(0.251607).epsilon(1e-5));
    CHECK(c.values[1] == doctest::Approx((std::exp(-1.0) + std::exp(-2.0)) / 2).epsilon(1e-15));
    CHECK_THROWS_AS(population_curve_from_outputs(Vector(0), {1.0}), DomainError);
    CHECK_THROWS_AS(population_curve_from_outputs(g, {2.0, 1.0}), DomainError);
}

TEST_CASE("quantile curves match per grid point sorting") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const int m = 5 + rep * 7;
        Vector g = Vector::NullaryExpr(m, [&] { return n(rng); });
        const std::vector<double> grid = linear_grid(3.0, 25);
        const QuantileCurves q = survival_quantiles_from_outputs(g, grid);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            std::vector<double> s;
            for (int i = 0; i < m; ++i) s.push_back(survival(g(i), grid[k]));
            std::sort(s.begin(), s.end());
            const auto lo = static_cast<std::size_t>(std::lround(0.05 * (m - 1)));
            const auto hi = static_cast<std::size_t>(std::lround(0.95 * (m - 1)));
            CHECK(q.lower.values[k] == s[lo]);
            CHECK(q.upper.values[k] == s[hi]);
            CHECK(q.lower.values[k] <= q.upper.values[k]);
        }
    }
}

TEST_CASE("kaplan-meier with all events") {
    const StepCurve km = km_estimator({1, 2, 3}, {1, 1, 1});
    CHECK(km.at(0.5) == 1.0);
    CHECK(km.at(1.0) == doctest::Approx(2.0 / 3));
    CHECK(km.at(2.0) == doctest::Approx(1.0 / 3));
    CHECK(km.at(3.0) == 0.0);
    CHECK(km.before(2.0) == doctest::Approx(2.0 / 3));
}

TEST_CASE("kaplan-meier with a final censoring") {
    const StepCurve km = km_estimator({1, 2, 3}, {1, 1, 0});
    CHECK(km.at(2.0) == doctest::Approx(1.0 / 3));
    CHECK(km.at(10.0) == doctest::Approx(1.0 / 3));
}

TEST_CASE("kaplan-meier processes events before censorings at tied times") {
    const StepCurve km = km_estimator({1, 2, 2, 3}, {1, 1, 0, 1});
    CHECK(km.at(1.0) == doctest::Approx(0.75));
    CHECK(km.at(2.0) == doctest::Approx(0.5));
    CHECK(km.at(3.0) == 0.0);
}

TEST_CASE("kaplan-meier with every record censored stays at one") {
    const StepCurve km = km_estimator({1, 2, 3}, {0, 0, 0});
    for (double t : {0.0, 1.0, 2.5, 100.0}) CHECK(km.at(t) == 1.0);
}

TEST_CASE("kaplan-meier against a direct product-limit computation") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> ti(1, 8);
    std::bernoulli_distribution ev(0.6);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> t;
        std::vector<int> e;
        for (int i = 0; i < 30; ++i) {
            t.push_back(ti(rng));
            e.push_back(ev(rng) ? 1 : 0);
        }
        const StepCurve km = km_estimator(t, e);
        double s = 1.0;
        for (int u = 1; u <= 8; ++u) {
            int at_risk = 0, deaths = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                at_risk += t[i] >= u;
                deaths += t[i] == u && e[i] == 1;
            }
            if (at_risk > 0) s *= 1.0 - static_cast<double>(deaths) / at_risk;
            CHECK(km.at(u) == doctest::Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("linear grid") {
    const auto g = linear_grid(2.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 2.0);
    CHECK(g[2] == doctest::Approx(1.0));
}

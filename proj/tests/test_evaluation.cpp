#include <doctest.h>

#include <cmath>
#include <random>

#include "sawar/errors.hpp"
#include "sawar/evaluation.hpp"
#include "sawar/kernels.hpp"
#include "sawar/oracles.hpp"

using namespace sawar;

namespace {

MetricRecord rec(const std::string& dataset, const std::string& method, double eps, double ci, double ibs = 0.1,
                 double negll = 1.0, std::uint64_t seed = 0) {
    MetricRecord r;
    r.dataset = dataset;
    r.method = method;
    r.attack = "worstcase";
    r.eps = eps;
    r.ci = ci;
    r.ibs = ibs;
    r.negll = negll;
    r.seed = seed;
    return r;
}

const RankRow& find_row(const RankTable& t, double eps, Metric m) {
    for (const auto& r : t) {
        if (r.eps == eps && r.metric == m) return r;
    }
    throw std::runtime_error("row not found");
}

SurvivalDataset toy_dataset(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Batch b = oracles::random_batch(n, d, 0.6, rng);
    SurvivalDataset ds{b.X, b.t, b.e, b.indices};
    return ds;
}

}  // namespace

TEST_CASE("concordance fixtures") {
    CHECK(concordance_index({3, 2, 1}, {1, 2, 3}, {1, 1, 1}) == 1.0);
    CHECK(concordance_index({5, 5, 5}, {1, 2, 3}, {1, 1, 1}) == 0.5);
    CHECK(concordance_index({1, 3, 2}, {1, 2, 3}, {1, 0, 1}) == 0.0);
    CHECK_THROWS_AS(concordance_index({1, 2}, {1, 2}, {0, 0}), MetricError);
    CHECK_THROWS_AS(concordance_index({1, 2}, {1, 2, 3}, {0, 0, 1}), ShapeError);
}

TEST_CASE("concordance equals pair enumeration and flips under negation") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> coarse(0, 6);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution ev(0.5);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 5 + rep * 4;
        std::vector<double> risk(n), t(n), neg(n);
        std::vector<int> e(n);
        for (int i = 0; i < n; ++i) {
            // Coarse values on odd reps exercise tied risks and tied times.
            risk[i] = rep % 2 ? coarse(rng) : z(rng);
            t[i] = rep % 2 ? 1 + coarse(rng) : std::exp(z(rng));
            e[i] = ev(rng);
            neg[i] = -risk[i];
        }
        e[0] = 1;
        t[0] = 0.5;
        const double ci = concordance_index(risk, t, e);
        CHECK(ci == doctest::Approx(oracles::concordance_pairs(risk, t, e)).epsilon(1e-14));
        if (rep % 2 == 0) CHECK(concordance_index(neg, t, e) == doctest::Approx(1.0 - ci).epsilon(1e-14));
        CHECK(ci >= 0.0);
        CHECK(ci <= 1.0);
    }
}

TEST_CASE("brier score fixtures") {
    const std::vector<double> t = {1, 2, 3, 4};
    const std::vector<int> all_events = {1, 1, 1, 1};
    const StepCurve none = censoring_km(t, all_events);
    for (double tau : {0.5, 1.5, 2.5, 3.5}) {
        std::vector<double> perfect;
        for (double ti : t) perfect.push_back(tau < ti ? 1.0 : 0.0);
        CHECK(brier_ipcw(perfect, t, all_events, none, tau).value == 0.0);
        CHECK(brier_ipcw({0.5, 0.5, 0.5, 0.5}, t, all_events, none, tau).value == doctest::Approx(0.25).epsilon(1e-15));
    }

    // Record 2 censored at t=2: censoring KM is 1 before 2 and 2/3 from 2 on.
    const std::vector<int> e = {1, 0, 1, 1};
    const StepCurve g = censoring_km(t, e);
    CHECK(g.before(2.0) == 1.0);
    CHECK(g.at(2.0) == doctest::Approx(2.0 / 3));
    const double b1 = brier_ipcw({0.2, 0.6, 0.7, 0.9}, t, e, g, 2.5).value;
    CHECK(b1 == doctest::Approx((0.04 + 0.09 * 1.5 + 0.01 * 1.5) / 4).epsilon(1e-14));
    CHECK(b1 == doctest::Approx(0.0475).epsilon(1e-12));
    const double b2 = brier_ipcw({0.1, 0.5, 0.4, 0.8}, t, e, g, 3.5).value;
    CHECK(b2 == doctest::Approx(0.0775).epsilon(1e-12));

    RowMatrix s(4, 2);
    s << 0.2, 0.1, 0.6, 0.5, 0.7, 0.4, 0.9, 0.8;
    const BrierValue ibs = integrated_brier(s, t, e, g, {2.5, 3.5});
    CHECK(ibs.value == doctest::Approx((0.0475 + 0.0775) / 2).epsilon(1e-12));
    CHECK(ibs.excluded == 0);
}

TEST_CASE("brier excludes records with zero censoring weight") {
    // The last training record is censored, so the censoring KM drops to 0 at t=3.
    const StepCurve g = censoring_km({1, 2, 3}, {1, 1, 0});
    CHECK(g.at(3.0) == 0.0);
    const BrierValue b = brier_ipcw({0.5, 0.5, 0.5}, {1, 2, 4}, {1, 1, 1}, g, 3.5);
    CHECK(b.excluded == 1);
    CHECK(b.value == doctest::Approx(0.25));
}

TEST_CASE("integrated brier of a constant is that constant") {
    const std::vector<double> t = {1, 2, 3, 4, 5};
    const std::vector<int> e = {1, 1, 1, 1, 1};
    const std::vector<double> grid = brier_grid(5.0, 100);
    CHECK(grid.size() == 100);
    CHECK(grid.front() == doctest::Approx(0.05));
    CHECK(grid.back() == 5.0);
    const RowMatrix s = RowMatrix::Constant(5, 100, 0.5);
    CHECK(integrated_brier(s, t, e, censoring_km(t, e), grid).value == doctest::Approx(0.25).epsilon(1e-14));
    CHECK_THROWS_AS(integrated_brier(s.leftCols(1), t, e, censoring_km(t, e), {1.0}), DomainError);
}

TEST_CASE("negative log-likelihood metric") {
    CHECK(negll_metric({1.0}, {1.0}, {1}).value == 1.0);
    CHECK(negll_metric({1.0, 1.0, 1.0}, {0.5, 2.0, 3.0}, {0, 0, 0}).value == 5.5);
    const NegLLValue v = negll_metric({1.0, 2.0, 0.5}, {1.0, 0.5, 2.0}, {1, 0, 1});
    CHECK(v.value == doctest::Approx(3.0 + std::log(2.0)).epsilon(1e-15));
    CHECK_FALSE(v.overflow);
    const NegLLValue inf = negll_metric({1.0, INFINITY}, {1.0, 1.0}, {1, 0});
    CHECK(inf.overflow);
    CHECK(std::isinf(inf.value));
}

TEST_CASE("eps grids") {
    const auto g = default_eps_grid();
    CHECK(g.size() == 12);
    CHECK(g.front() == 0.0);
    CHECK(g[1] == 0.05);
    CHECK(g.back() == 1.0);
    CHECK(parse_eps_grid("0,0.05,1") == std::vector<double>{0.0, 0.05, 1.0});
    CHECK_THROWS_AS(parse_eps_grid("0,abc"), ConfigError);
    CHECK_THROWS_AS(parse_eps_grid("-0.1"), ConfigError);
}

TEST_CASE("zero-radius sweeps equal clean evaluation") {
    std::mt19937_64 rng(3);
    const Network net = oracles::random_network({3, 8, 8, 1}, -0.5, 0.5, 0.01, rng);
    const SurvivalDataset train = toy_dataset(60, 3, 4);
    const SurvivalDataset test = toy_dataset(30, 3, 5);

    const Vector g = kernels::forward_batch(net, test.X);
    std::vector<double> hazards;
    for (Eigen::Index i = 0; i < g.size(); ++i) hazards.push_back(std::exp(g(i)));
    const std::vector<double> times(test.t.data(), test.t.data() + test.t.size());
    const std::vector<double> train_t(train.t.data(), train.t.data() + train.t.size());
    const std::vector<double> grid = brier_grid(*std::max_element(times.begin(), times.end()));
    const double ci = concordance_index(hazards, times, test.e);
    const double ibs = integrated_brier(survival_matrix(g, grid), times, test.e, censoring_km(train_t, train.e), grid).value;
    const double nll = negll_metric(hazards, times, test.e).value;

    SweepOptions opts;
    const SweepResult f = attack_sweep(net, train, test, Attack::fgsm, {0.0}, opts);
    CHECK(f.records[0].ci == ci);
    CHECK(f.records[0].ibs == ibs);
    CHECK(f.records[0].negll == nll);

    const SweepResult w = attack_sweep(net, train, test, Attack::worstcase, {0.0}, opts);
    CHECK(std::abs(w.records[0].ci - ci) <= 1e-9);
    CHECK(std::abs(w.records[0].ibs - ibs) <= 1e-9);
    CHECK(std::abs(w.records[0].negll - nll) <= 1e-9);
}

TEST_CASE("worst-case curves fall as eps grows") {
    std::mt19937_64 rng(6);
    const Network net = oracles::random_network({3, 8, 8, 1}, -0.5, 0.5, 0.01, rng);
    const SurvivalDataset train = toy_dataset(60, 3, 7);
    const SurvivalDataset test = toy_dataset(30, 3, 8);
    const SweepResult r = attack_sweep(net, train, test, Attack::worstcase, default_eps_grid(), {});
    CHECK(r.records.size() == 12);
    std::vector<const SampledCurve*> pop;
    for (const auto& c : r.curves) {
        if (c.name.size() > 11 && c.name.compare(c.name.size() - 11, 11, "_population") == 0) pop.push_back(&c.curve);
    }
    REQUIRE(pop.size() == 12);
    for (std::size_t k = 1; k < pop.size(); ++k) {
        for (std::size_t j = 0; j < pop[k]->values.size(); ++j) CHECK(pop[k]->values[j] <= pop[k - 1]->values[j] + 1e-15);
    }
    CHECK(r.curves.front().name == "km");
}

TEST_CASE("rank aggregation") {
    SUBCASE("a dominating method ranks first everywhere") {
        std::vector<MetricRecord> rs;
        for (const char* d : {"a", "b"}) {
            rs.push_back(rec(d, "best", 0.1, 0.9, 0.05, 1.0));
            rs.push_back(rec(d, "mid", 0.1, 0.7, 0.10, 2.0));
            rs.push_back(rec(d, "low", 0.1, 0.6, 0.20, 3.0));
        }
        for (const auto& row : average_ranks(rs)) CHECK(row.mean_rank.at("best") == 1.0);
    }
    SUBCASE("tied methods share 1.5") {
        const RankTable t = average_ranks({rec("a", "x", 0.0, 0.7), rec("a", "y", 0.0, 0.7)});
        CHECK(find_row(t, 0.0, Metric::ci).mean_rank.at("x") == 1.5);
        CHECK(find_row(t, 0.0, Metric::ci).mean_rank.at("y") == 1.5);
    }
    SUBCASE("two datasets and three methods by hand") {
        // Dataset d1 CI: A .7, B .6, C .5 -> ranks 1, 2, 3. Dataset d2 CI: A .5, B .6, C .6 -> 3, 1.5, 1.5.
        // NegLL in d1: A 3, B 1, C 2 -> 3, 1, 2; in d2 all equal -> 2 each.
        const std::vector<MetricRecord> rs = {rec("d1", "A", 0.3, 0.7, 0.1, 3), rec("d1", "B", 0.3, 0.6, 0.1, 1),
                                              rec("d1", "C", 0.3, 0.5, 0.1, 2), rec("d2", "A", 0.3, 0.5, 0.1, 4),
                                              rec("d2", "B", 0.3, 0.6, 0.1, 4), rec("d2", "C", 0.3, 0.6, 0.1, 4)};
        const RankTable t = average_ranks(rs);
        const RankRow& ci = find_row(t, 0.3, Metric::ci);
        CHECK(ci.mean_rank.at("A") == 2.0);
        CHECK(ci.mean_rank.at("B") == 1.75);
        CHECK(ci.mean_rank.at("C") == 2.25);
        const RankRow& nll = find_row(t, 0.3, Metric::negll);
        CHECK(nll.mean_rank.at("A") == 2.5);
        CHECK(nll.mean_rank.at("B") == 1.5);
        CHECK(nll.mean_rank.at("C") == 2.0);
    }
    SUBCASE("seeds are averaged before ranking") {
        // A's seeds 0.75 and 0.25 average to 0.5 and tie with B.
        const RankTable t = average_ranks(
            {rec("d", "A", 0.0, 0.75, 0.1, 1, 0), rec("d", "A", 0.0, 0.25, 0.1, 1, 1), rec("d", "B", 0.0, 0.5, 0.1, 1, 0)});
        CHECK(find_row(t, 0.0, Metric::ci).mean_rank.at("A") == 1.5);
    }
    SUBCASE("a missing cell names the gap") {
        try {
            average_ranks({rec("d1", "A", 0.1, 0.5), rec("d1", "B", 0.1, 0.5), rec("d2", "A", 0.1, 0.5)});
            FAIL("expected a metric error");
        } catch (const MetricError& e) {
            CHECK(std::string(e.what()).find("d2") != std::string::npos);
            CHECK(std::string(e.what()).find("'B'") != std::string::npos);
        }
    }
}

TEST_CASE("rank_ascending averages ties") {
    CHECK(rank_ascending({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
    CHECK(rank_ascending({1.0, 1.0, 2.0, 2.0}) == std::vector<double>{1.5, 1.5, 3.5, 3.5});
}

TEST_CASE("relative percent change") {
    auto find = [](const std::vector<PercentChangeRow>& rows, const std::string& m) {
        for (const auto& r : rows) {
            if (r.method == m && r.metric == Metric::ci) return r;
        }
        throw std::runtime_error("row not found");
    };
    const auto same = relative_percent_change({rec("d", "base", 0, 0.5), rec("d", "m", 0, 0.5)}, "base");
    CHECK(find(same, "m").percent == 0.0);
    const auto up = relative_percent_change({rec("d", "base", 0, 0.5), rec("d", "m", 0, 0.75)}, "base");
    CHECK(find(up, "m").percent == doctest::Approx(50.0).epsilon(1e-14));
    // +50% on one dataset, -25% on the other.
    const auto mixed = relative_percent_change(
        {rec("d1", "base", 0, 0.5), rec("d1", "m", 0, 0.75), rec("d2", "base", 0, 0.4), rec("d2", "m", 0, 0.3)}, "base");
    CHECK(find(mixed, "m").percent == doctest::Approx(12.5).epsilon(1e-13));
    const auto zero = relative_percent_change({rec("d", "base", 0, 0.0), rec("d", "m", 0, 0.5)}, "base");
    CHECK(find(zero, "m").flagged);
    CHECK_THROWS_AS(relative_percent_change({rec("d", "m", 0, 0.5)}, "base"), MetricError);
}

TEST_CASE("friedman test") {
    SUBCASE("identical treatments") {
        const FriedmanResult r = friedman_test(Matrix::Constant(5, 3, 0.4));
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
    }
    SUBCASE("consistent ordering of three treatments gives 2n") {
        for (int n : {2, 5, 10}) {
            Matrix m(n, 3);
            for (int b = 0; b < n; ++b) m.row(b) << 0.1 * b, 1 + 0.1 * b, 2 + 0.1 * b;
            const FriedmanResult r = friedman_test(m);
            CHECK(r.statistic == doctest::Approx(2.0 * n).epsilon(1e-12));
            CHECK(r.p_value == doctest::Approx(std::exp(-n)).epsilon(1e-10));  // chi2 with 2 dof: exp(-x/2)
        }
    }
    SUBCASE("one best treatment with the others alternating") {
        Matrix m(4, 3);
        m << 0, 1, 2, 0, 2, 1, 0, 1, 2, 0, 2, 1;
        // Rank sums 4, 10, 10: 12/(4*3*4) * 216 - 48 = 6.
        CHECK(friedman_test(m).statistic == doctest::Approx(6.0).epsilon(1e-12));
    }
    SUBCASE("two treatments reduce to the sign statistic") {
        for (int n = 2; n <= 10; ++n) {
            for (int mask = 0; mask < (1 << n); ++mask) {
                Matrix m(n, 2);
                int plus = 0;
                for (int b = 0; b < n; ++b) {
                    const bool a_better = (mask >> b) & 1;
                    plus += a_better;
                    m.row(b) << (a_better ? 0.0 : 1.0), (a_better ? 1.0 : 0.0);
                }
                const double minus = n - plus;
                const double expect = (plus - minus) * (plus - minus) / n;
                if (std::abs(friedman_test(m).statistic - expect) > 1e-10) FAIL("sign statistic mismatch");
            }
        }
    }
    SUBCASE("invariant under monotone transforms within blocks") {
        std::mt19937_64 rng(9);
        std::normal_distribution<double> z(0.0, 1.0);
        Matrix m(8, 4);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = z(rng);
        Matrix t = m;
        for (Eigen::Index b = 0; b < 8; ++b) {
            for (Eigen::Index j = 0; j < 4; ++j) t(b, j) = std::exp(3.0 * m(b, j)) + b;
        }
        CHECK(friedman_test(m).statistic == friedman_test(t).statistic);
    }
    SUBCASE("degenerate shapes") {
        CHECK_THROWS_AS(friedman_test(Matrix::Zero(4, 1)), DomainError);
        CHECK_THROWS_AS(friedman_test(Matrix::Zero(1, 3)), DomainError);
    }
}

TEST_CASE("metrics csv round trip") {
    MetricRecord a = rec("retinopathy", "sawar", 0.05, 0.6123456789012345, 0.2, 123.456, 7);
    MetricRecord b = rec("zinc", "fgsm", 1.0, 0.5, 0.9, INFINITY, 2);
    b.attack = "fgsm";
    b.negll_flag = true;
    const std::string text = metrics_to_csv({a, b});
    CHECK(text.rfind("dataset,method,attack,eps,ci,ibs,negll,ci_flag,ibs_flag,negll_flag,seed\n", 0) == 0);
    const auto back = metrics_from_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].ci == a.ci);
    CHECK(back[0].eps == a.eps);
    CHECK(back[0].seed == 7);
    CHECK(std::isinf(back[1].negll));
    CHECK(back[1].negll_flag);
    CHECK(metrics_to_csv(back) == text);
    CHECK_THROWS_AS(metrics_from_csv("a,b\n"), FormatError);
}

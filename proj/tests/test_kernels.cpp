#include <doctest.h>

#include <random>

#include <omp.h>

#include "sawar/kernels.hpp"
#include "sawar/oracles.hpp"

using namespace sawar;

namespace {

double max_diff(const ParamGrads& a, const ParamGrads& b) {
    double m = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        m = std::max(m, (a.layers[l].weight - b.layers[l].weight).cwiseAbs().maxCoeff());
        m = std::max(m, (a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff());
    }
    return m;
}

struct Case {
    Network net;
    Batch batch;
    Vector a;
    Vector b;
};

Case make_case(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Case c{oracles::random_network({5, 20, 20, 1}, -0.5, 0.5, 0.01, rng), oracles::random_batch(n, 5, 0.5, rng), {}, {}};
    std::normal_distribution<double> z(0.0, 1.0);
    c.a = Vector::NullaryExpr(n, [&] { return z(rng); });
    c.b = Vector::NullaryExpr(n, [&] { return z(rng); });
    return c;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
    for (int n : {1, 15, 16, 17, 100, 333}) {
        const Case c = make_case(n, static_cast<std::uint64_t>(n));
        CHECK((kernels::forward_batch(c.net, c.batch.X) - kernels::serial::forward_batch(c.net, c.batch.X))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-12);

        const auto bp = kernels::bounds_batch(c.net, c.batch.X, 0.2);
        const auto bs = kernels::serial::bounds_batch(c.net, c.batch.X, 0.2);
        for (int i = 0; i < n; ++i) {
            CHECK(bp[i].lb == doctest::Approx(bs[i].lb).epsilon(1e-12));
            CHECK(bp[i].ub == doctest::Approx(bs[i].ub).epsilon(1e-12));
        }

        const auto gp = kernels::backward_batch(c.net, c.batch.X, c.a);
        const auto gs = kernels::serial::backward_batch(c.net, c.batch.X, c.a);
        CHECK(max_diff(gp.params, gs.params) <= 1e-10);
        CHECK((gp.inputs - gs.inputs).cwiseAbs().maxCoeff() <= 1e-12);

        const auto hp = kernels::bounds_backward_batch(c.net, c.batch.X, 0.2, c.a, c.b);
        const auto hs = kernels::serial::bounds_backward_batch(c.net, c.batch.X, 0.2, c.a, c.b);
        CHECK(max_diff(hp.params, hs.params) <= 1e-10);
        CHECK((hp.inputs - hs.inputs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("parallel reductions do not depend on the thread count") {
    const Case c = make_case(250, 42);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto one = kernels::bounds_backward_batch(c.net, c.batch.X, 0.1, c.a, c.b);
    const auto one_fwd = kernels::backward_batch(c.net, c.batch.X, c.a);
    omp_set_num_threads(4);
    const auto four = kernels::bounds_backward_batch(c.net, c.batch.X, 0.1, c.a, c.b);
    const auto four_fwd = kernels::backward_batch(c.net, c.batch.X, c.a);
    omp_set_num_threads(saved);
    CHECK(max_diff(one.params, four.params) == 0.0);
    CHECK(max_diff(one_fwd.params, four_fwd.params) == 0.0);
    CHECK(one.inputs == four.inputs);
}

TEST_CASE("batch kernels match per-record calls") {
    const Case c = make_case(20, 7);
    const Vector g = kernels::forward_batch(c.net, c.batch.X);
    const auto b = kernels::bounds_batch(c.net, c.batch.X, 0.3);
    for (int i = 0; i < 20; ++i) {
        const Vector x = c.batch.X.row(i).transpose();
        CHECK(g(i) == forward(c.net, x));
        const ScalarBounds s = crown_ibp_bounds(c.net, {x, 0.3});
        CHECK(b[i].lb == s.lb);
        CHECK(b[i].ub == s.ub);
    }
}

#include "sawar/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sawar/errors.hpp"
#include "sawar/kernels.hpp"

namespace sawar {

double StepCurve::at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepCurve::before(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double hazard(double g) { return std::exp(g); }

double survival(double g, double t) {
    if (!(t >= 0.0)) throw DomainError("survival requires t >= 0");
    if (t == 0.0) return 1.0;
    return std::exp(-std::exp(g) * t);
}

double log_pdf(double g, double t) {
    if (!(t > 0.0)) throw DomainError("log_pdf requires t > 0");
    return g - std::exp(g) * t;
}

double log_survival(double g, double t) {
    if (!(t >= 0.0)) throw DomainError("log_survival requires t >= 0");
    if (t == 0.0) return 0.0;
    return -std::exp(g) * t;
}

double cdf(double g, double t) {
    if (!(t >= 0.0)) throw DomainError("cdf requires t >= 0");
    if (t == 0.0) return 0.0;
    return -std::expm1(-std::exp(g) * t);
}

namespace {

void check_grid(const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0)) throw DomainError("time grid must be nonnegative");
        if (i > 0 && grid[i] < grid[i - 1]) throw DomainError("time grid must be sorted ascending");
    }
}

}  // namespace

SampledCurve population_curve_from_outputs(const Vector& g, const std::vector<double>& grid) {
    if (g.size() == 0) throw DomainError("population curve needs at least one instance");
    check_grid(grid);
    SampledCurve out{grid, std::vector<double>(grid.size(), 0.0)};
    const double n = static_cast<double>(g.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < g.size(); ++i) sum += survival(g(i), grid[k]);
        out.values[k] = sum / n;
    }
    return out;
}

SampledCurve population_curve(const Network& net, const RowMatrix& X, const std::vector<double>& grid) {
    if (X.rows() == 0) throw DomainError("population curve needs at least one instance");
    return population_curve_from_outputs(kernels::forward_batch(net, X), grid);
}

std::size_t nearest_rank_index(double q, std::size_t n) {
    if (n == 0) throw DomainError("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    return static_cast<std::size_t>(std::lround(q * static_cast<double>(n - 1)));
}

QuantileCurves survival_quantiles_from_outputs(const Vector& g, const std::vector<double>& grid, double q_lo,
                                               double q_hi) {
    if (g.size() == 0) throw DomainError("survival quantiles need at least one instance");
    check_grid(grid);
    const auto n = static_cast<std::size_t>(g.size());
    std::vector<double> sorted(g.data(), g.data() + g.size());
    std::sort(sorted.begin(), sorted.end());
    // S is decreasing in G: the q-quantile of S sits at the mirrored rank of G.
    const double g_lo = sorted[n - 1 - nearest_rank_index(q_lo, n)];
    const double g_hi = sorted[n - 1 - nearest_rank_index(q_hi, n)];

    QuantileCurves out{{grid, std::vector<double>(grid.size())}, {grid, std::vector<double>(grid.size())}};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out.lower.values[k] = survival(g_lo, grid[k]);
        out.upper.values[k] = survival(g_hi, grid[k]);
    }
    return out;
}

QuantileCurves survival_quantiles(const Network& net, const RowMatrix& X, const std::vector<double>& grid,
                                  double q_lo, double q_hi) {
    if (X.rows() == 0) throw DomainError("survival quantiles need at least one instance");
    return survival_quantiles_from_outputs(kernels::forward_batch(net, X), grid, q_lo, q_hi);
}

StepCurve km_estimator(const std::vector<double>& times, const std::vector<int>& events) {
    if (times.empty()) throw DomainError("Kaplan-Meier needs at least one observation");
    if (times.size() != events.size()) throw DomainError("times and events differ in length");
    for (double t : times) {
        if (!(t > 0.0)) throw DomainError("Kaplan-Meier times must be positive");
    }

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    StepCurve curve;
    curve.times.push_back(0.0);
    curve.values.push_back(1.0);
    double s = 1.0;
    std::size_t at_risk = times.size();
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = times[order[i]];
        std::size_t deaths = 0;
        std::size_t tied = 0;
        while (i < order.size() && times[order[i]] == t) {
            deaths += events[order[i]] != 0 ? 1 : 0;
            ++tied;
            ++i;
        }
        if (deaths > 0) {
            s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            curve.times.push_back(t);
            curve.values.push_back(s);
        }
        at_risk -= tied;
    }
    return curve;
}

std::vector<double> linear_grid(double t_max, std::size_t n) {
    if (n < 2) throw DomainError("a grid needs at least two points");
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = t_max * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return grid;
}

}  // namespace sawar

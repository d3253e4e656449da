#pragma once

#include <vector>

#include "sawar/nn.hpp"

namespace sawar {

struct SurvRecord {
    Vector x;
    double t = 0.0;
    int e = 0;  // 1 = event observed, 0 = right-censored
};

/// Right-continuous step function starting at (0, 1).
struct StepCurve {
    std::vector<double> times;
    std::vector<double> values;

    // Value at t (last breakpoint <= t).
    double at(double t) const;
    // Left limit at t (last breakpoint < t).
    double before(double t) const;
};

/// A curve evaluated on a fixed time grid.
struct SampledCurve {
    std::vector<double> grid;
    std::vector<double> values;
};

// Exponential Cox-PH model with hazard exp(G); the baseline rate lives in the
// output bias of G.
double hazard(double g);
double survival(double g, double t);
double log_pdf(double g, double t);
double log_survival(double g, double t);
// CDF 1 - exp(-exp(G) t), computed with expm1.
double cdf(double g, double t);

/// Monte Carlo population curve: mean instance survival curve over the rows of X.
SampledCurve population_curve(const Network& net, const RowMatrix& X, const std::vector<double>& grid);
SampledCurve population_curve_from_outputs(const Vector& g, const std::vector<double>& grid);

struct QuantileCurves {
    SampledCurve lower;  // q_lo quantile of S(t|x) across instances
    SampledCurve upper;  // q_hi quantile
};

/// Per grid point nearest-rank quantiles of the instance survival values.
QuantileCurves survival_quantiles(const Network& net, const RowMatrix& X, const std::vector<double>& grid,
                                  double q_lo = 0.05, double q_hi = 0.95);
QuantileCurves survival_quantiles_from_outputs(const Vector& g, const std::vector<double>& grid,
                                               double q_lo = 0.05, double q_hi = 0.95);

// Index used for the nearest-rank quantile of n sorted values.
std::size_t nearest_rank_index(double q, std::size_t n);

/// Kaplan-Meier product-limit estimate. At tied times events are processed
/// before censorings.
StepCurve km_estimator(const std::vector<double>& times, const std::vector<int>& events);

// n points equally spaced on [0, t_max].
std::vector<double> linear_grid(double t_max, std::size_t n = 100);

}  // namespace sawar

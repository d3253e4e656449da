#pragma once

#include <functional>
#include <random>
#include <vector>

#include "sawar/nn.hpp"
#include "sawar/objectives.hpp"

// Brute-force reference computations shared by `sawar selftest` and the test suites.
namespace sawar::oracles {

/// Weights and biases drawn uniformly from [lo, hi].
Network random_network(const std::vector<int>& dims, double lo, double hi, double slope, std::mt19937_64& rng);

struct Range {
    double min = 0.0;
    double max = 0.0;
};

/// Min/max of G over every corner of the box plus a regular grid with `per_dim` points per axis.
Range sampled_range(const Network& net, const Vector& center, double eps, int per_dim);

/// O(n^2) pair enumeration of Harrell's C.
double concordance_pairs(const std::vector<double>& risks, const std::vector<double>& times,
                         const std::vector<int>& events);

struct GradCheck {
    double max_abs_error = 0.0;
    double scale = 0.0;  // largest |numeric| entry
    // Largest |f(x+h) - 2 f(x) + f(x-h)| / 2h. On a smooth loss this is O(h); a breakpoint
    // inside [x-h, x+h] shows up here at the same size as the error it causes.
    double max_curvature = 0.0;
    // max_abs_error / max(scale, floor)
    double relative(double floor = 1e-7) const { return max_abs_error / std::max(scale, floor); }
    // True when the difference quotient itself is only good to `tolerance`.
    bool straddles_kink(double tolerance, double floor = 1e-7) const {
        return max_curvature > tolerance * std::max(scale, floor);
    }
};

/// Central differences of `loss` over every weight and bias, compared with `analytic`.
GradCheck check_param_gradient(const Network& net, const std::function<double(const Network&)>& loss,
                               const ParamGrads& analytic, double h);

/// Central differences of `loss` over every covariate entry.
GradCheck check_input_gradient(const RowMatrix& X, const std::function<double(const RowMatrix&)>& loss,
                               const RowMatrix& analytic, double h);

/// Random batch: x ~ N(0,1), t ~ U(0.2, 2), e ~ Bernoulli(p_event).
Batch random_batch(int n, int d, double p_event, std::mt19937_64& rng);

}  // namespace sawar::oracles

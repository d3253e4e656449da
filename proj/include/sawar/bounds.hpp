#pragma once

#include <vector>

#include "sawar/nn.hpp"

namespace sawar {

/// l-infinity ball around `center`.
struct PerturbationSet {
    Vector center;
    double radius = 0.0;
};

struct ScalarBounds {
    double lb = 0.0;
    double ub = 0.0;

    double width() const { return ub - lb; }
    bool contains(double v, double slack = 0.0) const { return v >= lb - slack && v <= ub + slack; }
};

/// Pre-activation interval of every layer, output layer last.
struct LayerBounds {
    std::vector<Vector> lower;
    std::vector<Vector> upper;
};

struct IbpResult {
    ScalarBounds output;
    LayerBounds layers;
};

IbpResult ibp_bounds(const Network& net, const PerturbationSet& set);

/// Backward linear relaxation of the output over the ball, with every
/// intermediate interval taken from IBP. The returned interval is intersected
/// with the IBP interval, so it is never looser.
ScalarBounds crown_ibp_bounds(const Network& net, const PerturbationSet& set);

// The raw CROWN-IBP interval before intersecting with IBP (exposed for tests).
ScalarBounds crown_ibp_bounds_raw(const Network& net, const PerturbationSet& set);

/// Upper bound on max over the ball of exp(G). Returns +inf when exp overflows.
double worst_case_hazard(const Network& net, const PerturbationSet& set);

/// Reverse mode through crown_ibp_bounds: accumulates
/// d(g_lb*lb + g_ub*ub)/dtheta into `params` and writes the gradient with
/// respect to the ball center into `center_grad`.
void crown_ibp_backward(const Network& net, const PerturbationSet& set, double g_lb, double g_ub,
                        ParamGrads& params, Vector& center_grad);

}  // namespace sawar

#pragma once

#include <vector>

#include "sawar/bounds.hpp"
#include "sawar/nn.hpp"

// Per-record batch kernels. The default namespace runs OpenMP-parallel loops;
// `kernels::serial` holds the plain reference loops used by tests and the
// benchmark. Parameter-gradient reductions in the parallel path sum fixed-size
// record chunks in chunk order, so results do not depend on the thread count.
namespace sawar::kernels {

struct BatchGrad {
    ParamGrads params;
    RowMatrix inputs;  // one input gradient per record
};

inline constexpr Eigen::Index kReductionChunk = 16;

Vector forward_batch(const Network& net, const RowMatrix& X);

std::vector<ScalarBounds> bounds_batch(const Network& net, const RowMatrix& X, double eps);

/// Sum over records of d(upstream_i * G(x_i)).
BatchGrad backward_batch(const Network& net, const RowMatrix& X, const Vector& upstream);

/// Sum over records of d(g_lb_i * lb_i + g_ub_i * ub_i) through crown_ibp_bounds.
BatchGrad bounds_backward_batch(const Network& net, const RowMatrix& X, double eps, const Vector& g_lb,
                                const Vector& g_ub);

namespace serial {

Vector forward_batch(const Network& net, const RowMatrix& X);
std::vector<ScalarBounds> bounds_batch(const Network& net, const RowMatrix& X, double eps);
BatchGrad backward_batch(const Network& net, const RowMatrix& X, const Vector& upstream);
BatchGrad bounds_backward_batch(const Network& net, const RowMatrix& X, double eps, const Vector& g_lb,
                                const Vector& g_ub);

}  // namespace serial

}  // namespace sawar::kernels

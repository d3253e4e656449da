#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sawar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Covariate matrices are stored one record per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Feedforward network G: R^d -> R. Hidden layers use Leaky ReLU, the output
/// layer is affine.
struct Network {
    std::vector<int> layer_dims;
    std::vector<Layer> layers;
    double leaky_slope = 0.01;

    int input_dim() const { return layer_dims.front(); }
    std::size_t depth() const { return layers.size(); }

    // Throws ShapeError / ConfigError when the invariants do not hold.
    void validate() const;
};

/// Gradients with the same shapes as a Network's layers.
struct ParamGrads {
    std::vector<Layer> layers;

    static ParamGrads zeros_like(const Network& net);

    ParamGrads& operator+=(const ParamGrads& other);
    ParamGrads& operator*=(double s);
    bool all_finite() const;
    double squared_norm() const;
};

struct AdamState {
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    ParamGrads first_moment;
    ParamGrads second_moment;

    static AdamState for_network(const Network& net, double lr = 1e-3, double beta1 = 0.9,
                                 double beta2 = 0.999, double epsilon = 1e-8);
};

inline double leaky_relu(double z, double slope) { return z >= 0.0 ? z : slope * z; }

// Subgradient at the kink uses the positive branch.
inline double leaky_relu_grad(double z, double slope) { return z >= 0.0 ? 1.0 : slope; }

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
Network init_network(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed);

double forward(const Network& net, const Vector& x);

// Same as forward, but also keeps every pre-activation (one vector per layer).
double forward_trace(const Network& net, const Vector& x, std::vector<Vector>& pre_activations);

struct BackwardResult {
    ParamGrads params;
    Vector input_grad;
};

/// Reverse-mode gradient of upstream * G(x) with respect to parameters and input.
BackwardResult backward(const Network& net, const Vector& x, double upstream);

// Accumulating variant used by the batch kernels: adds into `params` and
// writes d(upstream*G)/dx into `input_grad`.
void backward_into(const Network& net, const Vector& x, double upstream, ParamGrads& params,
                   Vector& input_grad);

/// One bias-corrected Adam update. Throws DivergenceError on non-finite gradients.
void adam_step(AdamState& state, Network& net, const ParamGrads& grads);

}  // namespace sawar

#include "sawar/nn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sawar/errors.hpp"

namespace sawar {

void Network::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    if (layer_dims.back() != 1) throw ConfigError("network output dimension must be 1");
    for (int d : layer_dims) {
        if (d <= 0) throw ConfigError("layer dimensions must be positive");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky slope must lie in (0, 1)");
    if (layers.size() + 1 != layer_dims.size()) throw ShapeError("layer count does not match layer_dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.weight.rows() != layer_dims[l + 1] || layer.weight.cols() != layer_dims[l] ||
            layer.bias.size() != layer_dims[l + 1]) {
            throw ShapeError("weight shapes of layer " + std::to_string(l) + " do not chain with layer_dims");
        }
    }
}

ParamGrads ParamGrads::zeros_like(const Network& net) {
    ParamGrads g;
    g.layers.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                            Vector::Zero(layer.bias.size())});
    }
    return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
    if (other.layers.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += other.layers[l].weight;
        layers[l].bias += other.layers[l].bias;
    }
    return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
    for (auto& layer : layers) {
        layer.weight *= s;
        layer.bias *= s;
    }
    return *this;
}

bool ParamGrads::all_finite() const {
    for (const auto& layer : layers) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
}

double ParamGrads::squared_norm() const {
    double s = 0.0;
    for (const auto& layer : layers) s += layer.weight.squaredNorm() + layer.bias.squaredNorm();
    return s;
}

AdamState AdamState::for_network(const Network& net, double lr, double beta1, double beta2,
                                 double epsilon) {
    if (!(lr > 0.0 && beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
        throw ConfigError("invalid Adam hyperparameters");
    }
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.first_moment = ParamGrads::zeros_like(net);
    s.second_moment = ParamGrads::zeros_like(net);
    return s;
}

Network init_network(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed) {
    Network net;
    net.layer_dims = layer_dims;
    net.leaky_slope = leaky_slope;
    if (layer_dims.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    for (int d : layer_dims) {
        if (d <= 0) throw ConfigError("layer dimensions must be positive");
    }

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        // Row-major fill order so the draw sequence does not depend on Eigen storage.
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
        }
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

namespace {

void check_input(const Network& net, const Vector& x) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("input has dimension " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    }
    if (!x.allFinite()) throw InputError("non-finite covariate value");
}

}  // namespace

double forward(const Network& net, const Vector& x) {
    check_input(net, x);
    Vector a = x;
    const std::size_t last = net.layers.size() - 1;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Vector z = net.layers[l].weight * a + net.layers[l].bias;
        if (l == last) return z(0);
        a = z.unaryExpr([&](double v) { return leaky_relu(v, net.leaky_slope); });
    }
    return 0.0;  // unreachable
}

double forward_trace(const Network& net, const Vector& x, std::vector<Vector>& pre_activations) {
    check_input(net, x);
    pre_activations.resize(net.layers.size());
    Vector a = x;
    const std::size_t last = net.layers.size() - 1;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        pre_activations[l] = net.layers[l].weight * a + net.layers[l].bias;
        if (l == last) break;
        a = pre_activations[l].unaryExpr([&](double v) { return leaky_relu(v, net.leaky_slope); });
    }
    return pre_activations[last](0);
}

void backward_into(const Network& net, const Vector& x, double upstream, ParamGrads& params,
                   Vector& input_grad) {
    std::vector<Vector> z;
    forward_trace(net, x, z);
    if (params.layers.size() != net.layers.size()) throw ShapeError("gradient buffer does not match network");

    Vector delta = Vector::Constant(1, upstream);
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        if (l == 0) {
            params.layers[0].weight.noalias() += delta * x.transpose();
        } else {
            Vector a_prev = z[l - 1].unaryExpr([&](double v) { return leaky_relu(v, net.leaky_slope); });
            params.layers[l].weight.noalias() += delta * a_prev.transpose();
        }
        params.layers[l].bias += delta;

        Vector back = net.layers[l].weight.transpose() * delta;
        if (l == 0) {
            input_grad = std::move(back);
        } else {
            delta = back.cwiseProduct(
                z[l - 1].unaryExpr([&](double v) { return leaky_relu_grad(v, net.leaky_slope); }));
        }
    }
}

BackwardResult backward(const Network& net, const Vector& x, double upstream) {
    BackwardResult out{ParamGrads::zeros_like(net), Vector()};
    backward_into(net, x, upstream, out.params, out.input_grad);
    return out;
}

void adam_step(AdamState& state, Network& net, const ParamGrads& grads) {
    if (grads.layers.size() != net.layers.size()) throw ShapeError("gradient does not match network");
    if (!grads.all_finite()) throw DivergenceError("non-finite gradient passed to Adam");

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        auto m_hat = m / correction1;
        auto v_hat = v / correction2;
        param.array() -= state.lr * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
    };

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        update(net.layers[l].weight, state.first_moment.layers[l].weight,
               state.second_moment.layers[l].weight, grads.layers[l].weight);
        update(net.layers[l].bias, state.first_moment.layers[l].bias,
               state.second_moment.layers[l].bias, grads.layers[l].bias);
    }
}

}  // namespace sawar

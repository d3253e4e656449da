#include "sawar/oracles.hpp"

#include <cmath>

#include "sawar/errors.hpp"

namespace sawar::oracles {

Network random_network(const std::vector<int>& dims, double lo, double hi, double slope, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    Network net;
    net.layer_dims = dims;
    net.leaky_slope = slope;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer{Matrix(dims[l + 1], dims[l]), Vector(dims[l + 1])};
        for (int r = 0; r < dims[l + 1]; ++r) {
            for (int c = 0; c < dims[l]; ++c) layer.weight(r, c) = u(rng);
        }
        for (int r = 0; r < dims[l + 1]; ++r) layer.bias(r) = u(rng);
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

Range sampled_range(const Network& net, const Vector& center, double eps, int per_dim) {
    const auto d = center.size();
    if (d > 4) throw DomainError("sampled_range enumerates grids for at most 4 inputs");
    if (per_dim < 2) throw DomainError("sampled_range needs at least 2 points per axis");
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    auto visit = [&](const Vector& x) {
        const double g = forward(net, x);
        r.min = std::min(r.min, g);
        r.max = std::max(r.max, g);
    };
    // Corners.
    for (long mask = 0; mask < (1L << d); ++mask) {
        Vector x = center;
        for (Eigen::Index k = 0; k < d; ++k) x(k) += ((mask >> k) & 1) ? eps : -eps;
        visit(x);
    }
    // Grid.
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    while (true) {
        Vector x = center;
        for (Eigen::Index k = 0; k < d; ++k) {
            x(k) += -eps + 2.0 * eps * static_cast<double>(idx[static_cast<std::size_t>(k)]) / (per_dim - 1);
        }
        visit(x);
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == per_dim) idx[k++] = 0;
        if (k == idx.size()) break;
    }
    return r;
}

double concordance_pairs(const std::vector<double>& risks, const std::vector<double>& times,
                         const std::vector<int>& events) {
    double credit = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] != 1) continue;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (!(times[i] < times[j])) continue;
            pairs += 1.0;
            if (risks[i] > risks[j]) credit += 1.0;
            else if (risks[i] == risks[j]) credit += 0.5;
        }
    }
    if (pairs == 0.0) throw MetricError("no comparable pairs");
    return credit / pairs;
}

GradCheck check_param_gradient(const Network& net, const std::function<double(const Network&)>& loss,
                               const ParamGrads& analytic, double h) {
    GradCheck out;
    Network probe = net;
    const double center = loss(probe);
    auto visit = [&](double& slot, double a) {
        const double saved = slot;
        slot = saved + h;
        const double up = loss(probe);
        slot = saved - h;
        const double down = loss(probe);
        slot = saved;
        const double numeric = (up - down) / (2.0 * h);
        out.max_curvature = std::max(out.max_curvature, std::abs(up - 2.0 * center + down) / (2.0 * h));
        out.max_abs_error = std::max(out.max_abs_error, std::abs(numeric - a));
        out.scale = std::max(out.scale, std::abs(numeric));
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) visit(layer.weight(r, c), analytic.layers[l].weight(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) visit(layer.bias(r), analytic.layers[l].bias(r));
    }
    return out;
}

GradCheck check_input_gradient(const RowMatrix& X, const std::function<double(const RowMatrix&)>& loss,
                               const RowMatrix& analytic, double h) {
    GradCheck out;
    RowMatrix probe = X;
    const double center = loss(probe);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            const double saved = probe(i, c);
            probe(i, c) = saved + h;
            const double up = loss(probe);
            probe(i, c) = saved - h;
            const double down = loss(probe);
            probe(i, c) = saved;
            const double numeric = (up - down) / (2.0 * h);
            out.max_curvature = std::max(out.max_curvature, std::abs(up - 2.0 * center + down) / (2.0 * h));
            out.max_abs_error = std::max(out.max_abs_error, std::abs(numeric - analytic(i, c)));
            out.scale = std::max(out.scale, std::abs(numeric));
        }
    }
    return out;
}

Batch random_batch(int n, int d, double p_event, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> time(0.2, 2.0);
    std::bernoulli_distribution event(p_event);
    Batch b;
    b.X.resize(n, d);
    b.t.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) b.X(i, c) = normal(rng);
        b.t(i) = time(rng);
        b.e.push_back(event(rng) ? 1 : 0);
        b.indices.push_back(static_cast<std::size_t>(i));
    }
    return b;
}

}  // namespace sawar::oracles

#include "sawar/errors.hpp"
#include "sawar/kernels.hpp"

namespace sawar::kernels::serial {

Vector forward_batch(const Network& net, const RowMatrix& X) {
    Vector g(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) g(i) = forward(net, X.row(i).transpose());
    return g;
}

std::vector<ScalarBounds> bounds_batch(const Network& net, const RowMatrix& X, double eps) {
    std::vector<ScalarBounds> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(crown_ibp_bounds(net, {X.row(i).transpose(), eps}));
    return out;
}

BatchGrad backward_batch(const Network& net, const RowMatrix& X, const Vector& upstream) {
    if (upstream.size() != X.rows()) throw ShapeError("upstream gradient length does not match batch size");
    BatchGrad out{ParamGrads::zeros_like(net), RowMatrix::Zero(X.rows(), X.cols())};
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Vector gx;
        backward_into(net, X.row(i).transpose(), upstream(i), out.params, gx);
        out.inputs.row(i) = gx.transpose();
    }
    return out;
}

BatchGrad bounds_backward_batch(const Network& net, const RowMatrix& X, double eps, const Vector& g_lb,
                                const Vector& g_ub) {
    if (g_lb.size() != X.rows() || g_ub.size() != X.rows()) {
        throw ShapeError("upstream gradient length does not match batch size");
    }
    BatchGrad out{ParamGrads::zeros_like(net), RowMatrix::Zero(X.rows(), X.cols())};
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Vector gx;
        crown_ibp_backward(net, {X.row(i).transpose(), eps}, g_lb(i), g_ub(i), out.params, gx);
        out.inputs.row(i) = gx.transpose();
    }
    return out;
}

}  // namespace sawar::kernels::serial

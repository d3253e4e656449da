#include "sawar/kernels.hpp"

#include <exception>
#include <mutex>

#include "sawar/errors.hpp"

namespace sawar::kernels {

namespace {

// Exceptions must not escape an OpenMP region; keep the first and rethrow.
class ErrorSlot {
public:
    template <class F>
    void run(F&& f) {
        try {
            f();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

void check_upstream(const RowMatrix& X, const Vector& v) {
    if (v.size() != X.rows()) throw ShapeError("upstream gradient length does not match batch size");
}

template <class PerRecord>
BatchGrad chunked_reduce(const Network& net, const RowMatrix& X, PerRecord&& per_record) {
    const Eigen::Index n = X.rows();
    const Eigen::Index chunks = (n + kReductionChunk - 1) / kReductionChunk;
    std::vector<ParamGrads> partial(static_cast<std::size_t>(chunks));
    BatchGrad out{ParamGrads::zeros_like(net), RowMatrix::Zero(n, X.cols())};
    ErrorSlot errors;

#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        errors.run([&] {
            ParamGrads acc = ParamGrads::zeros_like(net);
            const Eigen::Index end = std::min(n, (c + 1) * kReductionChunk);
            for (Eigen::Index i = c * kReductionChunk; i < end; ++i) {
                Vector gx;
                per_record(i, acc, gx);
                out.inputs.row(i) = gx.transpose();
            }
            partial[static_cast<std::size_t>(c)] = std::move(acc);
        });
    }
    errors.rethrow();
    for (const auto& p : partial) out.params += p;
    return out;
}

}  // namespace

Vector forward_batch(const Network& net, const RowMatrix& X) {
    const Eigen::Index n = X.rows();
    Vector g(n);
    ErrorSlot errors;
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        errors.run([&] { g(i) = forward(net, X.row(i).transpose()); });
    }
    errors.rethrow();
    return g;
}

std::vector<ScalarBounds> bounds_batch(const Network& net, const RowMatrix& X, double eps) {
    const Eigen::Index n = X.rows();
    std::vector<ScalarBounds> out(static_cast<std::size_t>(n));
    ErrorSlot errors;
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index i = 0; i < n; ++i) {
        errors.run([&] {
            out[static_cast<std::size_t>(i)] = crown_ibp_bounds(net, {X.row(i).transpose(), eps});
        });
    }
    errors.rethrow();
    return out;
}

BatchGrad backward_batch(const Network& net, const RowMatrix& X, const Vector& upstream) {
    check_upstream(X, upstream);
    return chunked_reduce(net, X, [&](Eigen::Index i, ParamGrads& acc, Vector& gx) {
        backward_into(net, X.row(i).transpose(), upstream(i), acc, gx);
    });
}

BatchGrad bounds_backward_batch(const Network& net, const RowMatrix& X, double eps, const Vector& g_lb,
                                const Vector& g_ub) {
    check_upstream(X, g_lb);
    check_upstream(X, g_ub);
    return chunked_reduce(net, X, [&](Eigen::Index i, ParamGrads& acc, Vector& gx) {
        crown_ibp_backward(net, {X.row(i).transpose(), eps}, g_lb(i), g_ub(i), acc, gx);
    });
}

}  // namespace sawar::kernels

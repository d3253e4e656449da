#include "sawar/bounds.hpp"

#include <cmath>
#include <string>

#include "sawar/errors.hpp"

namespace sawar {

namespace {

void check_set(const Network& net, const PerturbationSet& set) {
    if (set.center.size() != net.input_dim()) {
        throw ShapeError("perturbation center has dimension " + std::to_string(set.center.size()) +
                         ", network expects " + std::to_string(net.input_dim()));
    }
    if (!set.center.allFinite()) throw InputError("non-finite perturbation center");
    if (!(set.radius >= 0.0) || !std::isfinite(set.radius)) throw DomainError("perturbation radius must be finite and >= 0");
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Linear bounds alpha*z + beta on Leaky ReLU over [l, u].
struct Relaxation {
    double alpha = 1.0;
    double beta = 0.0;
    bool chord = false;  // alpha/beta depend on (l, u)
};

Relaxation upper_line(double l, double u, double slope) {
    if (l >= 0.0) return {1.0, 0.0, false};
    if (u <= 0.0) return {slope, 0.0, false};
    const double alpha = (u - slope * l) / (u - l);
    return {alpha, l * (slope - alpha), true};
}

Relaxation lower_line(double l, double u, double slope) {
    if (l >= 0.0) return {1.0, 0.0, false};
    if (u <= 0.0) return {slope, 0.0, false};
    // Adaptive slope: whichever of the two branch slopes covers less area.
    return {u >= -l ? 1.0 : slope, 0.0, false};
}

// Partial derivatives of the chord coefficients with respect to (l, u).
struct ChordGrad {
    double dalpha_dl, dalpha_du, dbeta_dl, dbeta_du;
};

ChordGrad chord_grad(double l, double u, double slope) {
    const double span = u - l;
    const double alpha = (u - slope * l) / span;
    const double dalpha_dl = u * (1.0 - slope) / (span * span);
    const double dalpha_du = l * (slope - 1.0) / (span * span);
    return {dalpha_dl, dalpha_du, slope - alpha - l * dalpha_dl, -l * dalpha_du};
}

enum class Source { Crown, Ibp };

// One bound evaluation with everything the reverse pass needs.
class BoundComputation {
public:
    BoundComputation(const Network& net, const PerturbationSet& set) : net_(net), set_(set) {
        check_set(net, set);
        run_ibp();
        crown_upper_ = run_crown(+1.0, upper_trace_);
        crown_lower_neg_ = run_crown(-1.0, lower_trace_);
    }

    ScalarBounds ibp() const { return {zl_.back()(0), zu_.back()(0)}; }
    ScalarBounds crown_raw() const { return {-crown_lower_neg_, crown_upper_}; }

    LayerBounds layer_bounds() const { return {zl_, zu_}; }

    ScalarBounds combined(Source* lb_src = nullptr, Source* ub_src = nullptr,
                          bool* clamped = nullptr) const {
        const ScalarBounds ib = ibp();
        const ScalarBounds cr = crown_raw();
        const Source ls = cr.lb >= ib.lb ? Source::Crown : Source::Ibp;
        const Source us = cr.ub <= ib.ub ? Source::Crown : Source::Ibp;
        ScalarBounds out{ls == Source::Crown ? cr.lb : ib.lb, us == Source::Crown ? cr.ub : ib.ub};
        // Only reachable through rounding on near-degenerate balls.
        const bool crossed = out.lb > out.ub;
        if (crossed) out.ub = out.lb;
        if (lb_src) *lb_src = ls;
        if (ub_src) *ub_src = us;
        if (clamped) *clamped = crossed;
        return out;
    }

    void backward(double g_lb, double g_ub, ParamGrads& params, Vector& center_grad) const {
        Source ls, us;
        bool clamped = false;
        combined(&ls, &us, &clamped);

        const std::size_t depth = net_.layers.size();
        std::vector<Vector> gzl(depth), gzu(depth);
        for (std::size_t l = 0; l < depth; ++l) {
            gzl[l] = Vector::Zero(zl_[l].size());
            gzu[l] = Vector::Zero(zu_[l].size());
        }
        center_grad = Vector::Zero(set_.center.size());

        // Route the lower-bound seed.
        if (ls == Source::Crown) {
            crown_backward(-1.0, lower_trace_, -g_lb, params, center_grad, gzl, gzu);
        } else {
            gzl.back()(0) += g_lb;
        }
        // Route the upper-bound seed; a clamped upper bound follows the lower route.
        if (clamped) {
            if (ls == Source::Crown) {
                crown_backward(-1.0, lower_trace_, -g_ub, params, center_grad, gzl, gzu);
            } else {
                gzl.back()(0) += g_ub;
            }
        } else if (us == Source::Crown) {
            crown_backward(+1.0, upper_trace_, g_ub, params, center_grad, gzl, gzu);
        } else {
            gzu.back()(0) += g_ub;
        }
        ibp_backward(gzl, gzu, params, center_grad);
    }

private:
    struct CrownTrace {
        std::vector<Vector> mult;   // multiplier on each layer's input activation
        std::vector<Vector> alpha;  // relaxation slopes of layer k-1's outputs (index k)
        std::vector<Vector> beta;
        std::vector<std::vector<bool>> chord;
    };

    void run_ibp() {
        const std::size_t depth = net_.layers.size();
        const double slope = net_.leaky_slope;
        c_in_.resize(depth);
        r_in_.resize(depth);
        zl_.resize(depth);
        zu_.resize(depth);
        c_in_[0] = set_.center;
        r_in_[0] = Vector::Constant(set_.center.size(), set_.radius);
        for (std::size_t l = 0; l < depth; ++l) {
            const auto& layer = net_.layers[l];
            Vector zc = layer.weight * c_in_[l] + layer.bias;
            Vector zr = layer.weight.cwiseAbs() * r_in_[l];
            zl_[l] = zc - zr;
            zu_[l] = zc + zr;
            if (l + 1 < depth) {
                Vector al = zl_[l].unaryExpr([&](double v) { return leaky_relu(v, slope); });
                Vector au = zu_[l].unaryExpr([&](double v) { return leaky_relu(v, slope); });
                c_in_[l + 1] = 0.5 * (al + au);
                r_in_[l + 1] = 0.5 * (au - al);
            }
        }
    }

    // Upper bound of s*G over the ball.
    double run_crown(double s, CrownTrace& tr) const {
        const std::size_t depth = net_.layers.size();
        const double slope = net_.leaky_slope;
        tr.mult.assign(depth, Vector());
        tr.alpha.assign(depth, Vector());
        tr.beta.assign(depth, Vector());
        tr.chord.assign(depth, {});

        const auto& out_layer = net_.layers[depth - 1];
        tr.mult[depth - 1] = s * out_layer.weight.row(0).transpose();
        double constant = s * out_layer.bias(0);

        for (std::size_t k = depth - 1; k >= 1; --k) {
            const Vector& m = tr.mult[k];
            const Vector& lo = zl_[k - 1];
            const Vector& up = zu_[k - 1];
            const auto n = m.size();
            Vector alpha(n), beta(n);
            std::vector<bool> chord(static_cast<std::size_t>(n));
            for (Eigen::Index j = 0; j < n; ++j) {
                Relaxation r = m(j) >= 0.0 ? upper_line(lo(j), up(j), slope) : lower_line(lo(j), up(j), slope);
                alpha(j) = r.alpha;
                beta(j) = r.beta;
                chord[static_cast<std::size_t>(j)] = r.chord;
            }
            Vector d = m.cwiseProduct(alpha);
            constant += d.dot(net_.layers[k - 1].bias) + m.dot(beta);
            tr.mult[k - 1] = net_.layers[k - 1].weight.transpose() * d;
            tr.alpha[k] = std::move(alpha);
            tr.beta[k] = std::move(beta);
            tr.chord[k] = std::move(chord);
        }
        const Vector& m0 = tr.mult[0];
        return m0.dot(set_.center) + set_.radius * m0.cwiseAbs().sum() + constant;
    }

    void crown_backward(double s, const CrownTrace& tr, double g, ParamGrads& params, Vector& gx,
                        std::vector<Vector>& gzl, std::vector<Vector>& gzu) const {
        if (g == 0.0) return;
        const std::size_t depth = net_.layers.size();
        const double slope = net_.leaky_slope;

        const Vector& m0 = tr.mult[0];
        Vector gmult = g * (set_.center + set_.radius * m0.unaryExpr([](double v) { return sign_of(v); }));
        gx += g * m0;

        for (std::size_t k = 1; k < depth; ++k) {
            const auto& layer = net_.layers[k - 1];
            const Vector& m = tr.mult[k];
            Vector d = m.cwiseProduct(tr.alpha[k]);
            // mult[k-1] = W^T d
            params.layers[k - 1].weight.noalias() += d * gmult.transpose();
            Vector gd = layer.weight * gmult;
            // constant += d.b + m.beta
            params.layers[k - 1].bias += g * d;
            gd += g * layer.bias;
            Vector next = g * tr.beta[k] + gd.cwiseProduct(tr.alpha[k]);
            Vector galpha = gd.cwiseProduct(m);
            Vector gbeta = g * m;
            for (Eigen::Index j = 0; j < m.size(); ++j) {
                if (!tr.chord[k][static_cast<std::size_t>(j)]) continue;
                const ChordGrad cg = chord_grad(zl_[k - 1](j), zu_[k - 1](j), slope);
                gzl[k - 1](j) += galpha(j) * cg.dalpha_dl + gbeta(j) * cg.dbeta_dl;
                gzu[k - 1](j) += galpha(j) * cg.dalpha_du + gbeta(j) * cg.dbeta_du;
            }
            gmult = std::move(next);
        }
        // mult[depth-1] = s * W_out^T, constant starts at s * b_out
        params.layers[depth - 1].weight.row(0) += s * gmult.transpose();
        params.layers[depth - 1].bias(0) += g * s;
    }

    void ibp_backward(std::vector<Vector>& gzl, std::vector<Vector>& gzu, ParamGrads& params,
                      Vector& gx) const {
        const double slope = net_.leaky_slope;
        for (std::size_t l = net_.layers.size(); l-- > 0;) {
            const auto& layer = net_.layers[l];
            Vector gzc = gzl[l] + gzu[l];
            Vector gzr = gzu[l] - gzl[l];
            if (gzc.isZero(0.0) && gzr.isZero(0.0)) continue;
            const Matrix sign_w = layer.weight.unaryExpr([](double v) { return sign_of(v); });
            params.layers[l].weight.noalias() += gzc * c_in_[l].transpose();
            params.layers[l].weight += (gzr * r_in_[l].transpose()).cwiseProduct(sign_w);
            params.layers[l].bias += gzc;
            Vector gc = layer.weight.transpose() * gzc;
            Vector gr = layer.weight.cwiseAbs().transpose() * gzr;
            if (l == 0) {
                gx += gc;
            } else {
                Vector gal = 0.5 * (gc - gr);
                Vector gau = 0.5 * (gc + gr);
                gzl[l - 1] += gal.cwiseProduct(zl_[l - 1].unaryExpr([&](double v) { return leaky_relu_grad(v, slope); }));
                gzu[l - 1] += gau.cwiseProduct(zu_[l - 1].unaryExpr([&](double v) { return leaky_relu_grad(v, slope); }));
            }
        }
    }

    const Network& net_;
    const PerturbationSet& set_;
    std::vector<Vector> c_in_, r_in_, zl_, zu_;
    CrownTrace upper_trace_, lower_trace_;
    double crown_upper_ = 0.0;
    double crown_lower_neg_ = 0.0;
};

IbpResult degenerate_ibp(const Network& net, const PerturbationSet& set) {
    std::vector<Vector> z;
    const double g = forward_trace(net, set.center, z);
    return {{g, g}, {z, z}};
}

}  // namespace

IbpResult ibp_bounds(const Network& net, const PerturbationSet& set) {
    check_set(net, set);
    if (set.radius == 0.0) return degenerate_ibp(net, set);
    BoundComputation bc(net, set);
    return {bc.ibp(), bc.layer_bounds()};
}

ScalarBounds crown_ibp_bounds_raw(const Network& net, const PerturbationSet& set) {
    check_set(net, set);
    if (set.radius == 0.0) {
        const double g = forward(net, set.center);
        return {g, g};
    }
    return BoundComputation(net, set).crown_raw();
}

ScalarBounds crown_ibp_bounds(const Network& net, const PerturbationSet& set) {
    check_set(net, set);
    if (set.radius == 0.0) {
        const double g = forward(net, set.center);
        return {g, g};
    }
    return BoundComputation(net, set).combined();
}

double worst_case_hazard(const Network& net, const PerturbationSet& set) {
    return std::exp(crown_ibp_bounds(net, set).ub);
}

void crown_ibp_backward(const Network& net, const PerturbationSet& set, double g_lb, double g_ub,
                        ParamGrads& params, Vector& center_grad) {
    check_set(net, set);
    if (set.radius == 0.0) {
        backward_into(net, set.center, g_lb + g_ub, params, center_grad);
        return;
    }
    BoundComputation(net, set).backward(g_lb, g_ub, params, center_grad);
}

}  // namespace sawar

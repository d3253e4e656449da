#include "sawar/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "sawar/errors.hpp"
#include "sawar/kernels.hpp"

namespace sawar {

void Batch::validate() const {
    if (X.rows() == 0) throw DomainError("batch is empty");
    if (t.size() != X.rows() || e.size() != static_cast<std::size_t>(X.rows())) {
        throw ShapeError("batch columns differ in length");
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!(t(i) > 0.0) || !std::isfinite(t(i))) throw DomainError("record times must be positive and finite");
        const int ev = e[static_cast<std::size_t>(i)];
        if (ev != 0 && ev != 1) throw DomainError("event indicators must be 0 or 1");
    }
}

Batch make_batch(const std::vector<SurvRecord>& records) {
    if (records.empty()) throw DomainError("batch is empty");
    const auto d = records.front().x.size();
    Batch b;
    b.X.resize(static_cast<Eigen::Index>(records.size()), d);
    b.t.resize(static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].x.size() != d) throw ShapeError("records differ in covariate dimension");
        b.X.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
        b.t(static_cast<Eigen::Index>(i)) = records[i].t;
        b.e.push_back(records[i].e);
        b.indices.push_back(i);
    }
    b.validate();
    return b;
}

double nll_term(double g, double t, int e) { return std::exp(g) * t - static_cast<double>(e) * g; }

namespace {

double nll_term_grad(double g, double t, int e) { return std::exp(g) * t - static_cast<double>(e); }

// dF/dG of F = 1 - exp(-e^G t), in log space so overflowing hazards give 0.
double cdf_grad(double g, double t) { return std::exp(g + std::log(t) - std::exp(g) * t); }

template <class PairVisitor>
void for_each_comparable(const Batch& batch, PairVisitor&& visit) {
    const Eigen::Index n = batch.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (batch.e[static_cast<std::size_t>(i)] != 1) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i && batch.t(i) < batch.t(j)) visit(i, j);
        }
    }
}

// exp(-(F_i - F_j) / sigma) for a comparable pair with outputs (g_i, g_j).
struct PairTerm {
    double value;
    double d_gi;
    double d_gj;
};

PairTerm pair_term(double g_i, double g_j, double t_i, double sigma, bool with_grad) {
    const double f_i = cdf(g_i, t_i);
    const double f_j = cdf(g_j, t_i);
    const double eta = std::exp(-(f_i - f_j) / sigma);
    if (!with_grad) return {eta, 0.0, 0.0};
    return {eta, -eta / sigma * cdf_grad(g_i, t_i), eta / sigma * cdf_grad(g_j, t_i)};
}

void check_params(double w, double sigma) {
    if (!(w >= 0.0)) throw ConfigError("rank weight w must be >= 0");
    if (!(sigma > 0.0)) throw ConfigError("rank temperature sigma must be > 0");
}

}  // namespace

double loglik(const Network& net, const Batch& batch) {
    batch.validate();
    const Vector g = kernels::forward_batch(net, batch.X);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        ll += batch.e[static_cast<std::size_t>(i)] == 1 ? log_pdf(g(i), batch.t(i)) : log_survival(g(i), batch.t(i));
    }
    return ll;
}

double rank_loss(const Network& net, const Batch& batch, double sigma) {
    batch.validate();
    check_params(0.0, sigma);
    const Vector g = kernels::forward_batch(net, batch.X);
    double sum = 0.0;
    for_each_comparable(batch, [&](Eigen::Index i, Eigen::Index j) {
        sum += pair_term(g(i), g(j), batch.t(i), sigma, false).value;
    });
    return sum;
}

double combined_loss(const Network& net, const Batch& batch, double w, double sigma) {
    batch.validate();
    return combined_from_outputs(kernels::forward_batch(net, batch.X), batch, w, sigma, nullptr).total;
}

CombinedTerms combined_from_outputs(const Vector& g, const Batch& batch, double w, double sigma, Vector* grad) {
    check_params(w, sigma);
    if (g.size() != batch.size()) throw ShapeError("output count does not match batch size");
    CombinedTerms out;
    if (grad) *grad = Vector::Zero(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const int e = batch.e[static_cast<std::size_t>(i)];
        out.neg_ll += nll_term(g(i), batch.t(i), e);
        if (grad) (*grad)(i) += nll_term_grad(g(i), batch.t(i), e);
    }
    for_each_comparable(batch, [&](Eigen::Index i, Eigen::Index j) {
        const PairTerm p = pair_term(g(i), g(j), batch.t(i), sigma, grad != nullptr);
        out.rank += p.value;
        if (grad) {
            (*grad)(i) += w * p.d_gi;
            (*grad)(j) += w * p.d_gj;
        }
    });
    out.total = out.neg_ll + w * out.rank;
    return out;
}

LossGrad combined_loss_grad(const Network& net, const Batch& batch, double w, double sigma) {
    batch.validate();
    const Vector g = kernels::forward_batch(net, batch.X);
    Vector dg;
    const CombinedTerms terms = combined_from_outputs(g, batch, w, sigma, &dg);
    kernels::BatchGrad bg = kernels::backward_batch(net, batch.X, dg);
    LossGrad out{terms.total, std::move(bg.params), std::move(bg.inputs), !std::isfinite(terms.total)};
    return out;
}

CombinedTerms certified_from_bounds(const std::vector<ScalarBounds>& bounds, const Batch& batch, double w,
                                    double sigma, Vector* d_lb, Vector* d_ub) {
    check_params(w, sigma);
    if (bounds.size() != static_cast<std::size_t>(batch.size())) throw ShapeError("bound count does not match batch size");
    CombinedTerms out;
    const Eigen::Index n = batch.size();
    if (d_lb) *d_lb = Vector::Zero(n);
    if (d_ub) *d_ub = Vector::Zero(n);
    const bool with_grad = d_lb && d_ub;

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = bounds[static_cast<std::size_t>(i)];
        const int e = batch.e[static_cast<std::size_t>(i)];
        // Convex in G: the maximum over [lb, ub] is at an endpoint; ties take the upper one.
        const double at_lb = nll_term(b.lb, batch.t(i), e);
        const double at_ub = nll_term(b.ub, batch.t(i), e);
        if (at_ub >= at_lb || std::isnan(at_lb)) {
            out.neg_ll += at_ub;
            if (with_grad) (*d_ub)(i) += nll_term_grad(b.ub, batch.t(i), e);
        } else {
            out.neg_ll += at_lb;
            if (with_grad) (*d_lb)(i) += nll_term_grad(b.lb, batch.t(i), e);
        }
    }
    // eta decreases in F_i and increases in F_j; F increases in G.
    for_each_comparable(batch, [&](Eigen::Index i, Eigen::Index j) {
        const double lb_i = bounds[static_cast<std::size_t>(i)].lb;
        const double ub_j = bounds[static_cast<std::size_t>(j)].ub;
        const PairTerm p = pair_term(lb_i, ub_j, batch.t(i), sigma, with_grad);
        out.rank += p.value;
        if (with_grad) {
            (*d_lb)(i) += w * p.d_gi;
            (*d_ub)(j) += w * p.d_gj;
        }
    });
    out.total = out.neg_ll + w * out.rank;
    return out;
}

double certified_upper_loss(const Network& net, const Batch& batch, double eps, double w, double sigma) {
    batch.validate();
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
    if (eps == 0.0) return combined_loss(net, batch, w, sigma);
    const auto bounds = kernels::bounds_batch(net, batch.X, eps);
    const double v = certified_from_bounds(bounds, batch, w, sigma, nullptr, nullptr).total;
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
}

LossGrad certified_upper_loss_grad(const Network& net, const Batch& batch, double eps, double w, double sigma) {
    batch.validate();
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
    if (eps == 0.0) return combined_loss_grad(net, batch, w, sigma);
    const auto bounds = kernels::bounds_batch(net, batch.X, eps);
    Vector d_lb, d_ub;
    const CombinedTerms terms = certified_from_bounds(bounds, batch, w, sigma, &d_lb, &d_ub);
    kernels::BatchGrad bg = kernels::bounds_backward_batch(net, batch.X, eps, d_lb, d_ub);
    const bool overflow = !std::isfinite(terms.total);
    return {overflow ? std::numeric_limits<double>::infinity() : terms.total, std::move(bg.params),
            std::move(bg.inputs), overflow};
}

namespace {

void check_kappa(double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
}

double mix(double kappa, double clean, double certified) {
    if (kappa == 1.0) return clean;
    if (kappa == 0.0) return certified;
    return kappa * clean + (1.0 - kappa) * certified;
}

}  // namespace

LossBreakdown sawar_loss(const Network& net, const Batch& batch, double eps, double kappa, double w, double sigma) {
    batch.validate();
    check_kappa(kappa);
    const CombinedTerms clean = combined_from_outputs(kernels::forward_batch(net, batch.X), batch, w, sigma, nullptr);
    LossBreakdown out;
    out.neg_ll = clean.neg_ll;
    out.rank = clean.rank;
    out.clean_combined = clean.total;
    out.certified_upper = eps == 0.0 ? clean.total : certified_upper_loss(net, batch, eps, w, sigma);
    out.total = eps == 0.0 ? clean.total : mix(kappa, out.clean_combined, out.certified_upper);
    out.overflow = !std::isfinite(out.total);
    return out;
}

SawarGrad sawar_loss_grad(const Network& net, const Batch& batch, double eps, double kappa, double w, double sigma) {
    batch.validate();
    check_kappa(kappa);
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");

    const Vector g = kernels::forward_batch(net, batch.X);
    Vector dg;
    const CombinedTerms clean = combined_from_outputs(g, batch, w, sigma, &dg);
    kernels::BatchGrad clean_grad = kernels::backward_batch(net, batch.X, dg);

    SawarGrad out;
    out.breakdown.neg_ll = clean.neg_ll;
    out.breakdown.rank = clean.rank;
    out.breakdown.clean_combined = clean.total;
    if (eps == 0.0) {
        // Zero-radius balls: the certified term is the clean loss itself.
        out.breakdown.certified_upper = clean.total;
        out.breakdown.total = clean.total;
        out.breakdown.overflow = !std::isfinite(clean.total);
        out.params = std::move(clean_grad.params);
        out.inputs = std::move(clean_grad.inputs);
        return out;
    }

    LossGrad cert = certified_upper_loss_grad(net, batch, eps, w, sigma);
    out.breakdown.certified_upper = cert.value;
    out.breakdown.total = mix(kappa, clean.total, cert.value);
    out.breakdown.overflow = !std::isfinite(out.breakdown.total);

    if (kappa == 1.0) {
        out.params = std::move(clean_grad.params);
        out.inputs = std::move(clean_grad.inputs);
    } else if (kappa == 0.0) {
        out.params = std::move(cert.params);
        out.inputs = std::move(cert.inputs);
    } else {
        out.params = std::move(clean_grad.params);
        out.params *= kappa;
        cert.params *= 1.0 - kappa;
        out.params += cert.params;
        out.inputs = kappa * clean_grad.inputs + (1.0 - kappa) * cert.inputs;
    }
    return out;
}

Perturbed pgd_perturb(const Network& net, const Batch& batch, double eps, int steps, const AttackOptions& opts) {
    batch.validate();
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
    if (steps < 1) throw ConfigError("attack needs at least one step");
    Perturbed out{batch, {}};
    if (eps == 0.0) return out;

    const double alpha = eps / static_cast<double>(steps);
    const RowMatrix& origin = batch.X;
    std::set<std::size_t> skipped;
    for (int k = 0; k < steps; ++k) {
        const Vector g = kernels::forward_batch(net, out.batch.X);
        Vector dg;
        combined_from_outputs(g, out.batch, opts.w, opts.sigma, &dg);
        const RowMatrix grad = kernels::backward_batch(net, out.batch.X, dg).inputs;
        for (Eigen::Index i = 0; i < grad.rows(); ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (skipped.count(idx)) continue;
            if (!grad.row(i).allFinite()) {
                skipped.insert(idx);
                out.batch.X.row(i) = origin.row(i);
                continue;
            }
            for (Eigen::Index c = 0; c < grad.cols(); ++c) {
                const double step = opts.sign_step ? (grad(i, c) > 0.0 ? 1.0 : (grad(i, c) < 0.0 ? -1.0 : 0.0))
                                                   : grad(i, c);
                const double moved = out.batch.X(i, c) + alpha * step;
                out.batch.X(i, c) = std::clamp(moved, origin(i, c) - eps, origin(i, c) + eps);
            }
        }
    }
    out.skipped.assign(skipped.begin(), skipped.end());
    return out;
}

Perturbed fgsm_perturb(const Network& net, const Batch& batch, double eps, const AttackOptions& opts) {
    return pgd_perturb(net, batch, eps, 1, opts);
}

Batch noise_perturb(const Batch& batch, double eps, std::uint64_t seed) {
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
    Batch out = batch;
    if (eps == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::sqrt(eps);
    for (Eigen::Index i = 0; i < out.X.rows(); ++i) {
        for (Eigen::Index c = 0; c < out.X.cols(); ++c) {
            out.X(i, c) += std::clamp(scale * normal(rng), -eps, eps);
        }
    }
    return out;
}

}  // namespace sawar

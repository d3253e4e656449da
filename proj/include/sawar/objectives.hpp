#pragma once

#include <cstdint>
#include <vector>

#include "sawar/bounds.hpp"
#include "sawar/nn.hpp"
#include "sawar/survival.hpp"

namespace sawar {

/// A set of right-censored records sharing one covariate dimension.
struct Batch {
    RowMatrix X;
    Vector t;
    std::vector<int> e;
    std::vector<std::size_t> indices;  // rows in the parent dataset

    Eigen::Index size() const { return X.rows(); }
    SurvRecord record(Eigen::Index i) const { return {X.row(i).transpose(), t(i), e[static_cast<std::size_t>(i)]}; }
    void validate() const;
};

Batch make_batch(const std::vector<SurvRecord>& records);

struct LossBreakdown {
    double neg_ll = 0.0;
    double rank = 0.0;
    double clean_combined = 0.0;
    double certified_upper = 0.0;
    double total = 0.0;
    bool overflow = false;
};

// Value plus gradients with respect to parameters and every record's covariates.
struct LossGrad {
    double value = 0.0;
    ParamGrads params;
    RowMatrix inputs;
    bool overflow = false;
};

struct SawarGrad {
    LossBreakdown breakdown;
    ParamGrads params;
    RowMatrix inputs;
};

// Per-record negative log-likelihood term e^G t - e G (convex in G).
double nll_term(double g, double t, int e);

/// Sum of e*log f + (1-e)*log S over the batch.
double loglik(const Network& net, const Batch& batch);

/// Sum over comparable pairs (t_i < t_j, e_i = 1) of exp(-(F(t_i|x_i) - F(t_i|x_j)) / sigma).
double rank_loss(const Network& net, const Batch& batch, double sigma = 1.0);

/// -loglik + w * rank_loss.
double combined_loss(const Network& net, const Batch& batch, double w, double sigma = 1.0);

// Same quantities from precomputed network outputs; `grad` receives dL/dG when non-null.
struct CombinedTerms {
    double neg_ll = 0.0;
    double rank = 0.0;
    double total = 0.0;
};
CombinedTerms combined_from_outputs(const Vector& g, const Batch& batch, double w, double sigma, Vector* grad);

LossGrad combined_loss_grad(const Network& net, const Batch& batch, double w, double sigma = 1.0);

/// Sound upper bound of max over the per-record balls of combined_loss,
/// composed from per-record output bounds.
double certified_upper_loss(const Network& net, const Batch& batch, double eps, double w, double sigma = 1.0);

// Composition from output bounds; d_lb / d_ub receive the gradient with
// respect to each record's bounds when non-null.
CombinedTerms certified_from_bounds(const std::vector<ScalarBounds>& bounds, const Batch& batch, double w,
                                    double sigma, Vector* d_lb, Vector* d_ub);

LossGrad certified_upper_loss_grad(const Network& net, const Batch& batch, double eps, double w,
                                   double sigma = 1.0);

/// kappa * combined_loss + (1 - kappa) * certified_upper_loss.
LossBreakdown sawar_loss(const Network& net, const Batch& batch, double eps, double kappa, double w,
                         double sigma = 1.0);
SawarGrad sawar_loss_grad(const Network& net, const Batch& batch, double eps, double kappa, double w,
                          double sigma = 1.0);

struct AttackOptions {
    double w = 1.0;
    double sigma = 1.0;
    // false: raw-gradient ascent step; true: conventional sign step.
    bool sign_step = false;
};

struct Perturbed {
    Batch batch;
    std::vector<std::size_t> skipped;  // records whose gradient was non-finite
};

/// K projected gradient-ascent steps on combined_loss with step eps / K.
Perturbed pgd_perturb(const Network& net, const Batch& batch, double eps, int steps, const AttackOptions& opts);

/// pgd_perturb with a single step.
Perturbed fgsm_perturb(const Network& net, const Batch& batch, double eps, const AttackOptions& opts);

/// x + clip(sqrt(eps) * z, -eps, eps) with z standard normal per coordinate.
Batch noise_perturb(const Batch& batch, double eps, std::uint64_t seed);

}  // namespace sawar

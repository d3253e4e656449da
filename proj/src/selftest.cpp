#include "sawar/selftest.hpp"

#include <cmath>
#include <random>

#include "sawar/bounds.hpp"
#include "sawar/evaluation.hpp"
#include "sawar/io.hpp"
#include "sawar/kernels.hpp"
#include "sawar/objectives.hpp"
#include "sawar/oracles.hpp"
#include "sawar/trainer.hpp"

namespace sawar {

std::vector<CheckResult> check_bounds(const SoundnessOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    long cases = 0, ibp_bad = 0, crown_bad = 0, wider = 0, raw_wider = 0;
    double worst_excess = 0.0;
    for (int trial = 0; trial < opts.trials; ++trial) {
        const Network net = oracles::random_network({2, 8, 8, 1}, -1.0, 1.0, 0.01, rng);
        const Vector center = Vector::NullaryExpr(2, [&] { return normal(rng); });
        for (double eps : opts.eps) {
            const PerturbationSet set{center, eps};
            const oracles::Range range = oracles::sampled_range(net, center, eps, opts.grid_per_dim);
            const IbpResult ibp = ibp_bounds(net, set);
            const ScalarBounds crown = crown_ibp_bounds(net, set);
            const ScalarBounds raw = crown_ibp_bounds_raw(net, set);
            const double ibp_excess = std::max(ibp.output.lb - range.min, range.max - ibp.output.ub);
            const double crown_excess = std::max(crown.lb - range.min, range.max - crown.ub);
            worst_excess = std::max({worst_excess, ibp_excess, crown_excess});
            ++cases;
            if (ibp_excess > opts.slack) ++ibp_bad;
            if (crown_excess > opts.slack) ++crown_bad;
            if (crown.width() > ibp.output.width() + opts.width_slack) ++wider;
            if (raw.width() > ibp.output.width() + opts.width_slack) ++raw_wider;
        }
    }
    const std::string n = std::to_string(cases);
    return {
        {"bound_soundness", ibp_bad == 0 && crown_bad == 0,
         "cases=" + n + " ibp_violations=" + std::to_string(ibp_bad) + " crown_ibp_violations=" +
             std::to_string(crown_bad) + " max_excess=" + format_double(worst_excess)},
        {"bound_tightness", wider == 0,
         "cases=" + n + " wider_than_ibp=" + std::to_string(wider) +
             " unintersected_wider_than_ibp=" + std::to_string(raw_wider)},
    };
}

CheckResult check_certified_dominance(const DominanceOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    long checks = 0, violations = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    const double eps_choices[] = {0.1, 0.5};
    for (int k = 0; k < opts.triples; ++k) {
        const Network net = oracles::random_network({2, 8, 8, 1}, -1.0, 1.0, 0.01, rng);
        const Batch batch = oracles::random_batch(opts.batch, 2, 0.6, rng);
        const double eps = eps_choices[k % 2];
        const double w = 1.0 / opts.batch;
        const double upper = certified_upper_loss(net, batch, eps, w);
        auto test = [&](const Batch& b) {
            const double v = combined_loss(net, b, w);
            const double gap = upper - v;
            min_gap = std::min(min_gap, gap / std::max(1.0, std::abs(upper)));
            ++checks;
            if (gap < -1e-9 * std::max(1.0, std::abs(upper))) ++violations;
        };
        Batch probe = batch;
        for (int s = 0; s < opts.samples; ++s) {
            for (Eigen::Index i = 0; i < probe.X.rows(); ++i) {
                for (Eigen::Index c = 0; c < probe.X.cols(); ++c) probe.X(i, c) = batch.X(i, c) + eps * unit(rng);
            }
            test(probe);
        }
        // Joint corners: each record at each of its 2^d corners.
        const long per_record = 1L << batch.X.cols();
        long total = 1;
        for (Eigen::Index i = 0; i < batch.size(); ++i) total *= per_record;
        for (long code = 0; code < total; ++code) {
            long rest = code;
            for (Eigen::Index i = 0; i < probe.X.rows(); ++i) {
                const long corner = rest % per_record;
                rest /= per_record;
                for (Eigen::Index c = 0; c < probe.X.cols(); ++c) {
                    probe.X(i, c) = batch.X(i, c) + (((corner >> c) & 1) ? eps : -eps);
                }
            }
            test(probe);
        }
    }
    return {"certified_dominance", violations == 0,
            "checks=" + std::to_string(checks) + " violations=" + std::to_string(violations) +
                " min_relative_gap=" + format_double(min_gap)};
}

std::vector<CheckResult> check_gradients(const GradientOptions& opts) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> eps_dist(0.05, 0.3);
    std::vector<CheckResult> out;
    for (Method m : {Method::baseline, Method::noise, Method::fgsm, Method::pgd, Method::sawar}) {
        double worst_param = 0.0, worst_input = 0.0;
        int accepted = 0, redrawn = 0;
        // Instances with a breakpoint within h of the point are redrawn: there the
        // central difference is not accurate to the tolerance. Capped so a loss that
        // is kinked everywhere still fails.
        while (accepted < opts.instances && redrawn <= opts.instances) {
            const Network net = oracles::random_network({3, 8, 8, 1}, -1.0, 1.0, 0.01, rng);
            const Batch batch = oracles::random_batch(6, 3, 0.6, rng);
            const double eps = eps_dist(rng);
            const std::uint64_t noise_seed = rng();
            TrainConfig cfg;
            cfg.method = m;
            cfg.pgd_steps = 3;
            const double w = 1.0 / static_cast<double>(batch.size());
            const SawarGrad g = method_loss_grad(cfg, net, batch, eps, noise_seed);

            // The perturbation is held fixed while differentiating, as in training.
            Batch at = batch;
            double loss_eps = 0.0;
            if (m == Method::noise) at = noise_perturb(batch, eps, noise_seed);
            if (m == Method::fgsm || m == Method::pgd) {
                at = pgd_perturb(net, batch, eps, m == Method::fgsm ? 1 : cfg.pgd_steps, {w, cfg.sigma, cfg.sign_step}).batch;
            }
            if (m == Method::sawar) loss_eps = eps;

            const auto by_params = oracles::check_param_gradient(
                net, [&](const Network& n) { return sawar_loss(n, at, loss_eps, cfg.kappa, w).total; }, g.params, opts.h);
            const auto by_inputs = oracles::check_input_gradient(
                at.X,
                [&](const RowMatrix& X) {
                    Batch b = at;
                    b.X = X;
                    return sawar_loss(net, b, loss_eps, cfg.kappa, w).total;
                },
                g.inputs, opts.h);
            if (by_params.straddles_kink(opts.tolerance) || by_inputs.straddles_kink(opts.tolerance)) {
                ++redrawn;
                continue;
            }
            ++accepted;
            worst_param = std::max(worst_param, by_params.relative());
            worst_input = std::max(worst_input, by_inputs.relative());
        }
        out.push_back({"gradient_" + method_name(m),
                       accepted == opts.instances && worst_param <= opts.tolerance && worst_input <= opts.tolerance,
                       "instances=" + std::to_string(accepted) + " redrawn_at_kink=" + std::to_string(redrawn) +
                           " max_rel_param=" + format_double(worst_param) + " max_rel_input=" + format_double(worst_input)});
    }
    return out;
}

std::vector<CheckResult> check_metrics(const MetricOptions& opts) {
    std::vector<CheckResult> out;
    std::mt19937_64 rng(opts.seed);
    int mismatches = 0;
    for (int f = 0; f < opts.ci_fixtures; ++f) {
        const int n = std::uniform_int_distribution<int>(3, opts.max_rows)(rng);
        std::vector<double> risks, times;
        std::vector<int> events;
        // Coarse values so that ties in both times and risks occur.
        std::uniform_int_distribution<int> coarse(1, 25);
        for (int i = 0; i < n; ++i) {
            risks.push_back(coarse(rng) * 0.1);
            times.push_back(coarse(rng));
            events.push_back(std::bernoulli_distribution(0.6)(rng) ? 1 : 0);
        }
        events[0] = 1;
        times[0] = 0.5;  // guarantees a comparable pair
        if (concordance_index(risks, times, events) != oracles::concordance_pairs(risks, times, events)) ++mismatches;
    }
    out.push_back({"ci_enumeration", mismatches == 0,
                   "fixtures=" + std::to_string(opts.ci_fixtures) + " mismatches=" + std::to_string(mismatches)});

    // Four records, one censored; worked by hand:
    // KM: 1 -> 3/4 at t=1, -> 1/2 at t=2 (the censoring at 2 stays at risk), -> 0 at t=3.
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> e{1, 0, 1, 1};
    const StepCurve km = km_estimator({1, 2, 2, 3}, {1, 1, 0, 1});
    const double km_err = std::max({std::abs(km.at(0.5) - 1.0), std::abs(km.at(1.0) - 0.75), std::abs(km.at(2.5) - 0.5),
                                    std::abs(km.at(3.0) - 0.0), std::abs(km.before(2.0) - 0.75)});
    out.push_back({"km_fixture", km_err <= 1e-10, "max_error=" + format_double(km_err)});

    // Censoring KM of (t, 1-e) is 1 before t=2 and 2/3 from t=2 on.
    // tau=2.5, S=[.2,.6,.7,.9]: (.04/1 + 0 + .09/(2/3) + .01/(2/3)) / 4 = 0.0475
    // tau=3.5, S=[.1,.5,.4,.8]: (.01/1 + 0 + .16/(2/3) + .04/(2/3)) / 4 = 0.0775
    const StepCurve censor = censoring_km(t, e);
    const double b1 = brier_ipcw({0.2, 0.6, 0.7, 0.9}, t, e, censor, 2.5).value;
    const double b2 = brier_ipcw({0.1, 0.5, 0.4, 0.8}, t, e, censor, 3.5).value;
    RowMatrix surv(4, 2);
    surv << 0.2, 0.1, 0.6, 0.5, 0.7, 0.4, 0.9, 0.8;
    const double ibs = integrated_brier(surv, t, e, censor, {2.5, 3.5}).value;
    const double brier_err = std::max({std::abs(b1 - 0.0475), std::abs(b2 - 0.0775), std::abs(ibs - 0.0625)});
    out.push_back({"brier_fixture", brier_err <= 1e-10, "max_error=" + format_double(brier_err)});

    // hazards [1, 2, 0.5], t [1, 0.5, 2], e [1, 0, 1]: -( (0 - 1) + (-1) + (log 0.5 - 1) ) = 3 + log 2
    const double nll = negll_metric({1.0, 2.0, 0.5}, {1.0, 0.5, 2.0}, {1, 0, 1}).value;
    const double nll_err = std::abs(nll - (3.0 + std::log(2.0)));
    out.push_back({"negll_fixture", nll_err <= 1e-10, "error=" + format_double(nll_err)});
    return out;
}

CheckResult check_kernels(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Network net = oracles::random_network({5, 16, 16, 1}, -0.5, 0.5, 0.01, rng);
    const Batch b = oracles::random_batch(100, 5, 0.5, rng);
    const Vector up = Vector::NullaryExpr(100, [&] { return std::normal_distribution<double>(0, 1)(rng); });
    const Vector up2 = Vector::NullaryExpr(100, [&] { return std::normal_distribution<double>(0, 1)(rng); });

    double diff = (kernels::forward_batch(net, b.X) - kernels::serial::forward_batch(net, b.X)).cwiseAbs().maxCoeff();
    const auto pb = kernels::bounds_batch(net, b.X, 0.2);
    const auto sb = kernels::serial::bounds_batch(net, b.X, 0.2);
    for (std::size_t i = 0; i < pb.size(); ++i) diff = std::max({diff, std::abs(pb[i].lb - sb[i].lb), std::abs(pb[i].ub - sb[i].ub)});

    auto grad_diff = [](const kernels::BatchGrad& a, const kernels::BatchGrad& c) {
        double d = (a.inputs - c.inputs).cwiseAbs().maxCoeff();
        for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
            d = std::max(d, (a.params.layers[l].weight - c.params.layers[l].weight).cwiseAbs().maxCoeff());
            d = std::max(d, (a.params.layers[l].bias - c.params.layers[l].bias).cwiseAbs().maxCoeff());
        }
        return d;
    };
    diff = std::max(diff, grad_diff(kernels::backward_batch(net, b.X, up), kernels::serial::backward_batch(net, b.X, up)));
    diff = std::max(diff, grad_diff(kernels::bounds_backward_batch(net, b.X, 0.2, up, up2),
                                    kernels::serial::bounds_backward_batch(net, b.X, 0.2, up, up2)));
    return {"kernels_parallel_vs_serial", diff <= 1e-10, "max_abs_diff=" + format_double(diff)};
}

bool run_selftest(std::ostream& out, std::uint64_t seed) {
    std::vector<CheckResult> all;
    SoundnessOptions so;
    so.seed = seed;
    for (auto& r : check_bounds(so)) all.push_back(r);
    DominanceOptions dopt;
    dopt.seed = seed;
    all.push_back(check_certified_dominance(dopt));
    GradientOptions gopt;
    gopt.seed = seed;
    for (auto& r : check_gradients(gopt)) all.push_back(r);
    MetricOptions mopt;
    mopt.seed = seed;
    for (auto& r : check_metrics(mopt)) all.push_back(r);
    all.push_back(check_kernels(seed));

    bool ok = true;
    for (const auto& r : all) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ' ' << r.detail << '\n';
        ok = ok && r.passed;
    }
    out << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok;
}

}  // namespace sawar

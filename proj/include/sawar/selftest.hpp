#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace sawar {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SoundnessOptions {
    int trials = 100;
    std::vector<double> eps = {0.01, 0.1, 0.5};
    int grid_per_dim = 41;
    double slack = 1e-6;       // allowed bound violation
    double width_slack = 1e-9; // allowed CROWN-IBP excess width over IBP
    std::uint64_t seed = 0;
};

// Bound soundness (IBP and CROWN-IBP contain the sampled range of G) and tightness
// (CROWN-IBP no wider than IBP) on random 2-8-8-1 networks.
std::vector<CheckResult> check_bounds(const SoundnessOptions& opts);

struct DominanceOptions {
    int triples = 10;
    int samples = 1000;
    int batch = 4;
    std::uint64_t seed = 0;
};

// certified_upper_loss >= combined_loss at random in-ball perturbations and at every joint corner.
CheckResult check_certified_dominance(const DominanceOptions& opts);

struct GradientOptions {
    int instances = 10;
    double h = 1e-6;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
};

// Parameter and input gradients of every training method against central differences.
std::vector<CheckResult> check_gradients(const GradientOptions& opts);

struct MetricOptions {
    int ci_fixtures = 20;
    int max_rows = 200;
    std::uint64_t seed = 0;
};

// CI against pair enumeration, KM / Brier / IBS / NegLL against hand-computed fixtures.
std::vector<CheckResult> check_metrics(const MetricOptions& opts);

// OpenMP kernels against the serial reference loops.
CheckResult check_kernels(std::uint64_t seed);

/// Runs every check at its default size, printing one line per check. Returns true when all pass.
bool run_selftest(std::ostream& out, std::uint64_t seed = 0);

}  // namespace sawar

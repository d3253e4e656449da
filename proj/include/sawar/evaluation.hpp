#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sawar/data.hpp"
#include "sawar/nn.hpp"
#include "sawar/survival.hpp"

namespace sawar {

enum class Attack { fgsm, worstcase };
std::string attack_name(Attack a);
Attack parse_attack(const std::string& s);  // throws ConfigError

enum class Metric { ci, ibs, negll };
std::string metric_name(Metric m);
// CI is better when larger, IBS and NegLL when smaller.
bool higher_is_better(Metric m);

struct MetricRecord {
    std::string dataset;
    std::string method;
    std::string attack;
    double eps = 0.0;
    double ci = 0.0;
    double ibs = 0.0;
    double negll = 0.0;
    bool ci_flag = false;
    bool ibs_flag = false;
    bool negll_flag = false;
    std::uint64_t seed = 0;

    double value(Metric m) const;
};

/// {0, 0.05, 0.1, 0.2, ..., 1.0}
std::vector<double> default_eps_grid();
// Parses "0,0.05,0.1"; throws ConfigError on non-numeric or negative entries.
std::vector<double> parse_eps_grid(const std::string& s);

/// Harrell's C over pairs t_i < t_j with e_i = 1; risk ties count 1/2.
double concordance_index(const std::vector<double>& risks, const std::vector<double>& times,
                         const std::vector<int>& events);

struct BrierValue {
    double value = 0.0;
    std::size_t excluded = 0;  // records whose censoring weight was zero
};

/// Graf IPCW Brier score at tau; `censor_km` is the KM curve of the censoring times.
BrierValue brier_ipcw(const std::vector<double>& surv_at_tau, const std::vector<double>& times,
                      const std::vector<int>& events, const StepCurve& censor_km, double tau);

// KM of the censoring distribution (events and censorings swapped).
StepCurve censoring_km(const std::vector<double>& times, const std::vector<int>& events);

/// Trapezoidal integral of brier_ipcw over `grid`, divided by the grid span.
/// `surv` holds one row per record and one column per grid point.
BrierValue integrated_brier(const RowMatrix& surv, const std::vector<double>& times, const std::vector<int>& events,
                            const StepCurve& censor_km, const std::vector<double>& grid);

// exp(-exp(g_i) * tau_k) for every record and grid point.
RowMatrix survival_matrix(const Vector& g, const std::vector<double>& grid);

// k * t_max / n for k = 1..n.
std::vector<double> brier_grid(double t_max, std::size_t n = 100);

struct NegLLValue {
    double value = 0.0;
    bool overflow = false;  // an infinite hazard or an infinite sum
};

/// -sum[e (log l - l t) + (1 - e)(-l t)].
NegLLValue negll_metric(const std::vector<double>& hazards, const std::vector<double>& times,
                        const std::vector<int>& events);

struct SweepOptions {
    std::string dataset;
    std::string method;
    std::uint64_t seed = 0;
    bool sign_step = false;  // FGSM step mode
    double sigma = 1.0;
    bool curves = true;
};

struct NamedCurve {
    std::string name;
    SampledCurve curve;
};

struct SweepResult {
    std::vector<MetricRecord> records;
    std::vector<NamedCurve> curves;
    std::size_t brier_exclusions = 0;
    std::size_t attack_skipped = 0;
};

/// Evaluates CI/IBS/NegLL on `test` at every eps under the given attack.
/// `train` supplies the censoring KM for the Brier weights.
SweepResult attack_sweep(const Network& net, const SurvivalDataset& train, const SurvivalDataset& test, Attack attack,
                         const std::vector<double>& eps_grid, const SweepOptions& opts);

// Network outputs after the attack at one eps: FGSM-perturbed forward values or worst-case upper bounds.
Vector attacked_outputs(const Network& net, const SurvivalDataset& test, Attack attack, double eps, const SweepOptions& opts,
                        std::size_t* skipped = nullptr);

/// Mean rank (1 = best, ties averaged) of each method; seeds are averaged before ranking
/// and ranks are averaged across datasets.
struct RankRow {
    std::string attack;
    double eps = 0.0;
    Metric metric = Metric::ci;
    std::map<std::string, double> mean_rank;  // method -> rank
};
using RankTable = std::vector<RankRow>;

RankTable average_ranks(const std::vector<MetricRecord>& records);

// Average ranks of `values`, ascending (1 for the smallest); equal values share their mean rank.
std::vector<double> rank_ascending(const std::vector<double>& values);

struct PercentChangeRow {
    std::string attack;
    double eps = 0.0;
    Metric metric = Metric::ci;
    std::string method;
    double percent = 0.0;
    bool flagged = false;  // baseline value zero or non-finite in some dataset
};

/// 100 (method - baseline) / baseline, averaged across datasets, per eps and metric.
std::vector<PercentChangeRow> relative_percent_change(const std::vector<MetricRecord>& records,
                                                      const std::string& baseline_method);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t blocks = 0;
    std::size_t treatments = 0;
};

/// Rows are blocks, columns treatments; values are ranked within each block.
FriedmanResult friedman_test(const Matrix& scores);

// Blocks (dataset, eps) x methods of per-block ranks for one attack and metric,
// restricted to `eps_subset` when it is nonempty.
struct RankBlocks {
    std::vector<std::string> methods;
    Matrix ranks;
};
RankBlocks rank_blocks(const std::vector<MetricRecord>& records, const std::string& attack, Metric metric,
                       const std::vector<double>& eps_subset = {});

std::string metrics_to_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> metrics_from_csv(const std::string& text);  // throws FormatError

std::string curve_to_csv(const SampledCurve& c);

/// metrics.csv, curves/*.csv and summary.json.
void emit_sweep(const SweepResult& result, const nlohmann::json& summary, const std::string& out_dir);

/// ranks.csv, percent_change.csv and friedman.csv.
void emit_report(const std::vector<MetricRecord>& records, const std::string& baseline_method, const std::string& out_dir);

}  // namespace sawar

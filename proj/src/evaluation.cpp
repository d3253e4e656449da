#include "sawar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/math/distributions/chi_squared.hpp>

#include "sawar/errors.hpp"
#include "sawar/io.hpp"
#include "sawar/kernels.hpp"
#include "sawar/objectives.hpp"
#include "sawar/trainer.hpp"

namespace sawar {

std::string attack_name(Attack a) { return a == Attack::fgsm ? "fgsm" : "worstcase"; }

Attack parse_attack(const std::string& s) {
    if (s == "fgsm") return Attack::fgsm;
    if (s == "worstcase") return Attack::worstcase;
    throw ConfigError("unknown attack '" + s + "' (expected fgsm or worstcase)");
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::ci: return "ci";
        case Metric::ibs: return "ibs";
        case Metric::negll: return "negll";
    }
    return "unknown";
}

bool higher_is_better(Metric m) { return m == Metric::ci; }

double MetricRecord::value(Metric m) const {
    switch (m) {
        case Metric::ci: return ci;
        case Metric::ibs: return ibs;
        case Metric::negll: return negll;
    }
    return 0.0;
}

std::vector<double> default_eps_grid() { return {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}; }

std::vector<double> parse_eps_grid(const std::string& s) {
    std::vector<double> out;
    for (const auto& f : split_fields(s)) {
        double v = 0.0;
        try {
            v = parse_double(f);
        } catch (const Error&) {
            throw ConfigError("eps grid entry is not a number: '" + f + "'");
        }
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("eps grid entries must be finite and >= 0");
        out.push_back(v);
    }
    return out;
}

namespace {

void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || a != c) throw ShapeError("metric inputs differ in length");
}

// Fenwick tree over compressed risk ranks.
class CountTree {
public:
    explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t i) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }
    // Number of inserted values with rank < i.
    std::int64_t below(std::size_t i) const {
        std::int64_t s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<std::int64_t> tree_;
};

}  // namespace

double concordance_index(const std::vector<double>& risks, const std::vector<double>& times,
                         const std::vector<int>& events) {
    check_lengths(risks.size(), times.size(), events.size());
    for (double r : risks) {
        if (std::isnan(r)) throw MetricError("concordance index: risk is NaN");
    }
    std::vector<double> levels(risks);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    auto rank_of = [&](double r) {
        return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), r) - levels.begin());
    };

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    // Walk from the latest time down; records already in the tree have strictly later times.
    CountTree tree(levels.size());
    std::int64_t inserted = 0, comparable = 0, concordant = 0, tied = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t end = i;
        while (end < order.size() && times[order[end]] == times[order[i]]) ++end;
        for (std::size_t k = i; k < end; ++k) {
            const std::size_t a = order[k];
            if (events[a] != 1) continue;
            const std::size_t r = rank_of(risks[a]);
            const std::int64_t lower = tree.below(r);
            const std::int64_t equal = tree.below(r + 1) - lower;
            comparable += inserted;
            concordant += lower;
            tied += equal;
        }
        for (std::size_t k = i; k < end; ++k) {
            tree.add(rank_of(risks[order[k]]));
            ++inserted;
        }
        i = end;
    }
    if (comparable == 0) throw MetricError("concordance index: no comparable pairs");
    return static_cast<double>(2 * concordant + tied) / static_cast<double>(2 * comparable);
}

StepCurve censoring_km(const std::vector<double>& times, const std::vector<int>& events) {
    std::vector<int> censored(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) censored[i] = events[i] == 1 ? 0 : 1;
    return km_estimator(times, censored);
}

BrierValue brier_ipcw(const std::vector<double>& surv_at_tau, const std::vector<double>& times,
                      const std::vector<int>& events, const StepCurve& censor_km, double tau) {
    check_lengths(surv_at_tau.size(), times.size(), events.size());
    BrierValue out;
    double sum = 0.0;
    std::size_t used = 0;
    const double g_tau = censor_km.at(tau);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double s = surv_at_tau[i];
        if (times[i] <= tau && events[i] == 1) {
            const double g = censor_km.before(times[i]);
            if (!(g > 0.0)) {
                ++out.excluded;
                continue;
            }
            sum += s * s / g;
        } else if (times[i] > tau) {
            if (!(g_tau > 0.0)) {
                ++out.excluded;
                continue;
            }
            sum += (1.0 - s) * (1.0 - s) / g_tau;
        }
        ++used;
    }
    if (used == 0) throw MetricError("Brier score: every record has zero censoring weight");
    out.value = sum / static_cast<double>(used);
    return out;
}

BrierValue integrated_brier(const RowMatrix& surv, const std::vector<double>& times, const std::vector<int>& events,
                            const StepCurve& censor_km, const std::vector<double>& grid) {
    if (grid.size() < 2) throw DomainError("integrated Brier score needs at least two grid points");
    if (surv.rows() != static_cast<Eigen::Index>(times.size()) || surv.cols() != static_cast<Eigen::Index>(grid.size())) {
        throw ShapeError("survival matrix does not match records x grid");
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw DomainError("grid must be strictly ascending");
    }
    BrierValue out;
    std::vector<double> b(grid.size());
    std::vector<double> column(times.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (std::size_t i = 0; i < times.size(); ++i) column[i] = surv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        const BrierValue v = brier_ipcw(column, times, events, censor_km, grid[k]);
        b[k] = v.value;
        out.excluded += v.excluded;
    }
    double area = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) area += 0.5 * (b[k] + b[k - 1]) * (grid[k] - grid[k - 1]);
    out.value = area / (grid.back() - grid.front());
    return out;
}

RowMatrix survival_matrix(const Vector& g, const std::vector<double>& grid) {
    RowMatrix s(g.size(), static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double h = std::exp(g(i));
        for (std::size_t k = 0; k < grid.size(); ++k) s(i, static_cast<Eigen::Index>(k)) = std::exp(-h * grid[k]);
    }
    return s;
}

std::vector<double> brier_grid(double t_max, std::size_t n) {
    if (!(t_max > 0.0) || n < 2) throw DomainError("Brier grid needs t_max > 0 and at least two points");
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k) grid[k] = static_cast<double>(k + 1) * t_max / static_cast<double>(n);
    return grid;
}

NegLLValue negll_metric(const std::vector<double>& hazards, const std::vector<double>& times,
                        const std::vector<int>& events) {
    check_lengths(hazards.size(), times.size(), events.size());
    NegLLValue out;
    double sum = 0.0;
    for (std::size_t i = 0; i < hazards.size(); ++i) {
        const double l = hazards[i];
        if (!(l > 0.0)) throw DomainError("NegLL: hazards must be > 0");
        if (std::isinf(l)) {
            out.overflow = true;
            continue;
        }
        sum -= events[i] == 1 ? std::log(l) - l * times[i] : -l * times[i];
    }
    out.value = out.overflow ? std::numeric_limits<double>::infinity() : sum;
    if (!std::isfinite(out.value)) out.overflow = true;
    return out;
}

Vector attacked_outputs(const Network& net, const SurvivalDataset& test, Attack attack, double eps,
                        const SweepOptions& opts, std::size_t* skipped) {
    if (attack == Attack::worstcase) {
        const auto bounds = kernels::bounds_batch(net, test.X, eps);
        Vector g(test.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = bounds[static_cast<std::size_t>(i)].ub;
        return g;
    }
    const Batch clean = full_batch(test);
    const AttackOptions aopts{1.0 / static_cast<double>(clean.size()), opts.sigma, opts.sign_step};
    const Perturbed p = fgsm_perturb(net, clean, eps, aopts);
    if (skipped) *skipped += p.skipped.size();
    return kernels::forward_batch(net, p.batch.X);
}

namespace {

std::string eps_label(double eps) { return format_double(eps); }

}  // namespace

SweepResult attack_sweep(const Network& net, const SurvivalDataset& train, const SurvivalDataset& test, Attack attack,
                         const std::vector<double>& eps_grid, const SweepOptions& opts) {
    if (test.size() == 0) throw InputError("cannot evaluate on an empty test set");
    SweepResult out;
    const std::vector<double> times(test.t.data(), test.t.data() + test.t.size());
    const std::vector<double> train_times(train.t.data(), train.t.data() + train.t.size());
    const StepCurve censor = censoring_km(train_times, train.e);
    const double t_max = *std::max_element(times.begin(), times.end());
    const std::vector<double> grid = brier_grid(t_max);

    const std::vector<double> curve_grid = linear_grid(t_max);
    if (opts.curves) {
        const StepCurve km = km_estimator(times, test.e);
        SampledCurve k{curve_grid, {}};
        for (double tau : curve_grid) k.values.push_back(km.at(tau));
        out.curves.push_back({"km", k});
    }

    for (double eps : eps_grid) {
        if (!(eps >= 0.0)) throw ConfigError("eps must be >= 0");
        const Vector g = attacked_outputs(net, test, attack, eps, opts, &out.attack_skipped);
        std::vector<double> hazards(static_cast<std::size_t>(g.size()));
        bool overflow = false;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            hazards[static_cast<std::size_t>(i)] = std::exp(g(i));
            if (!std::isfinite(hazards[static_cast<std::size_t>(i)])) overflow = true;
        }

        MetricRecord r;
        r.dataset = opts.dataset;
        r.method = opts.method;
        r.attack = attack_name(attack);
        r.eps = eps;
        r.seed = opts.seed;
        r.ci = concordance_index(hazards, times, test.e);
        const BrierValue ibs = integrated_brier(survival_matrix(g, grid), times, test.e, censor, grid);
        r.ibs = ibs.value;
        out.brier_exclusions += ibs.excluded;
        const NegLLValue nll = negll_metric(hazards, times, test.e);
        r.negll = nll.value;
        r.ci_flag = overflow;
        r.ibs_flag = overflow || !std::isfinite(r.ibs);
        r.negll_flag = nll.overflow;
        out.records.push_back(r);

        if (opts.curves) {
            const std::string tag = attack_name(attack) + "_eps" + eps_label(eps);
            out.curves.push_back({tag + "_population", population_curve_from_outputs(g, curve_grid)});
            const QuantileCurves q = survival_quantiles_from_outputs(g, curve_grid);
            out.curves.push_back({tag + "_q05", q.lower});
            out.curves.push_back({tag + "_q95", q.upper});
        }
    }
    return out;
}

std::vector<double> rank_ascending(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // NaN sorts last.
    auto less = [&](std::size_t a, std::size_t b) {
        const double x = values[a], y = values[b];
        if (std::isnan(x)) return false;
        if (std::isnan(y)) return true;
        return x < y;
    };
    std::stable_sort(order.begin(), order.end(), less);
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && !less(order[i], order[j]) && !less(order[j], order[i])) ++j;
        const double mean = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean;
        i = j;
    }
    return ranks;
}

namespace {

using CellKey = std::tuple<std::string, std::string, double>;  // dataset, attack, eps

struct SeedMean {
    double sum[3] = {0.0, 0.0, 0.0};
    int count = 0;
};

// (dataset, attack, eps) -> method -> seed-averaged metric values.
std::map<CellKey, std::map<std::string, SeedMean>> seed_means(const std::vector<MetricRecord>& records) {
    std::map<CellKey, std::map<std::string, SeedMean>> cells;
    for (const auto& r : records) {
        SeedMean& m = cells[{r.dataset, r.attack, r.eps}][r.method];
        m.sum[0] += r.ci;
        m.sum[1] += r.ibs;
        m.sum[2] += r.negll;
        ++m.count;
    }
    return cells;
}

std::set<std::string> method_set(const std::vector<MetricRecord>& records) {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.method);
    return s;
}

constexpr Metric kMetrics[] = {Metric::ci, Metric::ibs, Metric::negll};

double mean_of(const SeedMean& m, Metric metric) {
    return m.sum[static_cast<int>(metric)] / static_cast<double>(m.count);
}

std::vector<double> cell_ranks(const std::map<std::string, SeedMean>& cell, Metric metric) {
    std::vector<double> v;
    for (const auto& [method, m] : cell) {
        const double x = mean_of(m, metric);
        v.push_back(higher_is_better(metric) ? -x : x);
    }
    return rank_ascending(v);
}

void check_cell(const CellKey& key, const std::map<std::string, SeedMean>& cell, const std::set<std::string>& methods) {
    for (const auto& m : methods) {
        if (!cell.count(m)) {
            throw MetricError("missing record for method '" + m + "' in cell dataset=" + std::get<0>(key) +
                              " attack=" + std::get<1>(key) + " eps=" + format_double(std::get<2>(key)));
        }
    }
}

}  // namespace

RankTable average_ranks(const std::vector<MetricRecord>& records) {
    if (records.empty()) throw MetricError("no records to rank");
    const auto methods = method_set(records);
    const auto cells = seed_means(records);
    // (attack, eps) -> metric -> method -> (rank sum, dataset count)
    std::map<std::pair<std::string, double>, std::map<int, std::map<std::string, std::pair<double, int>>>> acc;
    for (const auto& [key, cell] : cells) {
        check_cell(key, cell, methods);
        for (Metric metric : kMetrics) {
            const auto ranks = cell_ranks(cell, metric);
            std::size_t k = 0;
            for (const auto& [method, m] : cell) {
                auto& slot = acc[{std::get<1>(key), std::get<2>(key)}][static_cast<int>(metric)][method];
                slot.first += ranks[k++];
                ++slot.second;
            }
        }
    }
    RankTable table;
    for (const auto& [ae, by_metric] : acc) {
        for (const auto& [metric, by_method] : by_metric) {
            RankRow row{ae.first, ae.second, static_cast<Metric>(metric), {}};
            for (const auto& [method, s] : by_method) row.mean_rank[method] = s.first / s.second;
            table.push_back(std::move(row));
        }
    }
    return table;
}

std::vector<PercentChangeRow> relative_percent_change(const std::vector<MetricRecord>& records,
                                                      const std::string& baseline_method) {
    const auto methods = method_set(records);
    if (!methods.count(baseline_method)) throw MetricError("no records for baseline method '" + baseline_method + "'");
    const auto cells = seed_means(records);
    struct Acc {
        double sum = 0.0;
        int count = 0;
        bool flagged = false;
    };
    std::map<std::tuple<std::string, double, int, std::string>, Acc> acc;
    for (const auto& [key, cell] : cells) {
        check_cell(key, cell, methods);
        for (Metric metric : kMetrics) {
            const double base = mean_of(cell.at(baseline_method), metric);
            for (const auto& [method, m] : cell) {
                Acc& a = acc[{std::get<1>(key), std::get<2>(key), static_cast<int>(metric), method}];
                const double v = mean_of(m, metric);
                if (base == 0.0 || !std::isfinite(base) || !std::isfinite(v)) {
                    a.flagged = true;
                    continue;
                }
                a.sum += 100.0 * (v - base) / base;
                ++a.count;
            }
        }
    }
    std::vector<PercentChangeRow> out;
    for (const auto& [key, a] : acc) {
        PercentChangeRow row{std::get<0>(key), std::get<1>(key), static_cast<Metric>(std::get<2>(key)), std::get<3>(key),
                             a.flagged ? std::numeric_limits<double>::quiet_NaN() : a.sum / a.count, a.flagged};
        out.push_back(row);
    }
    return out;
}

FriedmanResult friedman_test(const Matrix& scores) {
    const auto n = scores.rows();
    const auto k = scores.cols();
    if (k < 2) throw DomainError("Friedman test needs at least two treatments");
    if (n < 2) throw DomainError("Friedman test needs at least two blocks");
    Vector rank_sum = Vector::Zero(k);
    double tie_sum = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        std::vector<double> row(static_cast<std::size_t>(k));
        for (Eigen::Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = scores(b, j);
        const auto ranks = rank_ascending(row);
        for (Eigen::Index j = 0; j < k; ++j) rank_sum(j) += ranks[static_cast<std::size_t>(j)];
        // Tie groups share a rank value.
        std::map<double, int> groups;
        for (double r : ranks) ++groups[r];
        for (const auto& [r, t] : groups) tie_sum += static_cast<double>(t) * t * t - t;
    }
    const double nd = static_cast<double>(n), kd = static_cast<double>(k);
    FriedmanResult out;
    out.blocks = static_cast<std::size_t>(n);
    out.treatments = static_cast<std::size_t>(k);
    const double correction = 1.0 - tie_sum / (nd * kd * (kd * kd - 1.0));
    if (correction <= 0.0) return out;  // every block fully tied
    const double raw = 12.0 / (nd * kd * (kd + 1.0)) * rank_sum.squaredNorm() - 3.0 * nd * (kd + 1.0);
    out.statistic = std::max(0.0, raw / correction);
    const boost::math::chi_squared dist(kd - 1.0);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
    return out;
}

RankBlocks rank_blocks(const std::vector<MetricRecord>& records, const std::string& attack, Metric metric,
                       const std::vector<double>& eps_subset) {
    const auto methods = method_set(records);
    const auto cells = seed_means(records);
    RankBlocks out;
    out.methods.assign(methods.begin(), methods.end());
    std::vector<std::vector<double>> rows;
    for (const auto& [key, cell] : cells) {
        if (std::get<1>(key) != attack) continue;
        if (!eps_subset.empty() &&
            std::find(eps_subset.begin(), eps_subset.end(), std::get<2>(key)) == eps_subset.end()) {
            continue;
        }
        check_cell(key, cell, methods);
        rows.push_back(cell_ranks(cell, metric));
    }
    out.ranks.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(methods.size()));
    for (std::size_t b = 0; b < rows.size(); ++b) {
        for (std::size_t j = 0; j < rows[b].size(); ++j) out.ranks(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = rows[b][j];
    }
    return out;
}

namespace {

const char* kMetricsHeader = "dataset,method,attack,eps,ci,ibs,negll,ci_flag,ibs_flag,negll_flag,seed";

}  // namespace

std::string metrics_to_csv(const std::vector<MetricRecord>& records) {
    std::ostringstream out;
    out << kMetricsHeader << '\n';
    for (const auto& r : records) {
        out << r.dataset << ',' << r.method << ',' << r.attack << ',' << format_double(r.eps) << ','
            << format_double(r.ci) << ',' << format_double(r.ibs) << ',' << format_double(r.negll) << ','
            << (r.ci_flag ? 1 : 0) << ',' << (r.ibs_flag ? 1 : 0) << ',' << (r.negll_flag ? 1 : 0) << ',' << r.seed
            << '\n';
    }
    return out.str();
}

std::vector<MetricRecord> metrics_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("metrics file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsHeader) throw FormatError("unexpected metrics header: " + line);
    std::vector<MetricRecord> out;
    std::size_t line_no = 1;
    auto flag = [&](const std::string& s) {
        if (s != "0" && s != "1") throw FormatError("line " + std::to_string(line_no) + ": bad flag '" + s + "'");
        return s == "1";
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_fields(line);
        if (f.size() != 11) throw FormatError("line " + std::to_string(line_no) + ": expected 11 fields");
        MetricRecord r;
        r.dataset = f[0];
        r.method = f[1];
        r.attack = f[2];
        try {
            r.eps = parse_double(f[3]);
            r.ci = parse_double(f[4]);
            r.ibs = parse_double(f[5]);
            r.negll = parse_double(f[6]);
            r.seed = std::stoull(f[10]);
        } catch (const std::exception& ex) {
            throw FormatError("line " + std::to_string(line_no) + ": " + ex.what());
        }
        r.ci_flag = flag(f[7]);
        r.ibs_flag = flag(f[8]);
        r.negll_flag = flag(f[9]);
        out.push_back(r);
    }
    return out;
}

std::string curve_to_csv(const SampledCurve& c) {
    std::ostringstream out;
    out << "time,survival\n";
    for (std::size_t k = 0; k < c.grid.size(); ++k) out << format_double(c.grid[k]) << ',' << format_double(c.values[k]) << '\n';
    return out.str();
}

void emit_sweep(const SweepResult& result, const nlohmann::json& summary, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "curves");
    for (const auto& c : result.curves) {
        write_file_atomic((fs::path(out_dir) / "curves" / (c.name + ".csv")).string(), curve_to_csv(c.curve));
    }
    write_file_atomic((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    write_file_atomic((fs::path(out_dir) / "metrics.csv").string(), metrics_to_csv(result.records));
}

void emit_report(const std::vector<MetricRecord>& records, const std::string& baseline_method, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto methods = method_set(records);
    const RankTable table = average_ranks(records);

    // One row per (attack, eps), eps descending; columns metric_method.
    std::ostringstream ranks;
    ranks << "attack,eps";
    for (Metric m : kMetrics) {
        for (const auto& method : methods) ranks << ',' << metric_name(m) << '_' << method;
    }
    ranks << '\n';
    std::map<std::string, std::map<double, std::map<int, const RankRow*>, std::greater<>>> layout;
    for (const auto& row : table) layout[row.attack][row.eps][static_cast<int>(row.metric)] = &row;
    for (const auto& [attack, by_eps] : layout) {
        for (const auto& [eps, by_metric] : by_eps) {
            ranks << attack << ',' << format_double(eps);
            for (Metric m : kMetrics) {
                for (const auto& method : methods) ranks << ',' << format_double(by_metric.at(static_cast<int>(m))->mean_rank.at(method));
            }
            ranks << '\n';
        }
    }

    std::ostringstream pct;
    pct << "attack,eps,metric,method,percent_change,flagged\n";
    if (methods.count(baseline_method)) {
        for (const auto& r : relative_percent_change(records, baseline_method)) {
            pct << r.attack << ',' << format_double(r.eps) << ',' << metric_name(r.metric) << ',' << r.method << ','
                << format_double(r.percent) << ',' << (r.flagged ? 1 : 0) << '\n';
        }
    }

    std::ostringstream fried;
    fried << "attack,metric,blocks,treatments,statistic,p_value\n";
    for (const auto& attack : std::set<std::string>{"fgsm", "worstcase"}) {
        for (Metric m : kMetrics) {
            const RankBlocks rb = rank_blocks(records, attack, m);
            if (rb.ranks.rows() < 2 || rb.ranks.cols() < 2) continue;
            const FriedmanResult fr = friedman_test(rb.ranks);
            fried << attack << ',' << metric_name(m) << ',' << fr.blocks << ',' << fr.treatments << ','
                  << format_double(fr.statistic) << ',' << format_double(fr.p_value) << '\n';
        }
    }

    write_file_atomic((fs::path(out_dir) / "ranks.csv").string(), ranks.str());
    write_file_atomic((fs::path(out_dir) / "percent_change.csv").string(), pct.str());
    write_file_atomic((fs::path(out_dir) / "friedman.csv").string(), fried.str());
}

}  // namespace sawar

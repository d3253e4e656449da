#include "sawar/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "sawar/errors.hpp"
#include "sawar/evaluation.hpp"
#include "sawar/io.hpp"
#include "sawar/selftest.hpp"
#include "sawar/trainer.hpp"

namespace sawar {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

constexpr const char* kFooter = R"(Configuration precedence: built-in defaults < --config file < command-line flags.
The config file holds `key = value` lines, optionally under a [train] section.
Keys: method kappa eps_max warmup_epochs ramp_epochs max_epochs batch_size patience
      pgd_steps sigma rank_weight seed lr beta1 beta2 adam_epsilon sign_step hidden
      leaky_slope monitor normalize_all init_output_bias
Default output root: $SAWAR_OUT_ROOT, else ./runs
Exit codes: 0 ok, 1 other failure, 2 configuration error, 3 data error, 4 training divergence.)";

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

std::string output_root() {
    const char* env = std::getenv("SAWAR_OUT_ROOT");
    return env && *env ? env : "runs";
}

void write_manifest(const std::string& out_dir, const std::string& command, const json& body) {
    json m = body;
    m["command"] = command;
    m["output_dir"] = out_dir;
    m["tool_version"] = kVersion;
    m["timestamp"] = timestamp();
    write_file_atomic((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

struct TrainArgs {
    std::string dataset;
    std::string method;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig cfg;
    if (!a.config.empty()) apply_ini(cfg, a.config);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!a.method.empty()) cfg.method = parse_method(a.method);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();

    const std::string name = fs::path(a.dataset).stem().string();
    const std::string out_dir = a.out.empty()
        ? (fs::path(output_root()) / (name + "_" + method_name(cfg.method) + "_seed" + std::to_string(cfg.seed))).string()
        : a.out;
    fs::create_directories(out_dir);
    write_manifest(out_dir, "train",
                   {{"config_file", a.config}, {"config", config_to_json(cfg)}, {"datasets", {a.dataset}},
                    {"seeds", {{"split", cfg.seed}, {"train", cfg.seed}}}});

    const RawDataset raw = load_csv(a.dataset);
    for (const auto& w : raw.warnings) err << "warning: " << w << '\n';
    const SplitDataset split = stratified_split(raw, cfg.seed, {cfg.normalize_all});
    for (const auto& w : split.warnings) err << "warning: " << w << '\n';

    Checkpoint ckpt{{}, split.codec, cfg, cfg.seed, raw.name};
    try {
        TrainResult result = train(cfg, split);
        ckpt.net = std::move(result.net);
        write_file_atomic((fs::path(out_dir) / "train_report.csv").string(), result.report.to_csv());
        save_checkpoint(ckpt, (fs::path(out_dir) / "model.json").string());
        out << "trained " << method_name(cfg.method) << " on " << raw.name << ": best epoch "
            << result.report.best_epoch << ", stopped at " << result.report.stop_epoch << ", "
            << std::fixed << std::setprecision(1) << result.report.wall_seconds << " s\n"
            << "checkpoint: " << (fs::path(out_dir) / "model.json").string() << '\n';
    } catch (const TrainingDiverged& ex) {
        ckpt.net = ex.last_good;
        write_file_atomic((fs::path(out_dir) / "train_report.csv").string(), ex.report.to_csv());
        save_checkpoint(ckpt, (fs::path(out_dir) / "last_good.json").string());
        throw;
    }
    return kExitOk;
}

struct EvalArgs {
    std::string model;
    std::string dataset;
    std::string attack;
    std::string eps_grid;
    std::string out;
    int jobs = 1;
    bool no_curves = false;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<Attack> attacks;
    for (const auto& s : split_fields(a.attack)) attacks.push_back(parse_attack(s));
    const std::vector<double> grid = a.eps_grid.empty() ? default_eps_grid() : parse_eps_grid(a.eps_grid);
    if (grid.empty()) throw ConfigError("eps grid is empty");
    if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");

    Checkpoint ckpt;
    try {
        ckpt = load_checkpoint(a.model);
    } catch (const FormatError& ex) {
        throw CodecError(std::string("cannot use checkpoint: ") + ex.what());
    }
    const std::string name = fs::path(a.dataset).stem().string();
    const std::string method = method_name(ckpt.config.method);
    const std::string out_dir = a.out.empty()
        ? (fs::path(output_root()) / (name + "_" + method + "_seed" + std::to_string(ckpt.split_seed) + "_eval")).string()
        : a.out;
    fs::create_directories(out_dir);
    json grid_json = json::array();
    for (double e : grid) grid_json.push_back(e);
    write_manifest(out_dir, "evaluate",
                   {{"model", a.model}, {"datasets", {a.dataset}}, {"attack", a.attack}, {"eps_grid", grid_json},
                    {"config", config_to_json(ckpt.config)}, {"seeds", {{"split", ckpt.split_seed}}}, {"jobs", a.jobs}});

    const RawDataset raw = load_csv(a.dataset);
    for (const auto& w : raw.warnings) err << "warning: " << w << '\n';
    if (raw.name != ckpt.dataset) {
        err << "warning: checkpoint was trained on '" << ckpt.dataset << "', evaluating on '" << raw.name << "'\n";
    }
    std::vector<int> events;
    for (const auto& r : raw.rows) events.push_back(r.event);
    const SplitIndices idx = split_indices(events, ckpt.split_seed);
    const SurvivalDataset train = apply_codec(ckpt.codec, raw, idx.train);
    const SurvivalDataset test = apply_codec(ckpt.codec, raw, idx.test);
    if (train.X.cols() != ckpt.net.input_dim()) throw CodecError("encoded width does not match the network input");

    SweepOptions opts;
    opts.dataset = raw.name;
    opts.method = method;
    opts.seed = ckpt.split_seed;
    opts.sign_step = ckpt.config.sign_step;
    opts.sigma = ckpt.config.sigma;
    opts.curves = !a.no_curves;

    // Cells are (attack, eps); workers pull the next cell index and results keep cell order.
    std::vector<std::pair<Attack, double>> cells;
    for (Attack at : attacks) {
        for (double e : grid) cells.emplace_back(at, e);
    }
    std::vector<SweepResult> results(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::size_t next = 0;
    std::mutex lock;
    auto worker = [&] {
        while (true) {
            std::size_t c;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next == cells.size()) return;
                c = next++;
            }
            try {
                results[c] = attack_sweep(ckpt.net, train, test, cells[c].first, {cells[c].second}, opts);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(a.jobs, static_cast<int>(cells.size()));
    for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    SweepResult merged;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (const auto& r : results[c].records) merged.records.push_back(r);
        for (const auto& curve : results[c].curves) {
            if (curve.name == "km" && c > 0) continue;
            merged.curves.push_back(curve);
        }
        merged.brier_exclusions += results[c].brier_exclusions;
        merged.attack_skipped += results[c].attack_skipped;
    }
    std::size_t overflow = 0;
    for (const auto& r : merged.records) overflow += (r.ci_flag || r.ibs_flag || r.negll_flag) ? 1 : 0;
    json summary = {{"dataset", raw.name},
                    {"method", method},
                    {"config", config_to_json(ckpt.config)},
                    {"seeds", {{"split", ckpt.split_seed}}},
                    {"eps_grid", grid_json},
                    {"rows", raw.rows.size()},
                    {"test_rows", test.size()},
                    {"dropped_nonpositive_time", raw.dropped_nonpositive_time},
                    {"missing_values", raw.missing_values},
                    {"brier_exclusions", merged.brier_exclusions},
                    {"attack_skipped_records", merged.attack_skipped},
                    {"overflow_records", overflow}};
    emit_sweep(merged, summary, out_dir);
    out << "wrote " << merged.records.size() << " metric rows to " << (fs::path(out_dir) / "metrics.csv").string() << '\n';
    return kExitOk;
}

struct ReportArgs {
    std::string inputs;
    std::string out;
    std::string baseline = "baseline";
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
    if (!fs::is_directory(a.inputs)) throw InputError("'" + a.inputs + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(a.inputs)) {
        if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no metrics.csv files under '" + a.inputs + "'");

    std::vector<MetricRecord> records;
    std::map<std::string, std::set<std::string>> methods_by_dataset;
    for (const auto& f : files) {
        for (auto& r : metrics_from_csv(read_file(f))) {
            methods_by_dataset[r.dataset].insert(r.method);
            records.push_back(std::move(r));
        }
    }
    if (records.empty()) throw InputError("metrics files contain no rows");
    std::set<std::string> all;
    for (const auto& [d, m] : methods_by_dataset) all.insert(m.begin(), m.end());
    for (const auto& [d, m] : methods_by_dataset) {
        for (const auto& method : all) {
            if (!m.count(method)) throw MetricError("dataset '" + d + "' has no records for method '" + method + "'");
        }
    }

    const std::string out_dir = a.out.empty() ? (fs::path(output_root()) / "report").string() : a.out;
    fs::create_directories(out_dir);
    json inputs = json::array();
    for (const auto& f : files) inputs.push_back(f);
    write_manifest(out_dir, "report", {{"inputs", inputs}, {"baseline", a.baseline}});
    emit_report(records, a.baseline, out_dir);
    out << "aggregated " << records.size() << " rows from " << files.size() << " files into " << out_dir << '\n';
    return kExitOk;
}

int exit_code_for(const std::exception& ex) {
    if (dynamic_cast<const ConfigError*>(&ex)) return kExitConfig;
    if (dynamic_cast<const DivergenceError*>(&ex)) return kExitDivergence;
    if (dynamic_cast<const InputError*>(&ex) || dynamic_cast<const FormatError*>(&ex) ||
        dynamic_cast<const CodecError*>(&ex) || dynamic_cast<const MetricError*>(&ex)) {
        return kExitData;
    }
    return kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Certified adversarial training and robustness evaluation for exponential Cox-PH survival models",
                 "sawar"};
    app.footer(kFooter);
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train one model on a SurvSet-style CSV");
    train_cmd->add_option("--dataset", ta.dataset, "Dataset CSV (time, event, num_*, fac_*)")->required();
    train_cmd->add_option("--method", ta.method, "baseline | noise | fgsm | pgd | sawar");
    train_cmd->add_option("--config", ta.config, "INI file overriding the built-in defaults");
    train_cmd->add_option("--seed", ta.seed, "Split and training seed (default 0)");
    train_cmd->add_option("--out", ta.out, "Output directory");
    train_cmd->add_option("--set", ta.overrides, "Override one config key, key=value (repeatable)");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("evaluate", "Sweep CI / IBS / NegLL over attack strengths");
    eval_cmd->add_option("--model", ea.model, "Checkpoint written by train")->required();
    eval_cmd->add_option("--dataset", ea.dataset, "Dataset CSV the model was trained on")->required();
    eval_cmd->add_option("--attack", ea.attack, "fgsm | worstcase (comma-separated for both)")->required();
    eval_cmd->add_option("--eps-grid", ea.eps_grid, "Comma-separated eps values (default 0,0.05,0.1,0.2,...,1)");
    eval_cmd->add_option("--out", ea.out, "Output directory");
    eval_cmd->add_option("--jobs", ea.jobs, "Worker threads for independent sweep cells");
    eval_cmd->add_flag("--no-curves", ea.no_curves, "Skip curve CSVs");

    ReportArgs ra;
    auto* report_cmd = app.add_subcommand("report", "Aggregate metrics.csv files into rank tables");
    report_cmd->add_option("--inputs", ra.inputs, "Directory searched recursively for metrics.csv")->required();
    report_cmd->add_option("--out", ra.out, "Output directory");
    report_cmd->add_option("--baseline", ra.baseline, "Reference method for percent changes");

    std::uint64_t selftest_seed = 0;
    auto* selftest_cmd = app.add_subcommand("selftest", "Run the oracle checks");
    selftest_cmd->add_option("--seed", selftest_seed, "Seed for the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train_cmd) return cmd_train(ta, out, err);
        if (*eval_cmd) return cmd_evaluate(ea, out, err);
        if (*report_cmd) return cmd_report(ra, out);
        if (*selftest_cmd) return run_selftest(out, selftest_seed) ? kExitOk : kExitFailure;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex);
    }
    return kExitFailure;
}

}  // namespace sawar

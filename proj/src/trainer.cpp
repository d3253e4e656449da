#include "sawar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sawar/io.hpp"

namespace sawar {

std::string method_name(Method m) {
    switch (m) {
        case Method::baseline: return "baseline";
        case Method::noise: return "noise";
        case Method::fgsm: return "fgsm";
        case Method::pgd: return "pgd";
        case Method::sawar: return "sawar";
    }
    return "unknown";
}

Method parse_method(const std::string& s) {
    for (Method m : {Method::baseline, Method::noise, Method::fgsm, Method::pgd, Method::sawar}) {
        if (method_name(m) == s) return m;
    }
    throw ConfigError("unknown method '" + s + "' (expected baseline, noise, fgsm, pgd or sawar)");
}

void TrainConfig::validate() const {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
    if (!(eps_max >= 0.0) || !std::isfinite(eps_max)) throw ConfigError("eps_max must be >= 0");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
    if (ramp_epochs < 1) throw ConfigError("ramp_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs <= warmup_epochs + ramp_epochs) {
        throw ConfigError("max_epochs must exceed warmup_epochs + ramp_epochs, otherwise no epoch can be selected");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (pgd_steps < 1) throw ConfigError("pgd_steps must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
    if (rank_weight && !(*rank_weight >= 0.0)) throw ConfigError("rank_weight must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
    for (int h : hidden) {
        if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
    }
}

namespace {

double to_real(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const Error&) {
        throw ConfigError("config '" + key + "': not a number: '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    const double d = to_real(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("config '" + key + "': not an integer: '" + v + "'");
    return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config '" + key + "': not a boolean: '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "method") cfg.method = parse_method(v);
    else if (key == "kappa") cfg.kappa = to_real(key, v);
    else if (key == "eps_max") cfg.eps_max = to_real(key, v);
    else if (key == "warmup_epochs") cfg.warmup_epochs = to_int(key, v);
    else if (key == "ramp_epochs") cfg.ramp_epochs = to_int(key, v);
    else if (key == "max_epochs") cfg.max_epochs = to_int(key, v);
    else if (key == "batch_size") cfg.batch_size = to_int(key, v);
    else if (key == "patience") cfg.patience = to_int(key, v);
    else if (key == "pgd_steps") cfg.pgd_steps = to_int(key, v);
    else if (key == "sigma") cfg.sigma = to_real(key, v);
    else if (key == "rank_weight") {
        if (v == "auto") cfg.rank_weight.reset();
        else cfg.rank_weight = to_real(key, v);
    } else if (key == "seed") {
        const int s = to_int(key, v);
        if (s < 0) throw ConfigError("seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "lr") cfg.lr = to_real(key, v);
    else if (key == "beta1") cfg.beta1 = to_real(key, v);
    else if (key == "beta2") cfg.beta2 = to_real(key, v);
    else if (key == "adam_epsilon") cfg.adam_epsilon = to_real(key, v);
    else if (key == "sign_step") cfg.sign_step = to_bool(key, v);
    else if (key == "leaky_slope") cfg.leaky_slope = to_real(key, v);
    else if (key == "monitor") {
        if (v != "clean" && v != "certified") throw ConfigError("monitor must be 'clean' or 'certified'");
        cfg.monitor_certified = v == "certified";
    } else if (key == "normalize_all") cfg.normalize_all = to_bool(key, v);
    else if (key == "init_output_bias") cfg.init_output_bias = to_bool(key, v);
    else if (key == "hidden") {
        cfg.hidden.clear();
        for (const auto& f : split_fields(v)) cfg.hidden.push_back(to_int(key, trim(f)));
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_ini(TrainConfig& cfg, const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& ex) {
        throw ConfigError(std::string("cannot parse config: ") + ex.what());
    }
    for (const auto& [key, node] : tree) {
        if (node.empty()) {
            set_config_value(cfg, key, node.data());
        } else if (key == "train") {
            for (const auto& [sub, leaf] : node) set_config_value(cfg, sub, leaf.data());
        } else {
            throw ConfigError("unknown config section [" + key + "]");
        }
    }
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["method"] = method_name(cfg.method);
    j["kappa"] = cfg.kappa;
    j["eps_max"] = cfg.eps_max;
    j["warmup_epochs"] = cfg.warmup_epochs;
    j["ramp_epochs"] = cfg.ramp_epochs;
    j["max_epochs"] = cfg.max_epochs;
    j["batch_size"] = cfg.batch_size;
    j["patience"] = cfg.patience;
    j["pgd_steps"] = cfg.pgd_steps;
    j["sigma"] = cfg.sigma;
    j["rank_weight"] = cfg.rank_weight ? nlohmann::json(*cfg.rank_weight) : nlohmann::json("auto");
    j["seed"] = cfg.seed;
    j["lr"] = cfg.lr;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_epsilon"] = cfg.adam_epsilon;
    j["sign_step"] = cfg.sign_step;
    j["hidden"] = cfg.hidden;
    j["leaky_slope"] = cfg.leaky_slope;
    j["monitor"] = cfg.monitor_certified ? "certified" : "clean";
    j["normalize_all"] = cfg.normalize_all;
    j["init_output_bias"] = cfg.init_output_bias;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    try {
        TrainConfig cfg;
        cfg.method = parse_method(j.at("method").get<std::string>());
        cfg.kappa = j.at("kappa").get<double>();
        cfg.eps_max = j.at("eps_max").get<double>();
        cfg.warmup_epochs = j.at("warmup_epochs").get<int>();
        cfg.ramp_epochs = j.at("ramp_epochs").get<int>();
        cfg.max_epochs = j.at("max_epochs").get<int>();
        cfg.batch_size = j.at("batch_size").get<int>();
        cfg.patience = j.at("patience").get<int>();
        cfg.pgd_steps = j.at("pgd_steps").get<int>();
        cfg.sigma = j.at("sigma").get<double>();
        const auto& rw = j.at("rank_weight");
        if (rw.is_number()) cfg.rank_weight = rw.get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.lr = j.at("lr").get<double>();
        cfg.beta1 = j.at("beta1").get<double>();
        cfg.beta2 = j.at("beta2").get<double>();
        cfg.adam_epsilon = j.at("adam_epsilon").get<double>();
        cfg.sign_step = j.at("sign_step").get<bool>();
        cfg.hidden = j.at("hidden").get<std::vector<int>>();
        cfg.leaky_slope = j.at("leaky_slope").get<double>();
        cfg.monitor_certified = j.at("monitor").get<std::string>() == "certified";
        cfg.normalize_all = j.at("normalize_all").get<bool>();
        cfg.init_output_bias = j.at("init_output_bias").get<bool>();
        return cfg;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed config: ") + ex.what());
    }
}

double eps_schedule(const TrainConfig& cfg, int epoch) {
    if (epoch < cfg.warmup_epochs) return 0.0;
    if (epoch >= cfg.warmup_epochs + cfg.ramp_epochs) return cfg.eps_max;
    return cfg.eps_max * static_cast<double>(epoch - cfg.warmup_epochs) / static_cast<double>(cfg.ramp_epochs);
}

std::string TrainReport::to_csv() const {
    std::ostringstream out;
    out << "epoch,eps,neg_ll,rank,clean_combined,certified_upper,total,val_loss,skipped,selected\n";
    for (const auto& r : rows) {
        out << r.epoch << ',' << format_double(r.eps) << ',' << format_double(r.train.neg_ll) << ','
            << format_double(r.train.rank) << ',' << format_double(r.train.clean_combined) << ','
            << format_double(r.train.certified_upper) << ',' << format_double(r.train.total) << ','
            << format_double(r.val_loss) << ',' << r.skipped_batches << ',' << (r.epoch == best_epoch ? 1 : 0)
            << '\n';
    }
    return out.str();
}

Batch batch_from(const SurvivalDataset& ds, const std::vector<std::size_t>& positions) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(positions.size());
    b.X.resize(n, ds.X.cols());
    b.t.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto p = static_cast<Eigen::Index>(positions[static_cast<std::size_t>(i)]);
        b.X.row(i) = ds.X.row(p);
        b.t(i) = ds.t(p);
        b.e.push_back(ds.e[static_cast<std::size_t>(p)]);
        b.indices.push_back(ds.rows.empty() ? static_cast<std::size_t>(p) : ds.rows[static_cast<std::size_t>(p)]);
    }
    return b;
}

Batch full_batch(const SurvivalDataset& ds) {
    std::vector<std::size_t> all(static_cast<std::size_t>(ds.size()));
    std::iota(all.begin(), all.end(), std::size_t{0});
    return batch_from(ds, all);
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::mt19937_64 rng(seq);
    return rng();
}

double rank_weight_for(const TrainConfig& cfg, const Batch& b) {
    return cfg.rank_weight.value_or(1.0 / static_cast<double>(b.size()));
}

}  // namespace

SawarGrad method_loss_grad(const TrainConfig& cfg, const Network& net, const Batch& batch, double eps,
                           std::uint64_t noise_seed) {
    const double w = rank_weight_for(cfg, batch);
    switch (cfg.method) {
        case Method::baseline:
            return sawar_loss_grad(net, batch, 0.0, cfg.kappa, w, cfg.sigma);
        case Method::noise:
            return sawar_loss_grad(net, noise_perturb(batch, eps, noise_seed), 0.0, cfg.kappa, w, cfg.sigma);
        case Method::fgsm:
        case Method::pgd: {
            const int steps = cfg.method == Method::fgsm ? 1 : cfg.pgd_steps;
            const AttackOptions opts{w, cfg.sigma, cfg.sign_step};
            return sawar_loss_grad(net, pgd_perturb(net, batch, eps, steps, opts).batch, 0.0, cfg.kappa, w, cfg.sigma);
        }
        case Method::sawar:
            return sawar_loss_grad(net, batch, eps, cfg.kappa, w, cfg.sigma);
    }
    throw ConfigError("unknown method");
}

TrainResult train(const TrainConfig& cfg, const SplitDataset& split) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const SurvivalDataset& tr = split.train;
    if (tr.size() == 0 || split.validation.size() == 0) throw InputError("train and validation splits must be nonempty");

    std::vector<int> dims{static_cast<int>(tr.X.cols())};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(1);
    Network net = init_network(dims, cfg.leaky_slope, cfg.seed);
    if (cfg.init_output_bias) {
        double events = 0.0;
        for (int e : tr.e) events += e;
        net.layers.back().bias(0) = std::log(std::max(events, 1.0) / tr.t.sum());
    }
    AdamState adam = AdamState::for_network(net, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);

    const Batch val = full_batch(split.validation);
    const double val_w = rank_weight_for(cfg, val);
    TrainReport report;
    Network best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const auto n = static_cast<std::size_t>(tr.size());
    const auto bs = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double eps = eps_schedule(cfg, epoch);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0));
        std::shuffle(perm.begin(), perm.end(), rng);

        EpochRow row;
        row.epoch = epoch;
        row.eps = eps;
        int finite = 0;
        for (std::size_t b = 0, start_pos = 0; start_pos < n; ++b, start_pos += bs) {
            const std::vector<std::size_t> pos(perm.begin() + static_cast<std::ptrdiff_t>(start_pos),
                                               perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start_pos + bs)));
            const Batch batch = batch_from(tr, pos);
            SawarGrad g = method_loss_grad(cfg, net, batch, eps, derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), b + 1));
            if (!std::isfinite(g.breakdown.total) || !g.params.all_finite()) {
                ++row.skipped_batches;
                continue;
            }
            adam_step(adam, net, g.params);
            ++finite;
            row.train.neg_ll += g.breakdown.neg_ll;
            row.train.rank += g.breakdown.rank;
            row.train.clean_combined += g.breakdown.clean_combined;
            row.train.certified_upper += g.breakdown.certified_upper;
            row.train.total += g.breakdown.total;
        }
        if (finite == 0) {
            report.stop_epoch = epoch;
            throw TrainingDiverged("training diverged: every batch of epoch " + std::to_string(epoch) +
                                       " produced a non-finite loss",
                                   net, report);
        }
        const double k = static_cast<double>(finite);
        row.train.neg_ll /= k;
        row.train.rank /= k;
        row.train.clean_combined /= k;
        row.train.certified_upper /= k;
        row.train.total /= k;

        row.val_loss = cfg.monitor_certified ? certified_upper_loss(net, val, eps, val_w, cfg.sigma)
                                             : combined_loss(net, val, val_w, cfg.sigma);
        report.rows.push_back(row);
        report.stop_epoch = epoch;

        // Selection starts only once the schedule has reached eps_max.
        if (epoch >= cfg.warmup_epochs + cfg.ramp_epochs) {
            if (row.val_loss < best_val) {
                best_val = row.val_loss;
                best = net;
                report.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    if (report.best_epoch < 0) {
        // Every post-ramp validation loss was non-finite; keep the final weights.
        best = net;
        report.best_epoch = report.stop_epoch;
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(best), std::move(report)};
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    nlohmann::json j;
    j["format"] = "sawar-checkpoint";
    j["version"] = 1;
    j["dataset"] = ckpt.dataset;
    j["split_seed"] = ckpt.split_seed;
    nlohmann::json net;
    net["layer_dims"] = ckpt.net.layer_dims;
    net["leaky_slope"] = ckpt.net.leaky_slope;
    net["layers"] = nlohmann::json::array();
    for (const auto& layer : ckpt.net.layers) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
        }
        net["layers"].push_back({{"weight", w}, {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
    }
    j["network"] = net;
    j["codec"] = codec_to_json(ckpt.codec);
    j["config"] = config_to_json(ckpt.config);
    return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + ex.what());
    }
    try {
        if (j.at("format").get<std::string>() != "sawar-checkpoint") throw FormatError("not a checkpoint file");
        if (j.at("version").get<int>() != 1) throw FormatError("unsupported checkpoint version");
        Checkpoint ckpt;
        ckpt.dataset = j.at("dataset").get<std::string>();
        ckpt.split_seed = j.at("split_seed").get<std::uint64_t>();
        const auto& net = j.at("network");
        ckpt.net.layer_dims = net.at("layer_dims").get<std::vector<int>>();
        ckpt.net.leaky_slope = net.at("leaky_slope").get<double>();
        const auto& layers = net.at("layers");
        if (ckpt.net.layer_dims.size() != layers.size() + 1) throw FormatError("checkpoint layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const int in = ckpt.net.layer_dims[l];
            const int out = ckpt.net.layer_dims[l + 1];
            if (in < 1 || out < 1) throw FormatError("checkpoint layer dimensions must be positive");
            const auto w = layers[l].at("weight").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
                b.size() != static_cast<std::size_t>(out)) {
                throw FormatError("checkpoint layer " + std::to_string(l) + " has the wrong number of values");
            }
            Layer layer{Matrix(out, in), Vector(out)};
            for (int r = 0; r < out; ++r) {
                for (int c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
                layer.bias(r) = b[static_cast<std::size_t>(r)];
            }
            ckpt.net.layers.push_back(std::move(layer));
        }
        ckpt.net.validate();
        ckpt.codec = codec_from_json(j.at("codec"));
        if (ckpt.codec.dim() != ckpt.net.input_dim()) throw FormatError("checkpoint codec width does not match the network");
        ckpt.config = config_from_json(j.at("config"));
        return ckpt;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed checkpoint: ") + ex.what());
    } catch (const FormatError&) {
        throw;
    } catch (const Error& ex) {
        throw FormatError(std::string("invalid checkpoint: ") + ex.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_file_atomic(path, checkpoint_to_string(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_string(read_file(path)); }

}  // namespace sawar

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sawar/data.hpp"
#include "sawar/errors.hpp"
#include "sawar/nn.hpp"
#include "sawar/objectives.hpp"

namespace sawar {

enum class Method { baseline, noise, fgsm, pgd, sawar };

std::string method_name(Method m);
Method parse_method(const std::string& s);  // throws ConfigError

struct TrainConfig {
    Method method = Method::baseline;
    double kappa = 0.5;
    double eps_max = 0.5;
    int warmup_epochs = 10;
    int ramp_epochs = 30;
    int max_epochs = 500;
    int batch_size = 128;
    int patience = 20;
    int pgd_steps = 10;
    double sigma = 1.0;
    std::optional<double> rank_weight;  // unset: 1 / (size of the batch at hand)
    std::uint64_t seed = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool sign_step = false;
    std::vector<int> hidden = {50, 50};
    double leaky_slope = 0.01;
    bool monitor_certified = false;  // early-stop on the certified validation loss
    bool normalize_all = false;      // standardize the one-hot columns as well
    bool init_output_bias = true;    // start the output bias at the log event rate of the train split

    void validate() const;
};

/// Applies `key = value` entries (optionally under a [train] section) on top of `cfg`.
void apply_ini(TrainConfig& cfg, const std::string& path);
// Single key override; throws ConfigError for unknown keys or bad values.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

/// 0 before warmup, linear to eps_max over ramp_epochs, eps_max afterwards.
double eps_schedule(const TrainConfig& cfg, int epoch);

struct EpochRow {
    int epoch = 0;
    double eps = 0.0;
    LossBreakdown train;  // mean over the epoch's finite batches
    double val_loss = 0.0;
    int skipped_batches = 0;
};

struct TrainReport {
    std::vector<EpochRow> rows;
    int best_epoch = -1;
    int stop_epoch = -1;
    double wall_seconds = 0.0;

    // Columns: epoch,eps,neg_ll,rank,clean_combined,certified_upper,total,val_loss,skipped,selected.
    std::string to_csv() const;
};

struct TrainResult {
    Network net;
    TrainReport report;
};

/// Raised when every batch of an epoch is non-finite; carries the last good network.
class TrainingDiverged : public DivergenceError {
public:
    TrainingDiverged(const std::string& what, Network last_good, TrainReport report)
        : DivergenceError(what), last_good(std::move(last_good)), report(std::move(report)) {}
    Network last_good;
    TrainReport report;
};

TrainResult train(const TrainConfig& cfg, const SplitDataset& split);

// Batch loss and gradient for one method at one epoch; exposed for tests.
SawarGrad method_loss_grad(const TrainConfig& cfg, const Network& net, const Batch& batch, double eps,
                           std::uint64_t noise_seed);

Batch batch_from(const SurvivalDataset& ds, const std::vector<std::size_t>& positions);
Batch full_batch(const SurvivalDataset& ds);

struct Checkpoint {
    Network net;
    FeatureCodec codec;
    TrainConfig config;
    std::uint64_t split_seed = 0;
    std::string dataset;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // throws FormatError

}  // namespace sawar

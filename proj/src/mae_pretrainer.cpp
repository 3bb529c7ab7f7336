#include <algorithm>
#include <cmath>
#include <numeric>

#include "crisisvit/mae.hpp"

namespace crisisvit {

std::vector<int> MaskPlan::visible_indices() const {
    std::vector<char> flags = mask_flags();
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(total_patches) - masked_indices.size());
    for (int i = 0; i < total_patches; ++i)
        if (!flags[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

std::vector<char> MaskPlan::mask_flags() const {
    std::vector<char> flags(static_cast<std::size_t>(total_patches), 0);
    for (int i : masked_indices) flags[static_cast<std::size_t>(i)] = 1;
    return flags;
}

MaskPlan sample_mask(int total_patches, double mask_ratio, std::uint64_t seed) {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
        throw ConfigError("mask_ratio: " + std::to_string(mask_ratio) + " is outside (0, 1)");
    if (total_patches < 1) throw ConfigError("total_patches: must be >= 1");

    const auto count = static_cast<int>(std::lround(mask_ratio * total_patches));
    std::vector<int> order(static_cast<std::size_t>(total_patches));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    // partial Fisher-Yates: the first `count` slots are a uniform draw
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, total_patches - 1);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    }
    MaskPlan plan;
    plan.total_patches = total_patches;
    plan.mask_ratio = mask_ratio;
    plan.masked_indices.assign(order.begin(), order.begin() + count);
    std::sort(plan.masked_indices.begin(), plan.masked_indices.end());
    return plan;
}

void SslTrainConfig::validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("ssl.mask_ratio: must be in (0, 1)");
    if (epochs < 1) throw ConfigError("ssl.epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("ssl.batch_size: must be >= 1");
    if (optimizer != "adam") throw ConfigError("ssl.optimizer: only adam is supported");
    if (!(learning_rate > 0)) throw ConfigError("ssl.learning_rate: must be positive");
    if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw ConfigError("ssl.warmup_fraction: must be in [0, 1)");
    if (weight_decay < 0) throw ConfigError("ssl.weight_decay: must be >= 0");
    if (decoder_depth < 1) throw ConfigError("ssl.decoder_depth: must be >= 1");
    if (decoder_heads < 1 || decoder_dim % decoder_heads != 0)
        throw ConfigError("ssl.decoder_dim: must be divisible by ssl.decoder_heads");
    if (max_steps < 0) throw ConfigError("ssl.max_steps: must be >= 0");
}

void to_json(nlohmann::json& j, const SslTrainConfig& c) {
    j = nlohmann::json{{"mask_ratio", c.mask_ratio},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"optimizer", c.optimizer},
                       {"learning_rate", c.learning_rate},
                       {"warmup_fraction", c.warmup_fraction},
                       {"weight_decay", c.weight_decay},
                       {"seed", c.seed},
                       {"decoder_depth", c.decoder_depth},
                       {"decoder_dim", c.decoder_dim},
                       {"decoder_heads", c.decoder_heads},
                       {"max_steps", c.max_steps},
                       {"max_decode_failure_fraction", c.max_decode_failure_fraction},
                       {"dataset", c.dataset}};
}

void from_json(const nlohmann::json& j, SslTrainConfig& c) {
    const SslTrainConfig d;
    c.mask_ratio = j.value("mask_ratio", d.mask_ratio);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.optimizer = j.value("optimizer", d.optimizer);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.warmup_fraction = j.value("warmup_fraction", d.warmup_fraction);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.seed = j.value("seed", d.seed);
    c.decoder_depth = j.value("decoder_depth", d.decoder_depth);
    c.decoder_dim = j.value("decoder_dim", d.decoder_dim);
    c.decoder_heads = j.value("decoder_heads", d.decoder_heads);
    c.max_steps = j.value("max_steps", d.max_steps);
    c.max_decode_failure_fraction = j.value("max_decode_failure_fraction", d.max_decode_failure_fraction);
    c.dataset = j.value("dataset", d.dataset);
}

Checkpoint pretrain_ssl(const SampleSet& images, const Checkpoint& base, const SslTrainConfig& config,
                        RunLedger* ledger, SslHistory* history) {
    config.validate();
    base.verify();
    if (images.empty()) throw DataError("self-supervised split is empty");
    const ModelConfig model = base.config;

    std::vector<Matrix<float>> patches;
    patches.reserve(images.size());
    for (const auto& s : images) {
        if (s.split == kSplitTest) throw IntegrityError("test-split image " + s.id + " offered to pre-training");
        if (s.pixels.rows() != model.channels || s.pixels.cols() != model.image_size * model.image_size)
            throw DimensionError("image " + s.id + " does not match the model input shape");
        patches.push_back(patchify(s.pixels, model.image_size, model.patch_size));
    }

    ParameterTree<float> params = base.params;
    params.erase("head.weight");
    params.erase("head.bias");
    add_mae_decoder(params, model, config, derive_seed(config.seed, "mae"));
    ModelConfig encoder_config = model;
    encoder_config.num_classes = 0;
    const StackShape dec = decoder_stack(model, config);

    const long n = static_cast<long>(images.size());
    const long batch = std::min<long>(config.batch_size, n);
    const long steps_per_epoch = (n + batch - 1) / batch;
    long total_steps = steps_per_epoch * config.epochs;
    if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);

    TrainSchedule schedule;
    schedule.learning_rate = config.learning_rate;
    schedule.warmup_fraction = config.warmup_fraction;
    schedule.weight_decay = config.weight_decay;

    Adam<float> adam;
    ParameterTree<float> grads = params.zeros_like();
    std::vector<long> order(static_cast<std::size_t>(n));
    SslHistory local;
    long step = 0;
    int epochs_run = 0;
    const std::uint64_t mask_seed = derive_seed(config.seed, "mask");

    for (int epoch = 0; epoch < config.epochs && step < total_steps; ++epoch) {
        std::iota(order.begin(), order.end(), 0L);
        Rng shuffle(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle);

        double epoch_loss = 0;
        long epoch_items = 0;
        for (long start = 0; start < n && step < total_steps; start += batch, ++step) {
            const long end = std::min(n, start + batch);
            const float scale = 1.0f / static_cast<float>(end - start);
            grads.set_zero();
            for (long k = start; k < end; ++k) {
                const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
                const MaskPlan plan = sample_mask(model.num_patches(), config.mask_ratio,
                                                  derive_seed(mask_seed, static_cast<std::uint64_t>(step * batch + (k - start))));
                epoch_loss += mae_loss(params, encoder_config, dec, patches[idx], plan, &grads, scale);
                ++epoch_items;
            }
            adam.step(params, grads, schedule.rate_at(step, total_steps), schedule.weight_decay);
        }
        const double mean = epoch_loss / static_cast<double>(epoch_items);
        local.epoch_loss.push_back(mean);
        ++epochs_run;
        if (!std::isfinite(mean)) throw TrainingError("self-supervised loss diverged at epoch " + std::to_string(epoch));
        if (ledger) ledger->metric("ssl", epoch, step, mean, {{"dataset", config.dataset}});
    }
    local.steps = step;

    Checkpoint out;
    out.config = encoder_config;
    out.normalization = base.normalization;
    out.provenance = base.provenance;
    for (auto& [name, a] : params)
        if (!is_mae_parameter(name)) out.params.set(name, a);
    nlohmann::json details = {{"mask_ratio", config.mask_ratio},
                              {"batch_size", config.batch_size},
                              {"steps", step},
                              {"decoder_depth", config.decoder_depth},
                              {"decoder_dim", config.decoder_dim},
                              {"final_loss", local.epoch_loss.back()},
                              {"normalization", base.normalization}};
    out.append_stage(StageRecord{config.dataset, "self-supervised", epochs_run, config.seed, details});
    out.verify();
    if (history) *history = std::move(local);
    return out;
}

Checkpoint pretrain_ssl(const SampleSet& images, const ModelConfig& model, const SslTrainConfig& config,
                        const Normalization& norm, RunLedger* ledger, SslHistory* history) {
    config.validate();
    ModelConfig encoder = model;
    encoder.num_classes = 0;
    return pretrain_ssl(images, make_checkpoint<float>(encoder, derive_seed(config.seed, "init"), norm), config, ledger,
                        history);
}

}  // namespace crisisvit

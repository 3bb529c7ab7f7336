#include "crisisvit/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crisisvit/errors.hpp"
#include "crisisvit/rng.hpp"
#include "crisisvit/vit.hpp"

namespace crisisvit {

namespace {

ImagePlanes<float> augment(const ImagePlanes<float>& in, int size, const ClassifierTrainConfig& c, Rng& rng) {
    const bool flip = c.augment_flip && (rng() & 1u);
    int dx = 0, dy = 0;
    if (c.augment_shift > 0) {
        std::uniform_int_distribution<int> shift(-c.augment_shift, c.augment_shift);
        dx = shift(rng);
        dy = shift(rng);
    }
    if (!flip && dx == 0 && dy == 0) return in;
    ImagePlanes<float> out = ImagePlanes<float>::Zero(in.rows(), in.cols());
    for (int y = 0; y < size; ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= size) continue;
        for (int x = 0; x < size; ++x) {
            int sx = x - dx;
            if (sx < 0 || sx >= size) continue;
            if (flip) sx = size - 1 - sx;
            out.col(y * size + x) = in.col(sy * size + sx);
        }
    }
    return out;
}

void check_shape(const Sample& s, const ModelConfig& c) {
    if (s.pixels.rows() != c.channels || s.pixels.cols() != c.image_size * c.image_size)
        throw DimensionError("image " + s.id + " does not match the model input shape");
}

}  // namespace

ImageIndex index_samples(const SampleSet& samples) {
    ImageIndex index;
    index.reserve(samples.size());
    for (const auto& s : samples)
        if (!index.emplace(s.id, &s).second) throw DataError("duplicate image id " + s.id);
    return index;
}

void ClassifierTrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (augment_shift < 0) throw ConfigError("augment_shift: must be >= 0");
    schedule.validate();
}

void attach_head(Checkpoint& ckpt, int num_classes, std::uint64_t seed) {
    ckpt.params.erase("head.weight");
    ckpt.params.erase("head.bias");
    ckpt.config.num_classes = num_classes;
    if (num_classes > 0) add_head(ckpt.params, ckpt.config.hidden_dim, num_classes, seed);
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) throw DimensionError("accuracy: label and prediction counts differ");
    if (truth.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::vector<int> predict(const Checkpoint& ckpt, const std::vector<const Sample*>& samples) {
    if (ckpt.config.headless()) throw UsageError("checkpoint is headless; attach a head before predicting");
    std::vector<int> out;
    out.reserve(samples.size());
    EncoderCache<float> cache;
    const auto& c = ckpt.config;
    for (const Sample* s : samples) {
        check_shape(*s, c);
        Matrix<float> tokens = encode_patches(ckpt.params, c, patchify(s->pixels, c.image_size, c.patch_size), nullptr, cache);
        Matrix<float> logits = layers::linear(Matrix<float>(tokens.topRows(1)), ckpt.params.at("head.weight"),
                                              ckpt.params.at("head.bias"));
        Eigen::Index arg = 0;
        logits.row(0).maxCoeff(&arg);
        out.push_back(static_cast<int>(arg));
    }
    return out;
}

std::vector<int> predict(const Checkpoint& ckpt, const std::vector<LabeledView>& views) {
    std::vector<const Sample*> samples;
    samples.reserve(views.size());
    for (const auto& v : views) samples.push_back(v.sample);
    return predict(ckpt, samples);
}

void train_classifier(Checkpoint& ckpt, const std::vector<LabeledView>& train, const std::vector<LabeledView>& heldout,
                      const ClassifierTrainConfig& config, RunLedger* ledger, TrainHistory* history) {
    config.validate();
    ckpt.verify();
    const ModelConfig& c = ckpt.config;
    if (c.headless()) throw UsageError("model is headless; attach a head before training a classifier");
    if (train.empty()) throw DataError(config.stage + ": training set is empty");
    for (const auto& v : train) {
        if (v.split != kSplitTrain || v.sample->split != kSplitTrain)
            throw IntegrityError(config.stage + ": image " + v.sample->id + " tagged '" + v.split +
                                 "' offered as a training example");
        if (v.label < 0 || v.label >= c.num_classes)
            throw IntegrityError(config.stage + ": label " + std::to_string(v.label) + " of " + v.sample->id +
                                 " is outside the head width " + std::to_string(c.num_classes));
        check_shape(*v.sample, c);
    }
    std::vector<int> heldout_truth;
    for (const auto& v : heldout) {
        if (v.split == kSplitTest || v.sample->split == kSplitTest)
            throw IntegrityError(config.stage + ": test image " + v.sample->id + " offered for model selection");
        heldout_truth.push_back(v.label);
    }

    const bool augmenting = config.augment_flip || config.augment_shift > 0;
    std::vector<Matrix<float>> patches;
    if (!augmenting)
        for (const auto& v : train) patches.push_back(patchify(v.sample->pixels, c.image_size, c.patch_size));

    const long n = static_cast<long>(train.size());
    const long batch = std::min<long>(config.batch_size, n);
    const long total_steps = (n + batch - 1) / batch * config.epochs;
    Adam<float> adam;
    ParameterTree<float> grads = ckpt.params.zeros_like();
    std::vector<long> order(static_cast<std::size_t>(n));
    Rng aug_rng(derive_seed(config.seed, "augment"));
    TrainHistory local;
    ParameterTree<float> best;
    long step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0L);
        Rng shuffle(derive_seed(derive_seed(config.seed, "shuffle"), static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle);

        double loss_sum = 0;
        long correct = 0;
        for (long start = 0; start < n; start += batch, ++step) {
            const long end = std::min(n, start + batch);
            std::vector<Matrix<float>> augmented;
            std::vector<const Matrix<float>*> sets;
            std::vector<int> labels;
            for (long k = start; k < end; ++k) {
                const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
                labels.push_back(train[idx].label);
                if (augmenting)
                    augmented.push_back(patchify(augment(train[idx].sample->pixels, c.image_size, config, aug_rng),
                                                 c.image_size, c.patch_size));
                else
                    sets.push_back(&patches[idx]);
            }
            for (const auto& m : augmented) sets.push_back(&m);

            grads.set_zero();
            Matrix<float> logits;
            const float loss = classification_loss(ckpt.params, c, sets, labels,
                                                   static_cast<float>(config.schedule.label_smoothing), &grads, &logits);
            if (!std::isfinite(loss))
                throw TrainingError(config.stage + ": loss diverged at epoch " + std::to_string(epoch));
            if (step == 0) local.first_batch_loss = loss;
            loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
            for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                Eigen::Index arg = 0;
                logits.row(i).maxCoeff(&arg);
                correct += arg == labels[static_cast<std::size_t>(i)] ? 1 : 0;
            }
            clip_global_norm(grads, config.schedule.grad_clip);
            adam.step(ckpt.params, grads, config.schedule.rate_at(step, total_steps), config.schedule.weight_decay);
        }

        EpochStats stats{epoch, step, loss_sum / static_cast<double>(n),
                         static_cast<double>(correct) / static_cast<double>(n), -1};
        if (!heldout.empty()) {
            stats.heldout_accuracy = accuracy(heldout_truth, predict(ckpt, heldout));
            if (stats.heldout_accuracy > local.best_heldout_accuracy) {
                local.best_heldout_accuracy = stats.heldout_accuracy;
                local.best_epoch = epoch;
                if (config.keep_best) best = ckpt.params;
            }
        }
        local.epochs.push_back(stats);
        if (ledger) {
            nlohmann::json extra = {{"train_accuracy", stats.train_accuracy}};
            if (stats.heldout_accuracy >= 0) extra["heldout_accuracy"] = stats.heldout_accuracy;
            ledger->metric(config.stage, epoch, step, stats.train_loss, extra);
        }
    }
    if (config.keep_best && local.best_epoch >= 0) ckpt.params = std::move(best);
    local.steps = step;
    if (history) *history = std::move(local);
}

}  // namespace crisisvit

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "crisisvit/checkpoint.hpp"
#include "crisisvit/dataset.hpp"
#include "crisisvit/optim.hpp"
#include "crisisvit/run_ledger.hpp"

namespace crisisvit {

/// Samples by id. Pointers stay valid only while the owning SampleSet does.
using ImageIndex = std::unordered_map<std::string, const Sample*>;

ImageIndex index_samples(const SampleSet& samples);

/// A sample viewed under a task-specific label and split tag.
struct LabeledView {
    const Sample* sample = nullptr;
    int label = -1;
    std::string split = kSplitTrain;
};

struct ClassifierTrainConfig {
    std::string stage = "supervised";  // ledger tag
    int epochs = 10;
    int batch_size = 128;
    TrainSchedule schedule;
    std::uint64_t seed = 0;
    bool augment_flip = false;
    int augment_shift = 0;  // max random translation in pixels, zero fill
    bool keep_best = false; // return the parameters of the best held-out epoch

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    long step = 0;
    double train_loss = 0;
    double train_accuracy = 0;     // running, from the logits seen during the epoch
    double heldout_accuracy = -1;  // -1 without a held-out set
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    double first_batch_loss = std::numeric_limits<double>::quiet_NaN();
    long steps = 0;
    int best_epoch = -1;
    double best_heldout_accuracy = -1;
};

/// Trains every parameter of `ckpt` (whose head must already match the label
/// space) on `train`. Every training view must carry the train split tag and
/// no held-out view may carry the test tag; either violation throws
/// IntegrityError before any update.
void train_classifier(Checkpoint& ckpt, const std::vector<LabeledView>& train, const std::vector<LabeledView>& heldout,
                      const ClassifierTrainConfig& config, RunLedger* ledger = nullptr, TrainHistory* history = nullptr);

/// Arg-max class per view, computed without any stochastic transform.
std::vector<int> predict(const Checkpoint& ckpt, const std::vector<LabeledView>& views);
std::vector<int> predict(const Checkpoint& ckpt, const std::vector<const Sample*>& samples);

double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

/// In-place head swap without a provenance record; used between stages of a
/// single training run.
void attach_head(Checkpoint& ckpt, int num_classes, std::uint64_t seed);

}  // namespace crisisvit

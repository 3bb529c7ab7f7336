#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crisisvit/label_resolution.hpp"
#include "crisisvit/mae.hpp"
#include "crisisvit/train.hpp"

namespace crisisvit {

enum class StrategyKind { binary_sequential, multiclass_incident, multiclass_places, multiclass_joint };

std::string to_string(StrategyKind k);
StrategyKind strategy_kind_from_string(const std::string& s);  // ConfigError on unknown

/// Vocabulary name the strategy trains against: incident, place or joint.
std::string vocabulary_scope(StrategyKind k);

struct PretrainStrategy {
    StrategyKind kind = StrategyKind::multiclass_joint;
    int epochs = 10;
    int batch_size = 128;
    TrainSchedule schedule;
    std::uint64_t seed = 0;
    double holdout_fraction = 0.05;
    double negative_ratio = 1.0;  // binary_sequential only
    std::string dataset = "incidents1m";

    void validate() const;
};

void to_json(nlohmann::json& j, const PretrainStrategy& s);
void from_json(const nlohmann::json& j, PretrainStrategy& s);

/// Train on the first-listed-label examples of one vocabulary. The head is
/// resized to the vocabulary at entry; entries whose image is absent from
/// `images` are skipped and counted. A deterministic holdout (by entry id)
/// supplies the per-epoch held-out accuracy.
Checkpoint pretrain_multiclass(const Checkpoint& base, const ImageIndex& images,
                               const std::vector<ResolvedExample>& examples, const LabelVocabulary& vocabulary,
                               const PretrainStrategy& strategy, RunLedger* ledger = nullptr,
                               TrainHistory* history = nullptr);

/// One trained class of a binary sequence.
struct BinaryStageLog {
    std::string class_name;
    bool skipped = false;
    std::size_t examples = 0;
    double final_loss = 0;
    std::string encoder_digest;
};

/// All one-vs-rest tasks in joint order (incident classes, then places).
std::vector<BinaryTask> make_binary_tasks(const std::vector<DatasetManifestEntry>& entries,
                                          const LabelVocabulary& incident, const LabelVocabulary& place,
                                          double negative_ratio, std::uint64_t seed);

/// Trains a 2-way head for each class of `tasks` in order, carrying the
/// encoder across classes. `tasks` must follow the joint order of the two
/// vocabularies. Returns a headless encoder.
Checkpoint pretrain_binary_sequential(const Checkpoint& base, const LabelVocabulary& incident,
                                      const LabelVocabulary& place, const std::vector<BinaryTask>& tasks,
                                      const ImageIndex& images, const PretrainStrategy& strategy,
                                      RunLedger* ledger = nullptr, std::vector<BinaryStageLog>* log = nullptr);

/// Digest over the encoder parameters only.
std::string encoder_digest(const Checkpoint& ckpt);

/// One entry of a pre-training pipeline.
struct StageSpec {
    enum class Kind { external, ssl, supervised };
    Kind kind = Kind::supervised;
    std::filesystem::path checkpoint;  // external
    SslTrainConfig ssl;
    PretrainStrategy supervised;
};

/// What the stages read. Pointers may be null for stage kinds that are unused.
struct StageInputs {
    const SampleSet* images = nullptr;  // decoded Incidents1M images
    const std::vector<DatasetManifestEntry>* entries = nullptr;
    const LabelVocabulary* incident = nullptr;
    const LabelVocabulary* place = nullptr;
};

/// Executes one stage on `current`. An external stage replaces `current`
/// with the loaded checkpoint after checking its encoder matches.
Checkpoint run_stage(const Checkpoint& current, const StageSpec& stage, const StageInputs& inputs,
                     RunLedger* ledger = nullptr);

/// Runs `stages` in order from a fresh encoder of `model`. Provenance is the
/// concatenation of the stage records. `after_stage` sees each intermediate.
Checkpoint compose_stages(const ModelConfig& model, std::uint64_t init_seed, const Normalization& norm,
                          const std::vector<StageSpec>& stages, const StageInputs& inputs,
                          RunLedger* ledger = nullptr,
                          const std::function<void(std::size_t, const Checkpoint&)>& after_stage = {});

}  // namespace crisisvit

#include "crisisvit/pretrain.hpp"

#include <cstring>

#include "crisisvit/digest.hpp"
#include "crisisvit/errors.hpp"
#include "crisisvit/rng.hpp"
#include "crisisvit/vit.hpp"

namespace crisisvit {

std::string to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::binary_sequential: return "binary_sequential";
        case StrategyKind::multiclass_incident: return "multiclass_incident";
        case StrategyKind::multiclass_places: return "multiclass_places";
        case StrategyKind::multiclass_joint: return "multiclass_joint";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
    for (auto k : {StrategyKind::binary_sequential, StrategyKind::multiclass_incident, StrategyKind::multiclass_places,
                   StrategyKind::multiclass_joint})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown strategy kind '" + s +
                      "' (expected binary_sequential, multiclass_incident, multiclass_places or multiclass_joint)");
}

std::string vocabulary_scope(StrategyKind k) {
    switch (k) {
        case StrategyKind::multiclass_incident: return "incident";
        case StrategyKind::multiclass_places: return "place";
        default: return "joint";
    }
}

void PretrainStrategy::validate() const {
    if (epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (!(holdout_fraction >= 0 && holdout_fraction < 1)) throw ConfigError("holdout_fraction: must be in [0, 1)");
    if (negative_ratio < 0) throw ConfigError("negative_ratio: must be >= 0");
    schedule.validate();
}

void to_json(nlohmann::json& j, const PretrainStrategy& s) {
    j = nlohmann::json{{"kind", to_string(s.kind)},
                       {"epochs", s.epochs},
                       {"batch_size", s.batch_size},
                       {"schedule", s.schedule},
                       {"seed", s.seed},
                       {"holdout_fraction", s.holdout_fraction},
                       {"negative_ratio", s.negative_ratio},
                       {"dataset", s.dataset}};
}

void from_json(const nlohmann::json& j, PretrainStrategy& s) {
    const PretrainStrategy d;
    s.kind = strategy_kind_from_string(j.at("kind").get<std::string>());
    s.epochs = j.value("epochs", d.epochs);
    s.batch_size = j.value("batch_size", d.batch_size);
    s.schedule = j.contains("schedule") ? j.at("schedule").get<TrainSchedule>() : d.schedule;
    s.seed = j.value("seed", d.seed);
    s.holdout_fraction = j.value("holdout_fraction", d.holdout_fraction);
    s.negative_ratio = j.value("negative_ratio", d.negative_ratio);
    s.dataset = j.value("dataset", d.dataset);
}

namespace {

ClassifierTrainConfig trainer_config(const PretrainStrategy& s, std::string stage, std::uint64_t seed) {
    ClassifierTrainConfig c;
    c.stage = std::move(stage);
    c.epochs = s.epochs;
    c.batch_size = s.batch_size;
    c.schedule = s.schedule;
    c.seed = seed;
    return c;
}

}  // namespace

std::string encoder_digest(const Checkpoint& ckpt) {
    std::string bytes;
    for (const auto& [name, a] : ckpt.params) {
        if (is_head_parameter(name)) continue;
        bytes += name;
        bytes.append(reinterpret_cast<const char*>(a.data()), static_cast<std::size_t>(a.size()) * sizeof(float));
    }
    return short_digest(bytes);
}

Checkpoint pretrain_multiclass(const Checkpoint& base, const ImageIndex& images,
                               const std::vector<ResolvedExample>& examples, const LabelVocabulary& vocabulary,
                               const PretrainStrategy& strategy, RunLedger* ledger, TrainHistory* history) {
    strategy.validate();
    base.verify();
    if (strategy.kind == StrategyKind::binary_sequential)
        throw ConfigError("pretrain_multiclass: strategy kind binary_sequential is not a multi-class variant");
    if (vocabulary.name() != vocabulary_scope(strategy.kind))
        throw ConfigError("strategy " + to_string(strategy.kind) + " trains against the " +
                          vocabulary_scope(strategy.kind) + " vocabulary, not '" + vocabulary.name() + "'");
    if (examples.empty()) throw DataError(to_string(strategy.kind) + ": no training examples");

    std::vector<LabeledView> train, heldout;
    std::size_t missing = 0;
    for (const auto& e : examples) {
        if (e.vocabulary != vocabulary.name() || e.vocabulary_version != vocabulary.version())
            throw IntegrityError("example " + e.entry_id + " was resolved against " + e.vocabulary + "@" +
                                 e.vocabulary_version + ", not " + vocabulary.name() + "@" + vocabulary.version());
        if (e.class_index < 0 || static_cast<std::size_t>(e.class_index) >= vocabulary.size())
            throw IntegrityError("example " + e.entry_id + " has class index outside the vocabulary");
        const auto it = images.find(e.entry_id);
        if (it == images.end()) {
            ++missing;
            continue;
        }
        if (is_holdout(e.entry_id, 0, strategy.holdout_fraction))
            heldout.push_back({it->second, e.class_index, kSplitValidation});
        else
            train.push_back({it->second, e.class_index, kSplitTrain});
    }
    if (train.empty()) throw DataError(to_string(strategy.kind) + ": none of the examples has a decoded image");

    Checkpoint ckpt = base;
    attach_head(ckpt, static_cast<int>(vocabulary.size()), derive_seed(strategy.seed, "head"));
    if (ckpt.config.num_classes != static_cast<int>(vocabulary.size()))
        throw IntegrityError("head width does not match the vocabulary size");

    TrainHistory local;
    train_classifier(ckpt, train, heldout, trainer_config(strategy, to_string(strategy.kind), strategy.seed), ledger,
                     &local);

    nlohmann::json details = {{"vocabulary", vocabulary.name()},
                              {"vocabulary_version", vocabulary.version()},
                              {"num_classes", vocabulary.size()},
                              {"train_examples", train.size()},
                              {"heldout_examples", heldout.size()},
                              {"missing_images", missing},
                              {"batch_size", strategy.batch_size},
                              {"schedule", strategy.schedule},
                              {"final_loss", local.epochs.back().train_loss}};
    if (local.best_epoch >= 0) details["heldout_accuracy"] = local.epochs.back().heldout_accuracy;
    ckpt.append_stage(StageRecord{strategy.dataset, to_string(strategy.kind), strategy.epochs, strategy.seed, details});
    if (history) *history = std::move(local);
    return ckpt;
}

std::vector<BinaryTask> make_binary_tasks(const std::vector<DatasetManifestEntry>& entries,
                                          const LabelVocabulary& incident, const LabelVocabulary& place,
                                          double negative_ratio, std::uint64_t seed) {
    std::vector<BinaryTask> tasks;
    const LabelVocabulary joint = joint_vocabulary(incident, place);
    for (const auto& name : joint.classes())
        tasks.push_back(make_binary_task(entries, name, incident, place, negative_ratio, seed));
    return tasks;
}

Checkpoint pretrain_binary_sequential(const Checkpoint& base, const LabelVocabulary& incident,
                                      const LabelVocabulary& place, const std::vector<BinaryTask>& tasks,
                                      const ImageIndex& images, const PretrainStrategy& strategy, RunLedger* ledger,
                                      std::vector<BinaryStageLog>* log) {
    strategy.validate();
    base.verify();
    if (strategy.kind != StrategyKind::binary_sequential)
        throw ConfigError("pretrain_binary_sequential: strategy kind is " + to_string(strategy.kind));
    const LabelVocabulary joint = joint_vocabulary(incident, place);
    if (tasks.size() != joint.size())
        throw IntegrityError("binary sequence has " + std::to_string(tasks.size()) + " tasks for " +
                             std::to_string(joint.size()) + " classes");
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].class_name != joint[i])
            throw IntegrityError("binary task " + std::to_string(i) + " is '" + tasks[i].class_name + "', expected '" +
                                 joint[i] + "'");

    Checkpoint ckpt = base;
    std::vector<BinaryStageLog> local;
    nlohmann::json sequence = nlohmann::json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& task = tasks[i];
        BinaryStageLog entry{task.class_name, task.skipped, 0, 0, {}};
        std::vector<LabeledView> views;
        if (!task.skipped) {
            for (const auto& id : task.positives)
                if (auto it = images.find(id); it != images.end()) views.push_back({it->second, 1, kSplitTrain});
            for (const auto& id : task.negatives)
                if (auto it = images.find(id); it != images.end()) views.push_back({it->second, 0, kSplitTrain});
        }
        if (views.empty()) {
            entry.skipped = true;
            if (ledger)
                ledger->append({{"type", "warning"},
                                {"stage", "binary:" + task.class_name},
                                {"message", task.warning.empty() ? "no decoded images; class skipped" : task.warning}});
        } else {
            attach_head(ckpt, 2, derive_seed(strategy.seed, "head:" + task.class_name));
            TrainHistory h;
            train_classifier(ckpt, views, {},
                             trainer_config(strategy, "binary:" + task.class_name,
                                            derive_seed(strategy.seed, static_cast<std::uint64_t>(i))),
                             ledger, &h);
            entry.examples = views.size();
            entry.final_loss = h.epochs.back().train_loss;
        }
        entry.encoder_digest = encoder_digest(ckpt);
        sequence.push_back({{"class", entry.class_name}, {"skipped", entry.skipped}, {"examples", entry.examples}});
        local.push_back(std::move(entry));
    }
    attach_head(ckpt, 0, 0);
    ckpt.append_stage(StageRecord{strategy.dataset,
                                  to_string(strategy.kind),
                                  strategy.epochs,
                                  strategy.seed,
                                  {{"vocabulary", joint.name()},
                                   {"vocabulary_version", joint.version()},
                                   {"negative_ratio", strategy.negative_ratio},
                                   {"batch_size", strategy.batch_size},
                                   {"schedule", strategy.schedule},
                                   {"sequence", sequence}}});
    if (log) *log = std::move(local);
    return ckpt;
}

Checkpoint run_stage(const Checkpoint& current, const StageSpec& stage, const StageInputs& inputs, RunLedger* ledger) {
    switch (stage.kind) {
        case StageSpec::Kind::external: {
            Checkpoint loaded = load_checkpoint<float>(stage.checkpoint);
            if (!loaded.config.same_encoder(current.config))
                throw ConfigError("external checkpoint " + stage.checkpoint.string() +
                                  " has an encoder configuration incompatible with the experiment model");
            return loaded;
        }
        case StageSpec::Kind::ssl: {
            if (!inputs.images) throw DataError("self-supervised stage needs decoded images");
            return pretrain_ssl(*inputs.images, current, stage.ssl, ledger);
        }
        case StageSpec::Kind::supervised: {
            if (!inputs.images || !inputs.entries || !inputs.incident || !inputs.place)
                throw DataError("supervised stage needs decoded images, manifest entries and both vocabularies");
            const ImageIndex index = index_samples(*inputs.images);
            const auto& s = stage.supervised;
            if (s.kind == StrategyKind::binary_sequential)
                return pretrain_binary_sequential(
                    current, *inputs.incident, *inputs.place,
                    make_binary_tasks(*inputs.entries, *inputs.incident, *inputs.place, s.negative_ratio, s.seed),
                    index, s, ledger);
            const std::string scope = vocabulary_scope(s.kind);
            const LabelVocabulary vocab = scope == "incident" ? *inputs.incident
                                          : scope == "place"  ? *inputs.place
                                                              : joint_vocabulary(*inputs.incident, *inputs.place);
            return pretrain_multiclass(current, index, resolve_single_label(*inputs.entries, vocab), vocab, s, ledger);
        }
    }
    throw ConfigError("unknown stage kind");
}

Checkpoint compose_stages(const ModelConfig& model, std::uint64_t init_seed, const Normalization& norm,
                          const std::vector<StageSpec>& stages, const StageInputs& inputs, RunLedger* ledger,
                          const std::function<void(std::size_t, const Checkpoint&)>& after_stage) {
    if (stages.empty()) throw ConfigError("stages: at least one stage is required");
    for (std::size_t i = 1; i < stages.size(); ++i)
        if (stages[i].kind == StageSpec::Kind::external)
            throw ConfigError("stages[" + std::to_string(i) + "].kind: an external checkpoint can only be the first stage");
    ModelConfig encoder = model;
    encoder.num_classes = 0;
    Checkpoint ckpt = make_checkpoint<float>(encoder, init_seed, norm);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        ckpt = run_stage(ckpt, stages[i], inputs, ledger);
        if (after_stage) after_stage(i, ckpt);
    }
    return ckpt;
}

}  // namespace crisisvit

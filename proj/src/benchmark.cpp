#include "crisisvit/benchmark.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "crisisvit/errors.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit {

std::string to_string(TaskId t) {
    switch (t) {
        case TaskId::disaster_types: return "disaster_types";
        case TaskId::informativeness: return "informativeness";
        case TaskId::humanitarian: return "humanitarian";
        case TaskId::damage_severity: return "damage_severity";
    }
    return "?";
}

TaskId task_id_from_string(const std::string& s) {
    for (auto t : kAllTasks)
        if (to_string(t) == s) return t;
    throw ConfigError("unknown task '" + s + "' (expected disaster_types, informativeness, humanitarian or damage_severity)");
}

std::size_t expected_class_count(TaskId t) {
    switch (t) {
        case TaskId::disaster_types: return 7;
        case TaskId::informativeness: return 2;
        case TaskId::humanitarian: return 4;
        case TaskId::damage_severity: return 3;
    }
    return 0;
}

LabelVocabulary task_vocabulary(TaskId t, const std::filesystem::path& dir) {
    return load_vocabulary(dir / (to_string(t) + ".txt"), to_string(t), expected_class_count(t));
}

const std::vector<BenchmarkExample>& TaskData::split(const std::string& name) const {
    if (name == kSplitTrain) return train;
    if (name == kSplitValidation) return validation;
    if (name == kSplitTest) return test;
    throw ConfigError("unknown split '" + name + "'");
}

const SampleSet& DecodedTask::split(const std::string& name) const {
    if (name == kSplitTrain) return train;
    if (name == kSplitValidation) return validation;
    if (name == kSplitTest) return test;
    throw ConfigError("unknown split '" + name + "'");
}

nlohmann::json BenchmarkReport::to_json() const {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& c : counts)
        tasks.push_back({{"task", c.task}, {"train", c.train}, {"validation", c.validation}, {"test", c.test}});
    return {{"tasks", tasks}, {"violations", violations}};
}

const TaskData& Benchmark::task(TaskId t) const {
    for (const auto& d : tasks)
        if (d.spec.id == t) return d;
    throw DataError("benchmark has no task " + to_string(t));
}

void Benchmark::require_clean() const {
    if (report.ok()) return;
    std::string msg = "benchmark integrity violations:";
    for (const auto& v : report.violations) msg += "\n  " + v;
    throw IntegrityError(msg);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) out.push_back(field);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

std::vector<BenchmarkExample> read_split(const std::filesystem::path& path, const TaskSpec& spec,
                                         const std::string& split) {
    const std::string where = to_string(spec.id) + "/" + split;
    std::ifstream in(path);
    if (!in) throw DataError("benchmark task " + to_string(spec.id) + " is missing its " + split + " split (" +
                             path.string() + ")");
    std::string line;
    if (!std::getline(in, line)) throw DataError(where + ": split file has no header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_tabs(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw DataError(where + ": header lacks column '" + name + "'");
    };
    const std::size_t c_id = column("image_id"), c_path = column("image_path"), c_label = column("class_label");

    std::vector<BenchmarkExample> out;
    std::set<std::string> seen;
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const std::string at = where + " line " + std::to_string(lineno);
        if (f.size() < header.size()) throw DataError(at + ": expected " + std::to_string(header.size()) + " columns");
        const auto label = spec.classes.index_of(f[c_label]);
        if (!label) throw DataError(at + ": unknown class '" + f[c_label] + "'");
        if (!seen.insert(f[c_id]).second) throw DataError(at + ": duplicate image_id " + f[c_id]);
        out.push_back({f[c_id], path.parent_path() / f[c_path], *label});
    }
    return out;
}

}  // namespace

Benchmark load_benchmark(const std::filesystem::path& root, const std::filesystem::path& vocabulary_dir) {
    if (!std::filesystem::is_directory(root)) throw DataError("benchmark directory not found: " + root.string());
    Benchmark b;
    for (TaskId id : kAllTasks) {
        TaskData d;
        d.spec.id = id;
        d.spec.classes = task_vocabulary(id, vocabulary_dir);
        const auto dir = root / to_string(id);
        d.spec.train = dir / "train.tsv";
        d.spec.validation = dir / "validation.tsv";
        d.spec.test = dir / "test.tsv";
        d.train = read_split(d.spec.train, d.spec, kSplitTrain);
        d.validation = read_split(d.spec.validation, d.spec, kSplitValidation);
        d.test = read_split(d.spec.test, d.spec, kSplitTest);
        if (d.test.empty()) throw DataError("benchmark task " + to_string(id) + " has an empty test split");

        std::map<std::string, std::string> owner;
        for (const char* split : {kSplitTrain, kSplitValidation, kSplitTest})
            for (const auto& e : d.split(split)) {
                auto [it, fresh] = owner.emplace(e.image_id, split);
                if (!fresh)
                    b.report.violations.push_back(to_string(id) + ": image " + e.image_id + " appears in both " +
                                                  it->second + " and " + split);
            }
        b.report.counts.push_back({to_string(id), d.train.size(), d.validation.size(), d.test.size()});
        b.tasks.push_back(std::move(d));
    }
    return b;
}

DecodedTask decode_task(const TaskData& task, int image_size, const Normalization& norm) {
    DecodedTask out;
    out.spec = task.spec;
    for (const char* split : {kSplitTrain, kSplitValidation, kSplitTest}) {
        SampleSet& dst = split == std::string(kSplitTrain)        ? out.train
                         : split == std::string(kSplitValidation) ? out.validation
                                                                  : out.test;
        for (const auto& e : task.split(split)) {
            Sample s;
            s.id = e.image_id;
            s.label = e.label;
            s.split = split;
            try {
                s.pixels = load_image(e.image_path, image_size, norm);
            } catch (const DataError& err) {
                throw DataError(to_string(task.spec.id) + "/" + split + ": " + err.what());
            }
            dst.push_back(std::move(s));
        }
    }
    return out;
}

void FinetuneConfig::validate() const {
    if (epochs < 1) throw ConfigError("finetune.epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("finetune.batch_size: must be >= 1");
    if (augment_shift < 0) throw ConfigError("finetune.augment_shift: must be >= 0");
    schedule.validate();
}

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"schedule", c.schedule},
                       {"augment_flip", c.augment_flip},
                       {"augment_shift", c.augment_shift}};
}

void from_json(const nlohmann::json& j, FinetuneConfig& c) {
    const FinetuneConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.schedule = d.schedule;
    if (j.contains("schedule")) {
        nlohmann::json merged = d.schedule;
        merged.update(j.at("schedule"));
        c.schedule = merged.get<TrainSchedule>();
    }
    c.augment_flip = j.value("augment_flip", d.augment_flip);
    c.augment_shift = j.value("augment_shift", d.augment_shift);
}

double RunResult::recompute_accuracy() const {
    if (predictions.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& p : predictions) correct += p.truth == p.predicted ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

void to_json(nlohmann::json& j, const RunResult& r) {
    j = nlohmann::json{{"task", to_string(r.task)},         {"split", r.split},
                       {"seed", r.seed},                    {"provenance_digest", r.provenance_digest},
                       {"examples", r.predictions.size()},  {"accuracy", r.accuracy},
                       {"wall_time", r.wall_time}};
}

void from_json(const nlohmann::json& j, RunResult& r) {
    r.task = task_id_from_string(j.at("task").get<std::string>());
    r.split = j.at("split").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.provenance_digest = j.at("provenance_digest").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.wall_time = j.value("wall_time", 0.0);
}

void save_run_result(const RunResult& r, const std::filesystem::path& dir, const std::string& stem) {
    std::string tsv = "image_id\ttrue\tpredicted\n";
    for (const auto& p : r.predictions)
        tsv += p.image_id + '\t' + std::to_string(p.truth) + '\t' + std::to_string(p.predicted) + '\n';
    write_file_atomic(dir / (stem + ".predictions.tsv"), tsv);
    write_file_atomic(dir / (stem + ".json"), nlohmann::json(r).dump(2) + "\n");
}

RunResult load_run_result(const std::filesystem::path& json_path) {
    const auto meta = nlohmann::json::parse(read_file(json_path));
    RunResult r = meta.get<RunResult>();
    std::string stem = json_path.filename().string();
    stem = stem.substr(0, stem.size() - std::string(".json").size());
    std::istringstream in(read_file(json_path.parent_path() / (stem + ".predictions.tsv")));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 3) throw IntegrityError(json_path.string() + ": malformed prediction row '" + line + "'");
        r.predictions.push_back({f[0], std::stoi(f[1]), std::stoi(f[2])});
    }
    if (r.predictions.size() != meta.value("examples", r.predictions.size()) || r.recompute_accuracy() != r.accuracy)
        throw IntegrityError(json_path.string() + ": stored accuracy is not reproduced by its predictions");
    return r;
}

namespace {

std::vector<LabeledView> views_of(const SampleSet& samples) {
    std::vector<LabeledView> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({&s, s.label, s.split});
    return out;
}

}  // namespace

RunResult evaluate(const Checkpoint& ckpt, const DecodedTask& task, const std::string& split, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    if (ckpt.config.num_classes != static_cast<int>(task.spec.classes.size()))
        throw ConfigError("checkpoint head has " + std::to_string(ckpt.config.num_classes) + " classes but task " +
                          to_string(task.spec.id) + " has " + std::to_string(task.spec.classes.size()));
    const SampleSet& samples = task.split(split);
    std::vector<const Sample*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    const std::vector<int> predicted = predict(ckpt, ptrs);

    RunResult r;
    r.task = task.spec.id;
    r.split = split;
    r.seed = seed;
    r.provenance_digest = ckpt.provenance_digest();
    for (std::size_t i = 0; i < samples.size(); ++i) r.predictions.push_back({samples[i].id, samples[i].label, predicted[i]});
    r.accuracy = r.recompute_accuracy();
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::pair<Checkpoint, RunResult> finetune(const Checkpoint& pretrained, const DecodedTask& task,
                                          const FinetuneConfig& config, std::uint64_t seed, RunLedger* ledger) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    Checkpoint ckpt = pretrained;
    ckpt.verify();
    attach_head(ckpt, static_cast<int>(task.spec.classes.size()), derive_seed(seed, "finetune-head"));

    ClassifierTrainConfig tc;
    tc.stage = "finetune:" + to_string(task.spec.id);
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.schedule = config.schedule;
    tc.seed = seed;
    tc.augment_flip = config.augment_flip;
    tc.augment_shift = config.augment_shift;
    tc.keep_best = true;
    TrainHistory h;
    train_classifier(ckpt, views_of(task.train), views_of(task.validation), tc, ledger, &h);

    ckpt.append_stage(StageRecord{"crisis-image-benchmark/" + to_string(task.spec.id),
                                  "fine-tune",
                                  config.epochs,
                                  seed,
                                  {{"num_classes", task.spec.classes.size()},
                                   {"vocabulary_version", task.spec.classes.version()},
                                   {"best_epoch", h.best_epoch},
                                   {"batch_size", config.batch_size},
                                   {"schedule", config.schedule}}});
    RunResult validation = evaluate(ckpt, task, kSplitValidation, seed);
    validation.provenance_digest = pretrained.provenance_digest();
    validation.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(ckpt), std::move(validation)};
}

RepeatResult repeat_runs(const std::function<Checkpoint(std::size_t, std::uint64_t)>& recipe, const DecodedTask& task,
                         const FinetuneConfig& config, const std::vector<std::uint64_t>& seeds, int n_runs,
                         bool allow_fewer_runs, RunLedger* ledger) {
    if (n_runs < 1) throw ConfigError("n_runs: must be >= 1");
    if (n_runs < kMinRuns && !allow_fewer_runs)
        throw ConfigError("n_runs: every experiment is run at least " + std::to_string(kMinRuns) +
                          " times; pass the override to run fewer");
    if (seeds.size() < static_cast<std::size_t>(n_runs))
        throw ConfigError("seeds: " + std::to_string(seeds.size()) + " seeds for " + std::to_string(n_runs) + " runs");
    RepeatResult out;
    for (int i = 0; i < n_runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t seed = seeds[static_cast<std::size_t>(i)];
        const Checkpoint base = recipe(static_cast<std::size_t>(i), seed);
        auto [tuned, validation] = finetune(base, task, config, seed, ledger);
        RunResult test = evaluate(tuned, task, kSplitTest, seed);
        test.provenance_digest = base.provenance_digest();
        test.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ledger)
            ledger->append({{"type", "run_result"},
                            {"task", to_string(task.spec.id)},
                            {"seed", seed},
                            {"validation_accuracy", validation.accuracy},
                            {"test_accuracy", test.accuracy}});
        out.runs.push_back(std::move(test));
    }
    double sum = 0;
    for (const auto& r : out.runs) sum += r.accuracy;
    out.mean_accuracy = sum / static_cast<double>(out.runs.size());
    return out;
}

RepeatResult repeat_runs(const Checkpoint& pretrained, const DecodedTask& task, const FinetuneConfig& config,
                         const std::vector<std::uint64_t>& seeds, int n_runs, bool allow_fewer_runs,
                         RunLedger* ledger) {
    return repeat_runs([&](std::size_t, std::uint64_t) { return pretrained; }, task, config, seeds, n_runs,
                       allow_fewer_runs, ledger);
}

}  // namespace crisisvit

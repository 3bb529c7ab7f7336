#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "crisisvit/train.hpp"
#include "crisisvit/vocabulary.hpp"

namespace crisisvit {

enum class TaskId { disaster_types, informativeness, humanitarian, damage_severity };

inline constexpr std::array<TaskId, 4> kAllTasks = {TaskId::disaster_types, TaskId::informativeness,
                                                    TaskId::humanitarian, TaskId::damage_severity};

std::string to_string(TaskId t);
TaskId task_id_from_string(const std::string& s);  // ConfigError on unknown
std::size_t expected_class_count(TaskId t);         // 7, 2, 4, 3

/// Class list of one task, loaded from <dir>/<task>.txt; a class count other
/// than expected_class_count fails with VocabularyError.
LabelVocabulary task_vocabulary(TaskId t, const std::filesystem::path& dir = data_dir() / "vocabularies");

struct TaskSpec {
    TaskId id = TaskId::disaster_types;
    LabelVocabulary classes;
    std::filesystem::path train, validation, test;  // TSV split files
};

struct BenchmarkExample {
    std::string image_id;
    std::filesystem::path image_path;
    int label = -1;
};

struct TaskData {
    TaskSpec spec;
    std::vector<BenchmarkExample> train, validation, test;

    const std::vector<BenchmarkExample>& split(const std::string& name) const;
};

struct BenchmarkReport {
    struct Counts {
        std::string task;
        std::size_t train = 0, validation = 0, test = 0;
    };
    std::vector<Counts> counts;
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
    nlohmann::json to_json() const;
};

struct Benchmark {
    std::vector<TaskData> tasks;
    BenchmarkReport report;

    const TaskData& task(TaskId t) const;
    /// Throws IntegrityError listing every violation.
    void require_clean() const;
};

/// Reads <root>/<task>/{train,validation,test}.tsv (columns image_id,
/// image_path, class_label; image_path relative to the task directory).
/// Missing files, unknown class names and an empty test split throw
/// DataError; ids shared between splits are reported as violations.
Benchmark load_benchmark(const std::filesystem::path& root,
                         const std::filesystem::path& vocabulary_dir = data_dir() / "vocabularies");

/// A task with its images decoded; each sample carries its split tag.
struct DecodedTask {
    TaskSpec spec;
    SampleSet train, validation, test;

    const SampleSet& split(const std::string& name) const;
};

DecodedTask decode_task(const TaskData& task, int image_size, const Normalization& norm);

struct FinetuneConfig {
    int epochs = 10;
    int batch_size = 128;
    TrainSchedule schedule = [] {
        TrainSchedule s;
        s.learning_rate = 5e-5;
        return s;
    }();
    bool augment_flip = false;
    int augment_shift = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

struct Prediction {
    std::string image_id;
    int truth = -1;
    int predicted = -1;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct RunResult {
    TaskId task = TaskId::disaster_types;
    std::string split = kSplitTest;
    std::uint64_t seed = 0;
    std::string provenance_digest;  // of the checkpoint fine-tuning started from
    std::vector<Prediction> predictions;
    double accuracy = 0;
    double wall_time = 0;  // seconds

    double recompute_accuracy() const;
};

void to_json(nlohmann::json& j, const RunResult& r);
void from_json(const nlohmann::json& j, RunResult& r);

/// Writes <dir>/<stem>.json and <dir>/<stem>.predictions.tsv (image_id,
/// true, predicted).
void save_run_result(const RunResult& r, const std::filesystem::path& dir, const std::string& stem);
/// Reads both files back; a stored accuracy that the predictions do not
/// reproduce throws IntegrityError.
RunResult load_run_result(const std::filesystem::path& json_path);

/// Attaches a head for the task and trains on its train split, keeping the
/// parameters of the best validation epoch. Returns the fine-tuned checkpoint
/// and its validation result.
std::pair<Checkpoint, RunResult> finetune(const Checkpoint& pretrained, const DecodedTask& task,
                                          const FinetuneConfig& config, std::uint64_t seed,
                                          RunLedger* ledger = nullptr);

/// Predictions on one split; no stochastic transform is applied.
RunResult evaluate(const Checkpoint& ckpt, const DecodedTask& task, const std::string& split = kSplitTest,
                   std::uint64_t seed = 0);

struct RepeatResult {
    std::vector<RunResult> runs;  // test-split results, one per seed
    double mean_accuracy = 0;
};

inline constexpr int kMinRuns = 3;

/// Fine-tunes once per seed and evaluates on test. `recipe` supplies the
/// starting checkpoint for each run, so full-pipeline re-seeding is the
/// caller's choice. Fewer than kMinRuns runs require `allow_fewer_runs`.
RepeatResult repeat_runs(const std::function<Checkpoint(std::size_t run, std::uint64_t seed)>& recipe,
                         const DecodedTask& task, const FinetuneConfig& config,
                         const std::vector<std::uint64_t>& seeds, int n_runs = kMinRuns,
                         bool allow_fewer_runs = false, RunLedger* ledger = nullptr);

RepeatResult repeat_runs(const Checkpoint& pretrained, const DecodedTask& task, const FinetuneConfig& config,
                         const std::vector<std::uint64_t>& seeds, int n_runs = kMinRuns,
                         bool allow_fewer_runs = false, RunLedger* ledger = nullptr);

}  // namespace crisisvit

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crisisvit/benchmark.hpp"
#include "crisisvit/pretrain.hpp"
#include "crisisvit/report.hpp"

namespace crisisvit {

/// Bumped whenever a change alters what an unchanged experiment file produces.
inline constexpr const char* kCodeVersion = "crisisvit-1.0.0";

struct Violation {
    std::string path;  // e.g. stages[1].kind
    std::string message;
};

std::string format_violations(const std::vector<Violation>& v);

/// Every invariant of an experiment document; empty when it is valid.
std::vector<Violation> validate_experiment(const nlohmann::json& doc);

enum class Reseed { finetune, pipeline };

struct ExperimentFile {
    std::string id;
    std::string system;  // display name, defaults to id
    ModelConfig model;
    std::uint64_t init_seed = 0;
    std::optional<std::filesystem::path> external_base;
    std::filesystem::path incidents_dir;  // manifest.jsonl + store/
    std::filesystem::path benchmark_dir;
    std::vector<StageSpec> stages;
    nlohmann::json stage_documents = nlohmann::json::array();  // as written, with defaults
    FinetuneConfig finetune;
    int n_runs = kMinRuns;
    bool allow_fewer_runs = false;
    std::vector<std::uint64_t> seeds;
    Reseed reseed = Reseed::finetune;
    std::filesystem::path output_dir;
    nlohmann::json table = nlohmann::json::object();  // optional row descriptors

    /// Defaults filled, paths absolute, output_dir omitted.
    nlohmann::json canonical() const;
    /// Digest of the canonical form and kCodeVersion; keys every artifact.
    std::string fingerprint() const;
    std::filesystem::path artifact_dir() const { return output_dir / fingerprint(); }
};

/// Relative paths resolve against `base_dir`. Throws ConfigError carrying
/// all violations.
ExperimentFile parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentFile load_experiment(const std::filesystem::path& path);

struct RunOptions {
    /// Sees every ledger record as it is written; an exception thrown here
    /// aborts the run like a crash would.
    std::function<void(const nlohmann::json&)> observer;
    std::function<void(const std::string&)> log;
};

struct ExperimentOutcome {
    SystemRow row;
    std::filesystem::path artifact_dir;
    bool nothing_to_do = false;
    std::size_t stages_executed = 0;
    std::size_t runs_executed = 0;
};

/// Executes the stages, then fine-tunes and tests every task n_runs times,
/// then writes the scorecard. Finished stages and runs recorded in the
/// artifact ledger are reused, so an interrupted run resumes where it
/// stopped. A failure is recorded in the ledger and rethrown.
ExperimentOutcome run_experiment(const ExperimentFile& experiment, const RunOptions& options = {});

/// The table row of a completed experiment, rebuilt from its stored run
/// results; nullopt when the experiment has not completed.
std::optional<SystemRow> completed_row(const ExperimentFile& experiment);

/// Expands shell-style patterns; literal paths pass through.
std::vector<std::filesystem::path> expand_patterns(const std::vector<std::string>& patterns);

struct MatrixOptions {
    std::string baseline;
    double alpha = 0.01;
    Pairing pairing = Pairing::per_run;
    bool include_reference = true;
    std::filesystem::path reference_path = data_dir() / "reference" / "reported_results.json";
    bool run_missing = false;
};

struct MatrixResult {
    std::vector<SystemRow> rows;
    SignificanceReport significance;
    TableDocument table;
};

/// One table across every completed experiment, optionally with the
/// reference rows. No completed experiment throws DataError; an absent
/// baseline throws ConfigError.
MatrixResult run_matrix(const std::vector<std::filesystem::path>& experiment_files, const MatrixOptions& options,
                        const RunOptions& run_options = {});

}  // namespace crisisvit

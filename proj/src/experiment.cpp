#include "crisisvit/experiment.hpp"

#include <glob.h>

#include <chrono>
#include <cstdlib>
#include <map>
#include <set>

#include "crisisvit/digest.hpp"
#include "crisisvit/errors.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit {

std::string format_violations(const std::vector<Violation>& v) {
    std::string out;
    for (const auto& x : v) out += (out.empty() ? "" : "\n") + x.path + ": " + x.message;
    return out;
}

namespace {

const std::set<std::string> kTopLevelKeys = {"id",     "system",  "model",  "init_seed",        "base",
                                             "data",   "stages",  "finetune", "n_runs",         "allow_fewer_runs",
                                             "seeds",  "reseed",  "output_dir", "table"};

bool is_strategy_kind(const std::string& k) {
    try {
        strategy_kind_from_string(k);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

/// Keys of `doc` that the serialized form of `defaults` does not know.
void unknown_keys(const nlohmann::json& doc, const nlohmann::json& defaults, const std::string& path,
                  std::vector<Violation>& out, const std::set<std::string>& extra = {}) {
    for (const auto& [key, value] : doc.items()) {
        if (defaults.contains(key) || extra.count(key)) {
            if (value.is_object() && defaults.contains(key) && defaults[key].is_object())
                unknown_keys(value, defaults[key], path + "." + key, out);
            continue;
        }
        out.push_back({path + "." + key, "unknown field"});
    }
}

template <typename F>
void check(std::vector<Violation>& out, const std::string& path, F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        out.push_back({path, e.what()});
    } catch (const nlohmann::json::exception& e) {
        out.push_back({path, std::string("malformed value (") + e.what() + ")"});
    }
}

nlohmann::json stage_defaults(const std::string& kind) {
    if (kind == "ssl") return nlohmann::json(SslTrainConfig{});
    PretrainStrategy s;
    s.kind = strategy_kind_from_string(kind);
    return nlohmann::json(s);
}

}  // namespace

std::vector<Violation> validate_experiment(const nlohmann::json& doc) {
    std::vector<Violation> v;
    if (!doc.is_object()) return {{"$", "experiment must be an object"}};
    for (const auto& [key, value] : doc.items())
        if (!kTopLevelKeys.count(key)) v.push_back({key, "unknown field"});

    if (!doc.contains("id") || !doc["id"].is_string() || doc["id"].get<std::string>().empty())
        v.push_back({"id", "required non-empty string"});
    if (doc.contains("system") && !doc["system"].is_string()) v.push_back({"system", "must be a string"});
    if (doc.contains("model")) {
        check(v, "model", [&] {
            if (!doc["model"].is_object()) throw ConfigError("must be an object");
            doc["model"].get<ModelConfig>().validate();
        });
        if (doc["model"].is_object()) unknown_keys(doc["model"], nlohmann::json(ModelConfig{}), "model", v);
    }
    if (doc.contains("init_seed") && !doc["init_seed"].is_number_unsigned())
        v.push_back({"init_seed", "must be a non-negative integer"});
    if (doc.contains("base")) {
        const auto& b = doc["base"];
        const bool fresh = b.is_string() && b.get<std::string>() == "fresh";
        const bool external = b.is_object() && b.size() == 1 && b.contains("external") && b["external"].is_string();
        if (!fresh && !external) v.push_back({"base", "must be \"fresh\" or {\"external\": \"<checkpoint path>\"}"});
    }

    bool needs_incidents = false;
    const bool external_base = doc.contains("base") && doc["base"].is_object();
    if (!doc.contains("stages") || !doc["stages"].is_array()) {
        v.push_back({"stages", "required list"});
    } else if (doc["stages"].empty() && !external_base) {
        v.push_back({"stages", "an experiment without stages needs an external base checkpoint"});
    } else {
        for (std::size_t i = 0; i < doc["stages"].size(); ++i) {
            const auto& s = doc["stages"][i];
            const std::string at = "stages[" + std::to_string(i) + "]";
            if (!s.is_object()) {
                v.push_back({at, "must be an object"});
                continue;
            }
            if (!s.contains("kind") || !s["kind"].is_string()) {
                v.push_back({at + ".kind", "required string"});
                continue;
            }
            const std::string kind = s["kind"].get<std::string>();
            if (kind != "ssl" && !is_strategy_kind(kind)) {
                v.push_back({at + ".kind", "unknown stage kind '" + kind +
                                               "' (expected ssl, binary_sequential, multiclass_incident, "
                                               "multiclass_places or multiclass_joint)"});
                continue;
            }
            needs_incidents = true;
            check(v, at, [&] {
                if (kind == "ssl") {
                    nlohmann::json body = s;
                    body.erase("kind");
                    body.get<SslTrainConfig>().validate();
                } else {
                    s.get<PretrainStrategy>().validate();
                }
            });
            unknown_keys(s, stage_defaults(kind), at, v, {"kind"});
        }
    }

    const auto data = doc.value("data", nlohmann::json::object());
    if (!data.is_object()) {
        v.push_back({"data", "must be an object"});
    } else {
        if (!data.contains("benchmark") || !data["benchmark"].is_string())
            v.push_back({"data.benchmark", "required path to the benchmark directory"});
        if (needs_incidents && (!data.contains("incidents") || !data["incidents"].is_string()))
            v.push_back({"data.incidents", "required path to the Incidents1M directory"});
        for (const auto& [key, value] : data.items())
            if (key != "benchmark" && key != "incidents") v.push_back({"data." + key, "unknown field"});
    }

    if (doc.contains("finetune")) {
        check(v, "finetune", [&] {
            if (!doc["finetune"].is_object()) throw ConfigError("must be an object");
            doc["finetune"].get<FinetuneConfig>().validate();
        });
        if (doc["finetune"].is_object()) unknown_keys(doc["finetune"], nlohmann::json(FinetuneConfig{}), "finetune", v);
    }

    long n_runs = kMinRuns;
    if (doc.contains("n_runs")) {
        if (!doc["n_runs"].is_number_integer() || doc["n_runs"].get<long>() < 1) {
            v.push_back({"n_runs", "must be an integer >= 1"});
            n_runs = -1;
        } else {
            n_runs = doc["n_runs"].get<long>();
        }
    }
    if (doc.contains("allow_fewer_runs") && !doc["allow_fewer_runs"].is_boolean())
        v.push_back({"allow_fewer_runs", "must be true or false"});
    if (n_runs >= 1 && n_runs < kMinRuns && !doc.value("allow_fewer_runs", false))
        v.push_back({"n_runs", "every experiment is run at least " + std::to_string(kMinRuns) +
                                   " times and the results averaged; set allow_fewer_runs to override"});
    if (doc.contains("seeds")) {
        const auto& seeds = doc["seeds"];
        if (!seeds.is_array() || !std::all_of(seeds.begin(), seeds.end(), [](const auto& x) { return x.is_number_unsigned(); }))
            v.push_back({"seeds", "must be a list of non-negative integers"});
        else if (n_runs >= 1 && static_cast<long>(seeds.size()) < n_runs)
            v.push_back({"seeds", std::to_string(seeds.size()) + " seeds for " + std::to_string(n_runs) + " runs"});
        else if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
            v.push_back({"seeds", "seeds must be distinct"});
    }
    if (doc.contains("reseed") &&
        !(doc["reseed"].is_string() && (doc["reseed"] == "finetune" || doc["reseed"] == "pipeline")))
        v.push_back({"reseed", "must be \"finetune\" or \"pipeline\""});
    if (!doc.contains("output_dir") || !doc["output_dir"].is_string())
        v.push_back({"output_dir", "required path"});
    if (doc.contains("table") && !doc["table"].is_object()) v.push_back({"table", "must be an object"});
    return v;
}

ExperimentFile parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    const auto violations = validate_experiment(doc);
    if (!violations.empty()) throw ConfigError("invalid experiment:\n" + format_violations(violations));
    auto resolve = [&](const std::string& p) { return std::filesystem::weakly_canonical(base_dir / p); };

    ExperimentFile e;
    e.id = doc["id"].get<std::string>();
    e.system = doc.value("system", e.id);
    e.model = doc.contains("model") ? doc["model"].get<ModelConfig>() : vit_base_config();
    e.model.num_classes = 0;
    e.init_seed = doc.value("init_seed", std::uint64_t{0});
    if (doc.contains("base") && doc["base"].is_object()) e.external_base = resolve(doc["base"]["external"]);
    const auto data = doc.value("data", nlohmann::json::object());
    if (data.contains("incidents")) e.incidents_dir = resolve(data["incidents"]);
    e.benchmark_dir = resolve(data["benchmark"]);
    for (const auto& s : doc["stages"]) {
        StageSpec spec;
        const std::string kind = s["kind"];
        nlohmann::json normalized;
        if (kind == "ssl") {
            spec.kind = StageSpec::Kind::ssl;
            nlohmann::json body = s;
            body.erase("kind");
            spec.ssl = body.get<SslTrainConfig>();
            normalized = spec.ssl;
            normalized["kind"] = "ssl";
        } else {
            spec.kind = StageSpec::Kind::supervised;
            spec.supervised = s.get<PretrainStrategy>();
            normalized = spec.supervised;
        }
        e.stages.push_back(spec);
        e.stage_documents.push_back(normalized);
    }
    if (doc.contains("finetune")) e.finetune = doc["finetune"].get<FinetuneConfig>();
    e.n_runs = doc.value("n_runs", kMinRuns);
    e.allow_fewer_runs = doc.value("allow_fewer_runs", false);
    if (doc.contains("seeds"))
        e.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    else
        for (int i = 0; i < e.n_runs; ++i) e.seeds.push_back(static_cast<std::uint64_t>(i));
    e.reseed = doc.value("reseed", std::string("finetune")) == "pipeline" ? Reseed::pipeline : Reseed::finetune;
    e.output_dir = resolve(doc["output_dir"]);
    e.table = doc.value("table", nlohmann::json::object());
    return e;
}

ExperimentFile load_experiment(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& err) {
        throw ConfigError(path.string() + ": not valid JSON (" + err.what() + ")");
    }
    try {
        return parse_experiment(doc, std::filesystem::absolute(path).parent_path());
    } catch (const ConfigError& err) {
        throw ConfigError(path.string() + ": " + err.what());
    }
}

nlohmann::json ExperimentFile::canonical() const {
    nlohmann::json j = {{"id", id},
                        {"model", model},
                        {"init_seed", init_seed},
                        {"base", external_base ? nlohmann::json{{"external", external_base->string()}} : "fresh"},
                        {"data", {{"incidents", incidents_dir.string()}, {"benchmark", benchmark_dir.string()}}},
                        {"stages", stage_documents},
                        {"finetune", finetune},
                        {"n_runs", n_runs},
                        {"allow_fewer_runs", allow_fewer_runs},
                        {"seeds", seeds},
                        {"reseed", reseed == Reseed::pipeline ? "pipeline" : "finetune"}};
    return j;
}

std::string ExperimentFile::fingerprint() const {
    return short_digest(canonical().dump() + "\n" + kCodeVersion);
}

namespace {

std::string methodology_name(const StageSpec& s) {
    if (s.kind == StageSpec::Kind::ssl) return "MAE";
    switch (s.supervised.kind) {
        case StrategyKind::binary_sequential: return "Binary (Incident+Places)";
        case StrategyKind::multiclass_incident: return "Multi-Class (Incident)";
        case StrategyKind::multiclass_places: return "Multi-Class (Places)";
        case StrategyKind::multiclass_joint: return "Multi-Class (Incident+Places)";
    }
    return "?";
}

SystemRow describe(const ExperimentFile& e, SystemScorecard score, std::optional<double> hours) {
    SystemRow row;
    row.score = std::move(score);
    row.model = "CrisisViT";
    row.type = "TF";
    std::vector<std::string> ssl, sup, method;
    if (e.external_base) {
        sup.push_back("external");
        method.push_back("External");
    }
    for (const auto& s : e.stages) {
        if (s.kind == StageSpec::Kind::ssl) {
            ssl.push_back(s.ssl.dataset);
            row.epochs = s.ssl.epochs;
        } else {
            sup.push_back(s.supervised.dataset);
            row.epochs = s.supervised.epochs;
        }
        method.push_back(methodology_name(s));
    }
    auto joined = [](const std::vector<std::string>& parts, const std::string& sep) {
        std::string out;
        for (const auto& p : parts) out += (out.empty() ? "" : sep) + p;
        return out.empty() ? std::string("None") : out;
    };
    row.self_supervised_dataset = joined(ssl, "+");
    row.supervised_dataset = joined(sup, "+");
    row.methodology = joined(method, " + ");
    row.family = "experiment";
    row.training_hours = hours;
    const auto& t = e.table;
    row.model = t.value("model", row.model);
    row.type = t.value("type", row.type);
    row.self_supervised_dataset = t.value("self_supervised_dataset", row.self_supervised_dataset);
    row.supervised_dataset = t.value("supervised_dataset", row.supervised_dataset);
    row.methodology = t.value("methodology", row.methodology);
    row.epochs = t.value("epochs", row.epochs);
    row.family = t.value("family", row.family);
    return row;
}

std::string run_key(TaskId t, int run) { return to_string(t) + "/" + std::to_string(run); }

/// Latest finish record per key.
std::map<std::string, nlohmann::json> finished(const std::vector<nlohmann::json>& records, const std::string& type) {
    std::map<std::string, nlohmann::json> out;
    for (const auto& r : records)
        if (r.value("type", "") == type) out[r.at("key").get<std::string>()] = r;
    return out;
}

std::optional<SystemRow> row_from_artifacts(const ExperimentFile& e, const std::vector<nlohmann::json>& records) {
    const auto runs = finished(records, "run_finish");
    std::vector<RunResult> results;
    for (TaskId t : kAllTasks)
        for (int r = 0; r < e.n_runs; ++r) {
            const auto it = runs.find(run_key(t, r));
            if (it == runs.end()) return std::nullopt;
            const auto path = e.artifact_dir() / "runs" / (it->second.at("file").get<std::string>() + ".json");
            if (!std::filesystem::exists(path)) return std::nullopt;
            results.push_back(load_run_result(path));
        }
    double seconds = 0;
    for (const auto& [key, rec] : finished(records, "stage_finish")) seconds += rec.value("seconds", 0.0);
    return describe(e, scorecard_from_runs(e.system, results), seconds / 3600.0);
}

unsigned decode_workers() {
    const char* det = std::getenv("CRISISVIT_DETERMINISTIC");
    return det && std::string(det) == "1" ? 1u : 0u;
}

}  // namespace

std::optional<SystemRow> completed_row(const ExperimentFile& experiment) {
    const auto ledger = experiment.artifact_dir() / "ledger.jsonl";
    if (!std::filesystem::exists(ledger)) return std::nullopt;
    return row_from_artifacts(experiment, RunLedger::read(ledger));
}

ExperimentOutcome run_experiment(const ExperimentFile& e, const RunOptions& options) {
    namespace fs = std::filesystem;
    ExperimentOutcome outcome;
    outcome.artifact_dir = e.artifact_dir();
    const fs::path dir = outcome.artifact_dir;
    const auto log = [&](const std::string& m) {
        if (options.log) options.log(m);
    };
    if (!fs::is_directory(e.benchmark_dir))
        throw DataError("benchmark directory " + e.benchmark_dir.string() + " does not exist");
    if (!e.stages.empty() && !fs::exists(e.incidents_dir / "manifest.jsonl"))
        throw DataError("no manifest.jsonl under " + e.incidents_dir.string());
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "runs");
    if (!fs::exists(dir / "experiment.json")) {
        nlohmann::json stored = e.canonical();
        stored["fingerprint"] = e.fingerprint();
        stored["code_version"] = kCodeVersion;
        write_file_atomic(dir / "experiment.json", stored.dump(2) + "\n");
    }

    const auto prior = RunLedger::read(dir / "ledger.jsonl");
    const bool done_before = std::any_of(prior.begin(), prior.end(),
                                         [](const auto& r) { return r.value("type", "") == "experiment_finish"; });
    if (done_before)
        if (auto row = row_from_artifacts(e, prior)) {
            log("resumed, nothing to do");
            outcome.row = std::move(*row);
            outcome.nothing_to_do = true;
            return outcome;
        }
    const auto stages_done = finished(prior, "stage_finish");
    const auto runs_done = finished(prior, "run_finish");

    RunLedger ledger(dir / "ledger.jsonl");
    bool failing = false;
    const auto record = [&](nlohmann::json r) {
        ledger.append(r);
        if (options.observer && !failing) options.observer(ledger.records().back());
    };

    try {
        record({{"type", "experiment_start"},
                {"fingerprint", e.fingerprint()},
                {"code_version", kCodeVersion},
                {"resumed", !prior.empty()}});

        const auto incident = incident_vocabulary();
        const auto place = place_vocabulary();
        std::optional<SampleSet> images;
        std::optional<std::vector<DatasetManifestEntry>> entries;
        const auto inputs = [&]() -> StageInputs {
            if (!images) {
                auto loaded = load_manifest(e.incidents_dir / "manifest.jsonl", incident, place);
                entries = std::move(loaded.entries);
                std::vector<const DatasetManifestEntry*> fetched;
                for (const auto& en : *entries)
                    if (en.status == RetrievalStatus::fetched) fetched.push_back(&en);
                double max_failures = 0.05;
                for (const auto& s : e.stages)
                    if (s.kind == StageSpec::Kind::ssl) max_failures = s.ssl.max_decode_failure_fraction;
                DecodeReport report;
                images = decode_entries(fetched, ContentStore(e.incidents_dir / "store"), e.model.image_size,
                                        Normalization{}, report, max_failures, decode_workers());
                record({{"type", "data"},
                        {"manifest", loaded.summary.to_json()},
                        {"decoded", report.decoded},
                        {"decode_failures", report.failures.size()}});
            }
            return {&*images, &*entries, &incident, &place};
        };

        const auto pipeline = [&](const std::string& scope, std::optional<std::uint64_t> reseed) -> Checkpoint {
            std::optional<Checkpoint> ckpt;
            std::size_t first = 0;
            for (std::size_t i = e.stages.size(); i-- > 0;) {
                const auto it = stages_done.find(scope + "/" + std::to_string(i));
                if (it == stages_done.end()) continue;
                const auto path = dir / "checkpoints" / (it->second.at("digest").get<std::string>() + ".ckpt");
                if (!fs::exists(path)) continue;
                ckpt = load_checkpoint<float>(path);
                if (checkpoint_digest(*ckpt) != it->second.at("digest"))
                    throw IntegrityError("stored checkpoint " + path.string() + " does not match its ledger digest");
                first = i + 1;
                log(scope + ": reusing stages 0-" + std::to_string(i));
                break;
            }
            if (!ckpt) {
                const std::uint64_t init = reseed ? derive_seed(e.init_seed, *reseed) : e.init_seed;
                ckpt = make_checkpoint<float>(e.model, init);
                if (e.external_base) {
                    StageSpec ext;
                    ext.kind = StageSpec::Kind::external;
                    ext.checkpoint = *e.external_base;
                    ckpt = run_stage(*ckpt, ext, {});
                }
            }
            for (std::size_t i = first; i < e.stages.size(); ++i) {
                StageSpec spec = e.stages[i];
                if (reseed) {
                    spec.ssl.seed = derive_seed(spec.ssl.seed, *reseed);
                    spec.supervised.seed = derive_seed(spec.supervised.seed, *reseed);
                }
                const std::string key = scope + "/" + std::to_string(i);
                record({{"type", "stage_start"}, {"key", key}, {"stage", e.stage_documents[i]}});
                log("stage " + key + " (" + e.stage_documents[i]["kind"].get<std::string>() + ")");
                const auto start = std::chrono::steady_clock::now();
                const StageInputs in = inputs();
                ckpt = run_stage(*ckpt, spec, in, &ledger);
                const std::string digest = checkpoint_digest(*ckpt);
                save_checkpoint(*ckpt, dir / "checkpoints" / (digest + ".ckpt"));
                ++outcome.stages_executed;
                record({{"type", "stage_finish"},
                        {"key", key},
                        {"digest", digest},
                        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}});
            }
            return *ckpt;
        };

        const Benchmark bench = load_benchmark(e.benchmark_dir);
        bench.require_clean();
        std::map<TaskId, DecodedTask> tasks;
        std::optional<Checkpoint> shared;
        std::map<int, Checkpoint> per_run;
        for (TaskId t : kAllTasks)
            for (int r = 0; r < e.n_runs; ++r) {
                const std::string key = run_key(t, r);
                if (const auto it = runs_done.find(key);
                    it != runs_done.end() &&
                    fs::exists(dir / "runs" / (it->second.at("file").get<std::string>() + ".json")))
                    continue;
                const std::uint64_t seed = e.seeds[static_cast<std::size_t>(r)];
                const Checkpoint* base;
                if (e.reseed == Reseed::finetune) {
                    if (!shared) shared = pipeline("shared", std::nullopt);
                    base = &*shared;
                } else {
                    if (!per_run.count(r)) per_run.emplace(r, pipeline("run" + std::to_string(r), seed));
                    base = &per_run.at(r);
                }
                if (!tasks.count(t)) tasks.emplace(t, decode_task(bench.task(t), e.model.image_size, base->normalization));
                record({{"type", "run_start"}, {"key", key}, {"seed", seed}});
                log("fine-tune " + key);
                const auto start = std::chrono::steady_clock::now();
                auto [tuned, validation] = finetune(*base, tasks.at(t), e.finetune, seed, &ledger);
                RunResult test = evaluate(tuned, tasks.at(t), kSplitTest, seed);
                test.provenance_digest = base->provenance_digest();
                test.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                const std::string file = to_string(t) + "-run" + std::to_string(r);
                save_run_result(test, dir / "runs", file);
                ++outcome.runs_executed;
                record({{"type", "run_finish"},
                        {"key", key},
                        {"file", file},
                        {"seed", seed},
                        {"validation_accuracy", validation.accuracy},
                        {"test_accuracy", test.accuracy}});
            }

        std::vector<nlohmann::json> all = RunLedger::read(dir / "ledger.jsonl");
        auto row = row_from_artifacts(e, all);
        if (!row) throw IntegrityError("experiment finished without a complete set of run results");
        nlohmann::json card = {{"system", row->score.system},
                               {"fingerprint", e.fingerprint()},
                               {"means", row->score.means},
                               {"runs", row->score.runs},
                               {"avg", row->score.avg}};
        write_file_atomic(dir / "scorecard.json", card.dump(2) + "\n");
        record({{"type", "experiment_finish"}, {"avg", row->score.avg}, {"means", row->score.means}});
        outcome.row = std::move(*row);
        if (outcome.stages_executed == 0 && outcome.runs_executed == 0) {
            outcome.nothing_to_do = true;
            log("resumed, nothing to do");
        }
        return outcome;
    } catch (const std::exception& err) {
        failing = true;
        try {
            ledger.append({{"type", "experiment_failed"}, {"error", err.what()}});
        } catch (...) {
        }
        throw;
    }
}

std::vector<std::filesystem::path> expand_patterns(const std::vector<std::string>& patterns) {
    std::vector<std::filesystem::path> out;
    for (const auto& p : patterns) {
        glob_t g{};
        const int rc = ::glob(p.c_str(), 0, nullptr, &g);
        if (rc == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
        } else if (p.find_first_of("*?[") == std::string::npos) {
            out.emplace_back(p);
        }
        ::globfree(&g);
    }
    return out;
}

MatrixResult run_matrix(const std::vector<std::filesystem::path>& files, const MatrixOptions& options,
                        const RunOptions& run_options) {
    MatrixResult result;
    std::set<std::string> names;
    for (const auto& f : files) {
        const ExperimentFile e = load_experiment(f);
        std::optional<SystemRow> row = completed_row(e);
        if (!row && options.run_missing) row = run_experiment(e, run_options).row;
        if (!row) {
            if (run_options.log) run_options.log(f.string() + ": not completed, left out");
            continue;
        }
        if (!names.insert(row->score.system).second)
            throw ConfigError("two experiments report as system '" + row->score.system + "'");
        result.rows.push_back(std::move(*row));
    }
    if (result.rows.empty()) throw DataError("no completed experiments to report");
    if (options.include_reference)
        for (auto& r : load_reference_rows(options.reference_path)) {
            if (!names.insert(r.score.system).second)
                throw ConfigError("experiment system name '" + r.score.system + "' collides with a reference row");
            result.rows.push_back(std::move(r));
        }
    std::vector<SystemScorecard> cards;
    for (const auto& r : result.rows) cards.push_back(r.score);
    result.significance = compare_to_baseline(cards, options.baseline, options.alpha, options.pairing);
    result.table = emit_table(result.rows, result.significance, options.baseline);
    return result;
}

}  // namespace crisisvit

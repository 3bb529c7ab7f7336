#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "crisisvit/experiment.hpp"
#include "crisisvit/checkpoint.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/run_ledger.hpp"
#include "crisisvit/synthetic.hpp"
#include "doctest.h"

using namespace crisisvit;
namespace fs = std::filesystem;

namespace {

fs::path toy_root() {
    static const fs::path root = [] {
        const auto r = fs::temp_directory_path() / "crisisvit_exp_toy";
        fs::remove_all(r);
        synthetic::ToyCorpusSpec spec;
        spec.image_size = 16;
        spec.manifest_entries = 60;
        spec.train_per_task = 16;
        spec.validation_per_task = 8;
        spec.test_per_task = 8;
        synthetic::write_toy_corpus(r, spec);
        return r;
    }();
    return root;
}

nlohmann::json toy_doc(const std::string& id, const fs::path& out) {
    const auto root = toy_root();
    return {{"id", id},
            {"model", {{"image_size", 16}, {"patch_size", 4}, {"depth", 1}, {"hidden_dim", 16}, {"num_heads", 2}}},
            {"data", {{"incidents", (root / "incidents").string()}, {"benchmark", (root / "benchmark").string()}}},
            {"stages",
             {{{"kind", "ssl"},
               {"epochs", 1},
               {"batch_size", 16},
               {"decoder_depth", 1},
               {"decoder_dim", 8},
               {"decoder_heads", 2}},
              {{"kind", "multiclass_places"}, {"epochs", 1}, {"batch_size", 16}}}},
            {"finetune", {{"epochs", 1}, {"batch_size", 16}}},
            {"n_runs", 3},
            {"output_dir", out.string()}};
}

fs::path write_doc(const nlohmann::json& doc, const std::string& name) {
    const auto p = fs::temp_directory_path() / "crisisvit_exp_files" / name;
    write_file_atomic(p, doc.dump(2));
    return p;
}

bool has_violation(const std::vector<Violation>& v, const std::string& path) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.path == path; });
}

}  // namespace

TEST_CASE("validation names the offending field") {
    auto doc = toy_doc("v", "/tmp/x");
    CHECK(validate_experiment(doc).empty());

    auto bad_kind = doc;
    bad_kind["stages"][1]["kind"] = "multiclass_weather";
    const auto v = validate_experiment(bad_kind);
    REQUIRE(v.size() == 1);
    CHECK(v[0].path == "stages[1].kind");
    CHECK(v[0].message.find("multiclass_weather") != std::string::npos);

    auto few = doc;
    few["n_runs"] = 2;
    const auto fv = validate_experiment(few);
    REQUIRE(has_violation(fv, "n_runs"));
    CHECK(fv[0].message.find("at least 3") != std::string::npos);
    few["allow_fewer_runs"] = true;
    CHECK(validate_experiment(few).empty());

    auto typo = doc;
    typo["finetune"]["epohcs"] = 3;
    typo["stages"][0]["mask_ration"] = 0.5;
    typo["colour"] = "blue";
    const auto tv = validate_experiment(typo);
    CHECK(has_violation(tv, "finetune.epohcs"));
    CHECK(has_violation(tv, "stages[0].mask_ration"));
    CHECK(has_violation(tv, "colour"));

    auto values = doc;
    values["stages"][0]["mask_ratio"] = 1.5;
    values["seeds"] = {1, 2};
    values["base"] = "pretrained";
    values["finetune"]["epochs"] = "ten";
    const auto vv = validate_experiment(values);
    CHECK(has_violation(vv, "stages[0]"));
    CHECK(has_violation(vv, "seeds"));
    CHECK(has_violation(vv, "base"));
    CHECK(has_violation(vv, "finetune"));

    auto no_data = doc;
    no_data.erase("data");
    CHECK(has_violation(validate_experiment(no_data), "data.benchmark"));
    CHECK(has_violation(validate_experiment(no_data), "data.incidents"));

    CHECK_THROWS_AS(parse_experiment(bad_kind, "."), ConfigError);
}

TEST_CASE("fingerprint ignores output location and display name") {
    const auto a = parse_experiment(toy_doc("f", "/tmp/a"), ".");
    auto doc_b = toy_doc("f", "/tmp/b");
    doc_b["system"] = "Renamed";
    const auto b = parse_experiment(doc_b, ".");
    CHECK(a.fingerprint() == b.fingerprint());
    auto doc_c = toy_doc("f", "/tmp/a");
    doc_c["finetune"]["epochs"] = 2;
    CHECK(parse_experiment(doc_c, ".").fingerprint() != a.fingerprint());
    CHECK(a.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(a.stage_documents[0]["mask_ratio"] == 0.75);
}

TEST_CASE("toy experiment runs end to end, reruns as a no-op and reproduces") {
    const auto out_a = fs::temp_directory_path() / "crisisvit_exp_a";
    const auto out_b = fs::temp_directory_path() / "crisisvit_exp_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    const auto e = load_experiment(write_doc(toy_doc("toy", out_a), "toy.json"));

    const auto first = run_experiment(e);
    CHECK_FALSE(first.nothing_to_do);
    CHECK(first.stages_executed == 2);
    CHECK(first.runs_executed == 12);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(first.row.score.runs[t].size() == 3);
        CHECK(first.row.score.means[t] >= 0.0);
        CHECK(first.row.score.means[t] <= 100.0);
    }
    CHECK(first.row.score.avg == doctest::Approx((first.row.score.means[0] + first.row.score.means[1] +
                                                  first.row.score.means[2] + first.row.score.means[3]) /
                                                 4));
    CHECK(first.row.methodology == "MAE + Multi-Class (Places)");
    CHECK(fs::exists(first.artifact_dir / "scorecard.json"));
    CHECK(fs::exists(first.artifact_dir / "runs" / "damage_severity-run2.predictions.tsv"));

    std::vector<std::string> logged;
    RunOptions opts;
    opts.log = [&](const std::string& m) { logged.push_back(m); };
    const auto again = run_experiment(e, opts);
    CHECK(again.nothing_to_do);
    CHECK(again.stages_executed == 0);
    CHECK(again.runs_executed == 0);
    CHECK(std::find(logged.begin(), logged.end(), "resumed, nothing to do") != logged.end());
    CHECK(again.row.score.means == first.row.score.means);

    auto doc_b = toy_doc("toy", out_b);
    const auto other = run_experiment(parse_experiment(doc_b, "."));
    CHECK(other.artifact_dir.filename() == first.artifact_dir.filename());
    for (std::size_t t = 0; t < 4; ++t) CHECK(std::abs(other.row.score.means[t] - first.row.score.means[t]) <= 1e-6);

    const auto row = completed_row(e);
    REQUIRE(row);
    CHECK(row->score.avg == first.row.score.avg);
}

TEST_CASE("an interrupted experiment resumes without redoing finished work") {
    const auto out = fs::temp_directory_path() / "crisisvit_exp_resume";
    fs::remove_all(out);
    auto doc = toy_doc("resume", out);
    doc["finetune"]["epochs"] = 2;
    const auto e = parse_experiment(doc, ".");

    int finished_runs = 0;
    RunOptions crash;
    crash.observer = [&](const nlohmann::json& r) {
        if (r.value("type", "") == "run_finish" && ++finished_runs == 5) throw std::runtime_error("killed");
    };
    CHECK_THROWS_WITH(run_experiment(e, crash), "killed");
    const auto ledger = RunLedger::read(e.artifact_dir() / "ledger.jsonl");
    CHECK(ledger.back()["type"] == "experiment_failed");
    CHECK_FALSE(completed_row(e));

    const auto resumed = run_experiment(e);
    CHECK(resumed.stages_executed == 0);
    CHECK(resumed.runs_executed == 7);
    CHECK_FALSE(resumed.nothing_to_do);

    const auto fresh_out = fs::temp_directory_path() / "crisisvit_exp_resume_fresh";
    fs::remove_all(fresh_out);
    doc["output_dir"] = fresh_out.string();
    const auto fresh = run_experiment(parse_experiment(doc, "."));
    for (std::size_t t = 0; t < 4; ++t) CHECK(std::abs(fresh.row.score.means[t] - resumed.row.score.means[t]) <= 1e-6);
}

TEST_CASE("matrix combines experiments with the reference rows") {
    const auto out = fs::temp_directory_path() / "crisisvit_exp_a";
    const auto done = write_doc(toy_doc("toy", out), "toy.json");
    auto pending_doc = toy_doc("pending", fs::temp_directory_path() / "crisisvit_exp_pending");
    fs::remove_all(fs::temp_directory_path() / "crisisvit_exp_pending");
    const auto pending = write_doc(pending_doc, "pending.json");
    if (!completed_row(load_experiment(done))) run_experiment(load_experiment(done));

    MatrixOptions opts;
    opts.baseline = "CrisisViT Multi-Class (Places) 20ep";
    const auto m = run_matrix({done, pending}, opts);
    CHECK(m.rows.front().score.system == "toy");
    CHECK(m.rows.size() == 18);
    CHECK(m.table.text.find("[paper-reported]") != std::string::npos);
    CHECK(m.significance.find("toy") != nullptr);

    opts.baseline = "no such system";
    CHECK_THROWS_AS(run_matrix({done}, opts), ConfigError);
    opts.baseline = "toy";
    opts.include_reference = false;
    CHECK_THROWS_AS(run_matrix({pending}, opts), DataError);

    const auto expanded = expand_patterns({(done.parent_path() / "*.json").string(), "/nonexistent/literal.json"});
    CHECK(std::find(expanded.begin(), expanded.end(), done) != expanded.end());
    CHECK(expanded.back() == fs::path("/nonexistent/literal.json"));
}

TEST_CASE("an external checkpoint can be fine-tuned without further stages") {
    const auto out = fs::temp_directory_path() / "crisisvit_exp_external";
    fs::remove_all(out);
    auto doc = toy_doc("external", out);
    const auto model = doc["model"].get<ModelConfig>();
    const auto base = fs::temp_directory_path() / "crisisvit_exp_files" / "base.ckpt";
    save_checkpoint(make_checkpoint<float>(model, 11), base);
    doc["base"] = {{"external", base.string()}};
    doc["stages"] = nlohmann::json::array();
    doc["data"].erase("incidents");
    CHECK(validate_experiment(doc).empty());
    const auto e = parse_experiment(doc, ".");
    const auto outcome = run_experiment(e);
    CHECK(outcome.stages_executed == 0);
    CHECK(outcome.runs_executed == 12);
    CHECK(outcome.row.methodology == "External");

    auto headless = doc;
    headless["stages"] = nlohmann::json::array();
    headless.erase("base");
    CHECK(has_violation(validate_experiment(headless), "stages"));

    auto mismatched = doc;
    mismatched["model"]["hidden_dim"] = 8;
    mismatched["output_dir"] = (out / "mismatch").string();
    CHECK_THROWS_AS(run_experiment(parse_experiment(mismatched, ".")), ConfigError);
}

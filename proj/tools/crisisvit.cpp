// crisisvit: experiment runner and data tooling.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "crisisvit/crawler.hpp"
#include "crisisvit/errors.hpp"
#include "crisisvit/experiment.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/label_resolution.hpp"
#include "crisisvit/synthetic.hpp"

using namespace crisisvit;
namespace fs = std::filesystem;

namespace {

void log_line(const std::string& m) { std::cerr << "[crisisvit] " << m << "\n"; }

Pairing parse_pairing(const std::string& s) {
    if (s == "per_run") return Pairing::per_run;
    if (s == "per_example") return Pairing::per_example;
    throw UsageError("--pairing must be per_run or per_example, got '" + s + "'");
}

void write_or_print(const std::string& text, const std::string& path) {
    if (path.empty())
        std::cout << text;
    else
        write_file_atomic(path, text);
}

struct ManifestArgs {
    std::string path;
    std::string vocab_dir = (data_dir() / "vocabularies").string();
};

ManifestLoadResult load(const ManifestArgs& a, LabelVocabulary& incident, LabelVocabulary& place) {
    incident = incident_vocabulary(a.vocab_dir);
    place = place_vocabulary(a.vocab_dir);
    return load_manifest(a.path, incident, place);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CrisisViT experiment toolkit"};
    app.require_subcommand(1);

    // validate
    std::vector<std::string> validate_files;
    auto* validate = app.add_subcommand("validate", "Check experiment files and list every violation");
    validate->add_option("files", validate_files, "Experiment files")->required();

    // run
    std::string run_file;
    auto* run = app.add_subcommand("run", "Run (or resume) one experiment");
    run->add_option("file", run_file, "Experiment file")->required()->check(CLI::ExistingFile);

    // matrix / report
    std::vector<std::string> patterns;
    std::string baseline, pairing = "per_run", reference = (data_dir() / "reference" / "reported_results.json").string();
    std::string tsv_out, significance_out;
    double alpha = 0.01;
    bool no_reference = false;
    auto add_report_options = [&](CLI::App* sub) {
        sub->add_option("files", patterns, "Experiment files or glob patterns")->required();
        sub->add_option("--baseline", baseline, "System every other row is tested against")->required();
        sub->add_option("--alpha", alpha, "Family-wise significance level")->capture_default_str();
        sub->add_option("--pairing", pairing, "per_run or per_example")->capture_default_str();
        sub->add_option("--reference", reference, "Reported reference rows")->capture_default_str();
        sub->add_flag("--no-reference", no_reference, "Leave the reference rows out");
        sub->add_option("--tsv", tsv_out, "Also write the unrounded table as TSV");
        sub->add_option("--significance", significance_out, "Also write the significance report as JSON");
    };
    auto* matrix = app.add_subcommand("matrix", "Run every incomplete experiment, then print the combined table");
    add_report_options(matrix);
    auto* report = app.add_subcommand("report", "Print the combined table of completed experiments");
    add_report_options(report);

    // manifest
    auto* manifest = app.add_subcommand("manifest", "Incidents1M manifest tools");
    manifest->require_subcommand(1);
    ManifestArgs margs;
    auto add_manifest_args = [&](CLI::App* sub) {
        sub->add_option("manifest", margs.path, "Line-delimited JSON manifest")->required()->check(CLI::ExistingFile);
        sub->add_option("--vocabularies", margs.vocab_dir, "Vocabulary directory")->capture_default_str();
    };
    auto* m_load = manifest->add_subcommand("load", "Parse a manifest and list rejected records");
    add_manifest_args(m_load);
    auto* m_stats = manifest->add_subcommand("stats", "Summary counts of a manifest");
    add_manifest_args(m_stats);
    std::string store_dir;
    CrawlPolicy policy;
    auto* m_crawl = manifest->add_subcommand("crawl", "Fetch pending entries into the content store");
    add_manifest_args(m_crawl);
    m_crawl->add_option("--store", store_dir, "Content store directory (default: <manifest dir>/store)");
    m_crawl->add_option("--concurrency", policy.concurrency)->capture_default_str();
    m_crawl->add_option("--retries", policy.retries)->capture_default_str();
    m_crawl->add_option("--timeout", policy.timeout_seconds, "Seconds per request")->capture_default_str();
    m_crawl->add_option("--rate-limit", policy.rate_limit_per_host, "Requests per second per host")
        ->capture_default_str();
    bool skip_failed = false;
    m_crawl->add_flag("--skip-failed", skip_failed, "Do not retry entries that already failed");
    std::string scope = "joint", resolve_out;
    auto* m_resolve = manifest->add_subcommand("resolve", "Single-label examples by first listed label (TSV)");
    add_manifest_args(m_resolve);
    m_resolve->add_option("--vocabulary", scope, "incident, place or joint")
        ->check(CLI::IsMember({"incident", "place", "joint"}))
        ->capture_default_str();
    m_resolve->add_option("-o,--output", resolve_out, "Output path (default: stdout)");

    // synth
    std::string synth_root;
    synthetic::ToyCorpusSpec toy;
    auto* synth = app.add_subcommand("synth", "Write a small synthetic corpus for smoke runs");
    synth->add_option("root", synth_root, "Output directory")->required();
    synth->add_option("--image-size", toy.image_size)->capture_default_str();
    synth->add_option("--entries", toy.manifest_entries)->capture_default_str();
    synth->add_option("--seed", toy.seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        RunOptions opts;
        opts.log = log_line;

        if (*validate) {
            int status = kExitOk;
            for (const auto& f : validate_files) {
                nlohmann::json doc;
                try {
                    doc = nlohmann::json::parse(read_file(f));
                } catch (const nlohmann::json::parse_error& e) {
                    std::cout << f << ": not valid JSON: " << e.what() << "\n";
                    status = kExitValidation;
                    continue;
                }
                const auto v = validate_experiment(doc);
                if (v.empty()) {
                    std::cout << f << ": ok\n";
                } else {
                    status = kExitValidation;
                    for (const auto& x : v) std::cout << f << ": " << x.path << ": " << x.message << "\n";
                }
            }
            return status;
        }

        if (*run) {
            const auto e = load_experiment(run_file);
            log_line("experiment " + e.id + " -> " + e.artifact_dir().string());
            const auto out = run_experiment(e, opts);
            const auto& s = out.row.score;
            std::cout << s.system;
            for (std::size_t t = 0; t < kAllTasks.size(); ++t)
                std::cout << "  " << to_string(kAllTasks[t]) << "=" << format_fixed(s.means[t], 2);
            std::cout << "  avg=" << format_fixed(s.avg, 2) << "\n";
            return kExitOk;
        }

        if (*matrix || *report) {
            MatrixOptions mo;
            mo.baseline = baseline;
            mo.alpha = alpha;
            mo.pairing = parse_pairing(pairing);
            mo.include_reference = !no_reference;
            mo.reference_path = reference;
            mo.run_missing = static_cast<bool>(*matrix);
            const auto files = expand_patterns(patterns);
            if (files.empty()) throw UsageError("no experiment files match");
            const auto result = run_matrix(files, mo, opts);
            std::cout << result.table.text;
            if (!tsv_out.empty()) write_file_atomic(tsv_out, result.table.tsv);
            if (!significance_out.empty())
                write_file_atomic(significance_out, result.significance.to_json().dump(2) + "\n");
            return kExitOk;
        }

        if (*manifest) {
            LabelVocabulary incident, place;
            auto loaded = load(margs, incident, place);
            if (*m_load || *m_stats) {
                if (*m_load)
                    for (const auto& r : loaded.rejected) std::cout << "line " << r.line << ": " << r.reason << "\n";
                std::cout << loaded.summary.to_json().dump(2) << "\n";
                return kExitOk;
            }
            if (*m_crawl) {
                policy.retry_failed = !skip_failed;
                const ContentStore store(store_dir.empty() ? fs::path(margs.path).parent_path() / "store" : fs::path(store_dir));
                const auto report_ = crawl(loaded.entries, store, policy, default_fetch,
                                           [&](const auto& entries) { save_manifest(margs.path, entries); });
                std::cout << report_.to_json().dump(2) << "\n";
                return kExitOk;
            }
            if (*m_resolve) {
                const auto vocab = scope == "incident" ? incident
                                   : scope == "place"  ? place
                                                       : joint_vocabulary(incident, place);
                std::string tsv = "entry_id\tclass_index\tclass_label\n";
                for (const auto& r : resolve_single_label(loaded.entries, vocab))
                    tsv += r.entry_id + "\t" + std::to_string(r.class_index) + "\t" +
                           vocab[static_cast<std::size_t>(r.class_index)] + "\n";
                write_or_print(tsv, resolve_out);
                return kExitOk;
            }
        }

        if (*synth) {
            synthetic::write_toy_corpus(synth_root, toy);
            std::cout << "wrote " << synth_root << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    }
    return kExitOk;
}

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../unit/stats_oracle.hpp"
#include "crisisvit/checkpoint.hpp"
#include "crisisvit/crawler.hpp"
#include "crisisvit/experiment.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/label_resolution.hpp"
#include "crisisvit/mae.hpp"
#include "crisisvit/synthetic.hpp"
#include "crisisvit/vit.hpp"
#include "httplib.h"

using namespace crisisvit;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("crisisvit_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string fmt(double x, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

// 1. Derived quantities of the comparison table, from per-task accuracies.
Verdict table_derived_quantities() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SystemRow> rows;
    auto add = [&](const std::string& name, std::array<double, 4> acc, const std::string& family) {
        SystemRow r;
        r.score = scorecard_from_means(name, acc);
        r.family = family;
        r.reference = true;
        rows.push_back(r);
        return r.score.avg;
    };
    const double resnet = add("ResNet101", {81.3, 85.2, 76.5, 73.7}, "cnn");
    const double vit = add("ViT-Base", {84.10, 86.59, 79.43, 77.18}, "vit");
    const double best = add("CrisisViT Multi-Class (Places) 20ep", {85.26, 87.97, 80.34, 78.72}, "incidents1m");
    std::vector<SystemScorecard> cards;
    for (const auto& r : rows) cards.push_back(r.score);
    const auto doc = emit_table(rows, compare_to_baseline(cards, "ViT-Base", 0.01), "ViT-Base");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool ok = std::abs(vit - 81.82) <= 0.01 && std::abs(best - 83.07) <= 0.01 &&
                    std::abs((best - vit) - 1.25) <= 0.01 && std::abs((best - resnet) - 3.90) <= 0.01 &&
                    doc.text.find("83.07") != std::string::npos && doc.text.find("1.25") != std::string::npos &&
                    seconds < 1.0;
    return {ok, "AVG ViT-Base " + fmt(vit) + ", best " + fmt(best) + ", gain " + fmt(best - vit) +
                    ", gain over ResNet101 " + fmt(best - resnet) + ", " + fmt(seconds, 3) + " s"};
}

// 2. Holm-Bonferroni and the paired t-test against independent oracles.
Verdict statistics_oracle() {
    std::mt19937_64 rng(2024);
    int holm_mismatch = 0, containment_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 20);
        std::vector<double> p(static_cast<std::size_t>(m));
        for (auto& x : p) {
            const double u = std::uniform_real_distribution<double>(0, 1)(rng);
            x = rng() % 4 == 0 ? u * 0.01 : u;
            if (rng() % 10 == 0 && trial % 2) x = p[0];  // ties
        }
        const double alpha = trial % 3 == 0 ? 0.05 : 0.01;
        const auto got = holm_bonferroni(p, alpha);
        if (got != oracle::holm(p, alpha)) ++holm_mismatch;
        const auto bon = bonferroni(p, alpha);
        for (std::size_t i = 0; i < p.size(); ++i)
            if (bon[i] && !got[i]) ++containment_failures;
    }
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng() % 30;
        std::normal_distribution<double> base(80, 5), shift(0.5 * (trial % 5), 1.0 + trial % 3);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = base(rng);
            b[i] = a[i] + shift(rng);
        }
        worst = std::max(worst, std::abs(paired_t_test(a, b) - oracle::paired_p(a, b)));
    }
    return {holm_mismatch == 0 && containment_failures == 0 && worst <= 1e-6,
            "Holm mismatches " + std::to_string(holm_mismatch) + "/1000, Bonferroni-not-in-Holm " +
                std::to_string(containment_failures) + ", worst t-test p error " + fmt(worst, 3)};
}

// 3. Mask cardinality and uniformity.
Verdict masking_exactness() {
    const int totals[] = {1, 2, 4, 7, 16, 49, 50, 64, 196, 197};
    const double ratios[] = {0.05, 0.25, 0.5, 0.6, 0.75, 0.9, 0.95};
    int plans = 0, wrong = 0;
    for (std::uint64_t seed = 0; plans < 10000; ++seed)
        for (int total : totals)
            for (double ratio : ratios) {
                if (plans == 10000) break;
                const auto plan = sample_mask(total, ratio, seed);
                const auto expected = static_cast<std::size_t>(std::lround(ratio * total));
                const std::set<int> distinct(plan.masked_indices.begin(), plan.masked_indices.end());
                const bool in_range = distinct.empty() || (*distinct.begin() >= 0 && *distinct.rbegin() < total);
                if (plan.masked_indices.size() != expected || distinct.size() != expected || !in_range) ++wrong;
                ++plans;
            }

    // Indicator counts of a uniform without-replacement draw have variance
    // n p (1 - p) and pairwise covariance -n p (1 - p) / (N - 1), so the
    // standardized sum times (N - 1) / N is chi-square with N - 1 dof.
    const int N = 196, draws = 10000;
    std::vector<long> hits(N, 0);
    for (int d = 0; d < draws; ++d)
        for (int i : sample_mask(N, 0.75, 1'000'000 + static_cast<std::uint64_t>(d)).masked_indices) ++hits[i];
    const double p = 147.0 / N, expected = draws * p, var = draws * p * (1 - p);
    double stat = 0;
    for (long h : hits) stat += (h - expected) * (h - expected) / var;
    stat *= (N - 1.0) / N;
    const double critical = boost::math::quantile(boost::math::chi_squared(N - 1), 0.999);
    return {wrong == 0 && stat < critical, std::to_string(plans) + " plans, " + std::to_string(wrong) +
                                               " with wrong cardinality; chi-square " + fmt(stat, 5) +
                                               " (critical " + fmt(critical, 5) + " at 0.001)"};
}

// 4. Loss and gradient are blind to visible patches.
Verdict masked_only_support() {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01(0, 1);
    double worst_loss = 0, worst_grad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int total = 4 + static_cast<int>(rng() % 60), dim = 1 + static_cast<int>(rng() % 48);
        const auto plan = sample_mask(total, 0.75, rng());
        Matrix<double> pred(total, dim), target(total, dim);
        for (Eigen::Index i = 0; i < pred.size(); ++i) {
            pred.data()[i] = n01(rng);
            target.data()[i] = n01(rng);
        }
        Matrix<double> perturbed = target;
        for (int v : plan.visible_indices())
            for (int c = 0; c < dim; ++c) perturbed(v, c) += 100 * n01(rng);
        worst_loss = std::max(worst_loss, std::abs(reconstruction_loss(pred, perturbed, plan) -
                                                   reconstruction_loss(pred, target, plan)));
        const auto g = reconstruction_loss_grad(pred, target, plan);
        for (int v : plan.visible_indices()) worst_grad = std::max(worst_grad, g.row(v).cwiseAbs().maxCoeff());
    }
    return {worst_loss == 0.0 && worst_grad == 0.0,
            "200 plans: max loss change " + fmt(worst_loss) + ", max |grad| at visible " + fmt(worst_grad)};
}

// 5. Analytic vs central-difference gradients of the classifier.
double gradient_check(Activation act) {
    ModelConfig c;
    c.image_size = 16;
    c.patch_size = 8;
    c.depth = 2;
    c.hidden_dim = 16;
    c.num_heads = 2;
    c.activation = act;
    c.num_classes = 3;
    std::mt19937 rng(7);
    std::normal_distribution<double> n01(0, 1);
    std::vector<Matrix<double>> patches;
    for (int i = 0; i < 2; ++i) {
        ImagePlanes<double> im(3, c.image_size * c.image_size);
        for (Eigen::Index k = 0; k < im.size(); ++k) im.data()[k] = n01(rng);
        patches.push_back(patchify(im, c.image_size, c.patch_size));
    }
    const std::vector<const Matrix<double>*> ptrs{&patches[0], &patches[1]};
    const std::vector<int> labels{0, 2};
    auto params = build_model<double>(c, 11);
    for (auto& [name, a] : params)
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += 0.1 * n01(rng);
    auto grads = params.zeros_like();
    classification_loss(params, c, ptrs, labels, 0.0, &grads);
    const double h = 1e-5;
    double worst = 0;
    for (auto& [name, a] : params)
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            const double orig = a.data()[i];
            a.data()[i] = orig + h;
            const double up = classification_loss<double>(params, c, ptrs, labels, 0.0, nullptr);
            a.data()[i] = orig - h;
            const double down = classification_loss<double>(params, c, ptrs, labels, 0.0, nullptr);
            a.data()[i] = orig;
            const double numeric = (up - down) / (2 * h), analytic = grads.at(name).data()[i];
            worst = std::max(worst, std::abs(numeric - analytic) /
                                        std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
        }
    return worst;
}

Verdict gradient_check_criterion() {
    const auto t0 = std::chrono::steady_clock::now();
    const double relu = gradient_check(Activation::relu), gelu = gradient_check(Activation::gelu);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {relu < 1e-4 && gelu < 1e-4 && seconds < 120,
            "worst relative error relu " + fmt(relu, 3) + ", gelu " + fmt(gelu, 3) + ", " + fmt(seconds, 3) + " s"};
}

// 6. Memorization and SSL loss reduction on 64 toy images.
Verdict overfit_sanity(const fs::path& toy) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig model;
    model.image_size = 16;
    model.patch_size = 4;
    model.depth = 2;
    model.hidden_dim = 16;
    model.num_heads = 2;
    model.num_classes = 0;
    const auto bench = load_benchmark(toy / "benchmark");
    auto task = decode_task(bench.task(TaskId::humanitarian), model.image_size, {});
    task.train = synthetic::class_pattern_samples(64, 4, model.image_size, 21);
    task.validation.clear();
    FinetuneConfig ft;
    ft.epochs = 200;
    ft.batch_size = 16;
    ft.schedule.learning_rate = 1e-3;
    const auto [tuned, unused] = finetune(make_checkpoint<float>(model, 1), task, ft, 3);
    const double train_acc = evaluate(tuned, task, kSplitTrain, 3).accuracy;

    ModelConfig ssl_model = model;
    ssl_model.image_size = 32;
    ssl_model.patch_size = 8;
    ssl_model.hidden_dim = 32;
    ssl_model.num_heads = 4;
    const auto images = synthetic::class_pattern_samples(64, 4, ssl_model.image_size, 11);
    SslTrainConfig ssl;
    ssl.epochs = 25;
    ssl.batch_size = 16;
    ssl.decoder_depth = 1;
    ssl.decoder_dim = 32;
    ssl.decoder_heads = 4;
    ssl.learning_rate = 2e-3;
    ssl.weight_decay = 0;
    ssl.seed = 5;
    SslHistory history;
    pretrain_ssl(images, ssl_model, ssl, {}, nullptr, &history);
    const double ratio = history.epoch_loss.back() / history.epoch_loss.front();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {train_acc >= 0.95 && history.steps <= 100 && ratio <= 0.5 && seconds < 600,
            "train accuracy " + fmt(train_acc, 4) + " after 200 epochs; SSL loss ratio " + fmt(ratio, 4) +
                " after " + std::to_string(history.steps) + " steps; " + fmt(seconds, 3) + " s"};
}

// 7. Single-label resolution against a brute-force re-implementation.
std::optional<int> brute_force_resolve(const DatasetManifestEntry& e, const LabelVocabulary& v) {
    std::vector<std::string> listed;
    if (v.name() != "place") listed.insert(listed.end(), e.incident_labels.begin(), e.incident_labels.end());
    if (v.name() != "incident") listed.insert(listed.end(), e.place_labels.begin(), e.place_labels.end());
    for (const auto& label : listed)
        for (std::size_t k = 0; k < v.size(); ++k)
            if (v[k] == label) return static_cast<int>(k);
    return std::nullopt;
}

Verdict label_resolution_oracle() {
    const auto incident = incident_vocabulary();
    const auto place = place_vocabulary();
    const auto joint = joint_vocabulary(incident, place);
    std::mt19937_64 rng(31);
    std::vector<DatasetManifestEntry> entries;
    int multi = 0, place_only = 0, unlabeled = 0;
    for (int i = 0; i < 200; ++i) {
        DatasetManifestEntry e;
        e.entry_id = "a" + std::to_string(i);
        e.url = "http://fixture.invalid/" + e.entry_id;
        const int kind = i % 4;  // 0 unlabeled, 1 place-only, 2 incident-only, 3 both
        auto draw = [&](const LabelVocabulary& v, std::vector<std::string>& out) {
            std::set<std::size_t> used;
            for (int k = 1 + static_cast<int>(rng() % 3); k > 0; --k) used.insert(rng() % v.size());
            for (auto u : used) out.push_back(v[u]);
            std::shuffle(out.begin(), out.end(), rng);
        };
        if (kind == 1 || kind == 3) draw(place, e.place_labels);
        if (kind >= 2) draw(incident, e.incident_labels);
        multi += e.incident_labels.size() + e.place_labels.size() > 1;
        place_only += e.incident_labels.empty() && !e.place_labels.empty();
        unlabeled += !e.has_positive_label();
        entries.push_back(std::move(e));
    }
    int mismatches = 0;
    for (const auto* v : {&incident, &place, &joint}) {
        const auto got = resolve_single_label(entries, *v);
        std::size_t k = 0;
        for (const auto& e : entries) {
            const auto want = brute_force_resolve(e, *v);
            if (!want) continue;
            if (k >= got.size() || got[k].entry_id != e.entry_id || got[k].class_index != *want) ++mismatches;
            ++k;
        }
        if (k != got.size()) ++mismatches;
    }

    DatasetManifestEntry flood;
    flood.entry_id = "flood";
    flood.incident_labels = {*incident.canonical("flood"), *incident.canonical("landslide")};
    flood.place_labels = {place[0]};
    const auto f = resolve_single_label({flood}, incident);
    const bool flood_ok = f.size() == 1 && incident[static_cast<std::size_t>(f[0].class_index)] == *incident.canonical("flood");
    const auto j = resolve_single_label({flood}, joint);
    const bool joint_ok = j.size() == 1 && j[0].class_index < static_cast<int>(incident.size()) &&
                          joint[static_cast<std::size_t>(j[0].class_index)] == *incident.canonical("flood");
    return {mismatches == 0 && flood_ok && joint_ok && multi > 0 && place_only > 0 && unlabeled > 0,
            "200 entries (" + std::to_string(multi) + " multi-label, " + std::to_string(place_only) +
                " place-only, " + std::to_string(unlabeled) + " unlabeled): " + std::to_string(mismatches) +
                " mismatches; [flood, landslide] -> " + (f.empty() ? "none" : incident[static_cast<std::size_t>(f[0].class_index)]) +
                "; joint picks incident first: " + (joint_ok ? "yes" : "no")};
}

// 8. Vocabulary sizes, and loading fails on any deviation.
Verdict vocabulary_constants() {
    const auto incident = incident_vocabulary();
    const auto place = place_vocabulary();
    const auto joint = joint_vocabulary(incident, place);
    bool ok = incident.size() == 43 && place.size() == 49 && joint.size() == 92;
    std::string heads;
    for (TaskId t : kAllTasks) {
        const auto v = task_vocabulary(t);
        heads += (heads.empty() ? "" : "/") + std::to_string(v.size());
        ok = ok && static_cast<int>(v.size()) == expected_class_count(t);
    }
    ok = ok && heads == "7/2/4/3";

    const auto dir = scratch("vocab");
    const auto src = data_dir() / "vocabularies";
    int rejected = 0, attempts = 0;
    auto expect_rejection = [&](const std::string& file, const std::function<void()>& load, int drop, bool duplicate) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        for (const auto& entry : fs::directory_iterator(src)) fs::copy(entry.path(), dir / entry.path().filename());
        std::istringstream in(read_file(dir / file));
        std::vector<std::string> lines;
        for (std::string l; std::getline(in, l);)
            if (!l.empty() && l[0] != '#') lines.push_back(l);
        if (duplicate) lines.push_back(lines.front());
        for (int i = 0; i < drop; ++i) lines.pop_back();
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        write_file_atomic(dir / file, text);
        ++attempts;
        try {
            load();
        } catch (const VocabularyError&) {
            ++rejected;
        }
    };
    expect_rejection("incident.txt", [&] { incident_vocabulary(dir); }, 1, false);
    expect_rejection("place.txt", [&] { place_vocabulary(dir); }, 0, true);
    for (TaskId t : kAllTasks) {
        expect_rejection(to_string(t) + ".txt", [&] { task_vocabulary(t, dir); }, 1, false);
        expect_rejection(to_string(t) + ".txt", [&] { task_vocabulary(t, dir); }, 0, true);
    }
    fs::remove_all(dir);
    return {ok && rejected == attempts, "incident " + std::to_string(incident.size()) + ", place " +
                                            std::to_string(place.size()) + ", joint " + std::to_string(joint.size()) +
                                            ", task heads " + heads + "; " + std::to_string(rejected) + "/" +
                                            std::to_string(attempts) + " altered files rejected"};
}

// 9. Determinism, checkpoint round trip and resume after a kill.
nlohmann::json toy_experiment(const fs::path& toy, const fs::path& out) {
    return {{"id", "acceptance-toy"},
            {"model", {{"image_size", 16}, {"patch_size", 4}, {"depth", 2}, {"hidden_dim", 16}, {"num_heads", 2}}},
            {"data", {{"incidents", (toy / "incidents").string()}, {"benchmark", (toy / "benchmark").string()}}},
            {"stages",
             {{{"kind", "ssl"}, {"epochs", 2}, {"batch_size", 16}, {"decoder_depth", 1}, {"decoder_dim", 8},
               {"decoder_heads", 2}},
              {{"kind", "multiclass_places"}, {"epochs", 2}, {"batch_size", 16}}}},
            {"finetune", {{"epochs", 2}, {"batch_size", 16}}},
            {"n_runs", 3},
            {"output_dir", out.string()}};
}

Verdict determinism_and_lineage(const fs::path& toy) {
    ::setenv("CRISISVIT_DETERMINISTIC", "1", 1);
    const auto a = run_experiment(parse_experiment(toy_experiment(toy, scratch("det_a")), "."));
    const auto b = run_experiment(parse_experiment(toy_experiment(toy, scratch("det_b")), "."));
    double score_diff = 0;
    for (std::size_t t = 0; t < 4; ++t) score_diff = std::max(score_diff, std::abs(a.row.score.means[t] - b.row.score.means[t]));
    const bool same_fingerprint = a.artifact_dir.filename() == b.artifact_dir.filename();

    ModelConfig c = parse_experiment(toy_experiment(toy, "/tmp"), ".").model;
    c.num_classes = 5;
    const auto ckpt = make_checkpoint<float>(c, 4);
    const auto path = scratch("roundtrip") / "model.ckpt";
    save_checkpoint(ckpt, path);
    const auto loaded = load_checkpoint<float>(path);
    const auto images = synthetic::class_pattern_samples(6, 3, c.image_size, 2);
    ImageTensorBatch<float> batch;
    batch.image_size = c.image_size;
    batch.channels = c.channels;
    for (const auto& s : images) batch.push_back(s.pixels, s.id);
    const double roundtrip =
        (forward_logits(loaded.params, c, batch) - forward_logits(ckpt.params, c, batch)).cwiseAbs().maxCoeff();

    // Kill the run outright after its first stage is on disk, then resume.
    const auto e = parse_experiment(toy_experiment(toy, scratch("killed")), ".");
    std::cout.flush();
    const pid_t child = ::fork();
    if (child == 0) {
        RunOptions opts;
        opts.observer = [](const nlohmann::json& r) {
            if (r.value("type", "") == "stage_finish") ::raise(SIGKILL);
        };
        try {
            run_experiment(e, opts);
        } catch (...) {
        }
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(child, &status, 0);
    const bool killed = WIFSIGNALED(status) && WTERMSIG(status) == SIGKILL;
    const auto before = RunLedger::read(e.artifact_dir() / "ledger.jsonl");
    std::set<std::string> finished_before;
    for (const auto& r : before)
        if (r.value("type", "") == "stage_finish") finished_before.insert(r["key"].get<std::string>());
    const auto resumed = run_experiment(e);
    const auto after = RunLedger::read(e.artifact_dir() / "ledger.jsonl");
    int reexecuted = 0;
    for (std::size_t i = before.size(); i < after.size(); ++i)
        if (after[i].value("type", "") == "stage_start" && finished_before.count(after[i]["key"].get<std::string>()))
            ++reexecuted;
    double resume_diff = 0;
    for (std::size_t t = 0; t < 4; ++t)
        resume_diff = std::max(resume_diff, std::abs(resumed.row.score.means[t] - a.row.score.means[t]));

    const bool ok = same_fingerprint && score_diff <= 1e-6 && roundtrip <= 1e-6 && killed &&
                    finished_before.size() == 1 && reexecuted == 0 && resumed.stages_executed == 1 &&
                    resume_diff <= 1e-6;
    return {ok, "scorecard difference " + fmt(score_diff, 3) + "; round-trip logit difference " + fmt(roundtrip, 3) +
                    "; killed after " + std::to_string(finished_before.size()) + " stage(s), resume re-executed " +
                    std::to_string(reexecuted) + " and ran " + std::to_string(resumed.stages_executed) +
                    " remaining; resumed scorecard difference " + fmt(resume_diff, 3)};
}

// 10. Retrieval accounting against a local server with 687 of 1000 URLs live.
Verdict ingestion_accounting() {
    std::vector<int> order(1000);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937(687));
    std::set<int> live(order.begin(), order.begin() + 687);

    httplib::Server server;
    server.Get(R"(/img/(\d+)\.jpg)", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = std::stoi(req.matches[1]);
        if (live.count(n))
            res.set_content("bytes-of-" + std::to_string(n), "image/jpeg");
        else
            res.status = 404;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<DatasetManifestEntry> entries;
    for (int i = 0; i < 1000; ++i) {
        DatasetManifestEntry e;
        e.entry_id = "u" + std::to_string(i);
        e.url = "http://127.0.0.1:" + std::to_string(port) + "/img/" + std::to_string(i) + ".jpg";
        entries.push_back(std::move(e));
    }
    const ContentStore store(scratch("crawl") / "store");
    CrawlPolicy policy;
    policy.retries = 0;
    const auto first = crawl(entries, store, policy);
    const auto second = crawl(entries, store, policy);
    policy.retry_failed = false;
    const auto third = crawl(entries, store, policy);
    server.stop();
    listener.join();

    const bool ok = first.total == 1000 && first.fetched == 687 && first.failures.size() == 313 &&
                    std::abs(first.retrieval_fraction() - 0.687) < 1e-12 && second.new_fetches == 0 &&
                    second.fetched == 687 && third.requests_issued == 0;
    return {ok, "fraction " + fmt(first.retrieval_fraction()) + " (" + std::to_string(first.fetched) + " fetched, " +
                    std::to_string(first.failures.size()) + " failures recorded); re-run new fetches " +
                    std::to_string(second.new_fetches) + ", requests without retrying failures " +
                    std::to_string(third.requests_issued)};
}

}  // namespace

int main() {
    const auto toy = scratch("toy");
    synthetic::ToyCorpusSpec spec;
    spec.image_size = 16;
    spec.manifest_entries = 60;
    spec.train_per_task = 16;
    spec.validation_per_task = 8;
    spec.test_per_task = 8;
    synthetic::write_toy_corpus(toy, spec);

    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"Table derived quantities", table_derived_quantities},
        {"Statistics oracle", statistics_oracle},
        {"Masking exactness", masking_exactness},
        {"Masked-only loss support", masked_only_support},
        {"Gradient check", gradient_check_criterion},
        {"Overfit sanity", [&] { return overfit_sanity(toy); }},
        {"Label-resolution oracle", label_resolution_oracle},
        {"Vocabulary constants", vocabulary_constants},
        {"Determinism & lineage", [&] { return determinism_and_lineage(toy); }},
        {"Ingestion accounting", ingestion_accounting},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << v.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}

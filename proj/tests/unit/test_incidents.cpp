#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "crisisvit/crawler.hpp"
#include "crisisvit/digest.hpp"
#include "crisisvit/label_resolution.hpp"
#include "crisisvit/synthetic.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace crisisvit;
namespace fs = std::filesystem;

namespace {

const LabelVocabulary& incident() {
    static const LabelVocabulary v = incident_vocabulary();
    return v;
}
const LabelVocabulary& place() {
    static const LabelVocabulary v = place_vocabulary();
    return v;
}

DatasetManifestEntry entry(std::string id, std::vector<std::string> inc, std::vector<std::string> plc) {
    DatasetManifestEntry e;
    e.entry_id = std::move(id);
    e.url = "http://example.invalid/" + e.entry_id + ".jpg";
    for (auto& l : inc) e.incident_labels.push_back(*incident().canonical(l));
    for (auto& l : plc) e.place_labels.push_back(*place().canonical(l));
    return e;
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("crisisvit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("shipped vocabularies have the expected sizes and joint order") {
    CHECK(incident().size() == 43);
    CHECK(place().size() == 49);
    const auto joint = joint_vocabulary(incident(), place());
    CHECK(joint.size() == 92);
    for (std::size_t i = 0; i < 43; ++i) CHECK(joint[i] == incident()[i]);
    for (std::size_t i = 0; i < 49; ++i) CHECK(joint[43 + i] == place()[i]);
    CHECK(*incident().canonical("flood") == "flooded");
    CHECK(*incident().canonical("fire") == "on fire");
    CHECK(incident().version() != place().version());
}

TEST_CASE("vocabulary loading rejects wrong sizes and duplicates") {
    const auto dir = temp_dir("vocab");
    {
        std::ofstream out(dir / "incident.txt");
        for (int i = 0; i < 42; ++i) out << "class " << i << "\n";
    }
    CHECK_THROWS_AS(incident_vocabulary(dir), VocabularyError);
    {
        std::ofstream out(dir / "place.txt");
        for (int i = 0; i < 48; ++i) out << "class " << i << "\n";
        out << "class 0\n";
    }
    CHECK_THROWS_AS(place_vocabulary(dir), VocabularyError);
}

TEST_CASE("manifest parsing accounts for every line") {
    SUBCASE("empty file") {
        std::istringstream in("");
        const auto r = parse_manifest(in, incident(), place());
        CHECK(r.entries.empty());
        CHECK(r.summary.total == 0);
        CHECK(r.summary.positive == 0);
        CHECK(r.rejected.empty());
    }
    SUBCASE("mixed records") {
        std::istringstream in(
            R"({"entry_id":"a","url":"u1","incident_labels":["flood","landslide"],"place_labels":["river"]})" "\n"
            R"({"entry_id":"b","url":"u2","incident_labels":[],"place_labels":["forest"],"status":"fetched","digest":"abcd"})" "\n"
            "\n"
            R"({"entry_id":"c","url":"u3","incident_labels":["alien invasion"]})" "\n"
            "not json\n"
            R"({"entry_id":"d","url":"u4","status":"fetched"})" "\n"
            R"({"entry_id":"a","url":"u5"})" "\n"
            R"({"entry_id":"e","url":"u6","incident_labels":["fire","on fire"]})" "\n"
            R"({"entry_id":"f","url":"u7"})" "\n");
        const auto r = parse_manifest(in, incident(), place());
        REQUIRE(r.entries.size() == 3);
        CHECK(r.entries[0].incident_labels == std::vector<std::string>{"flooded", "landslide"});
        REQUIRE(r.rejected.size() == 5);
        CHECK(r.rejected[0].line == 4);
        CHECK(r.rejected[0].reason.find("alien invasion") != std::string::npos);
        CHECK(r.rejected[1].line == 5);
        CHECK(r.rejected[2].reason.find("digest") != std::string::npos);
        CHECK(r.rejected[3].reason.find("duplicate entry_id") != std::string::npos);
        CHECK(r.rejected[4].reason.find("duplicate") != std::string::npos);
        CHECK(r.summary.total == 3);
        CHECK(r.summary.positive == 2);
        CHECK(r.summary.incident_positive == 1);
        CHECK(r.summary.place_positive == 2);
        CHECK(r.summary.fetched == 1);
        CHECK(r.summary.pending == 2);
        CHECK(r.summary.rejected == 5);
    }
}

TEST_CASE("manifest save/load preserves records") {
    const auto dir = temp_dir("manifest_rt");
    std::vector<DatasetManifestEntry> entries{entry("x", {"earthquake", "collapsed"}, {"street"}), entry("y", {}, {})};
    entries[1].status = RetrievalStatus::failed;
    entries[1].failure_reason = "http status 404";
    save_manifest(dir / "m.jsonl", entries);
    const auto loaded = load_manifest(dir / "m.jsonl", incident(), place());
    REQUIRE(loaded.entries.size() == 2);
    CHECK(loaded.entries[0].incident_labels == entries[0].incident_labels);
    CHECK(loaded.entries[1].status == RetrievalStatus::failed);
    CHECK(loaded.entries[1].failure_reason == "http status 404");
}

TEST_CASE("first listed label wins") {
    const std::vector<DatasetManifestEntry> es{entry("1", {"flood", "landslide"}, {}),
                                               entry("2", {}, {"forest"}),
                                               entry("3", {"fire"}, {"forest"}),
                                               entry("4", {}, {})};
    const auto inc = resolve_single_label(es, incident());
    REQUIRE(inc.size() == 2);
    CHECK(inc[0].entry_id == "1");
    CHECK(incident()[static_cast<std::size_t>(inc[0].class_index)] == "flooded");
    CHECK(inc[1].entry_id == "3");

    const auto plc = resolve_single_label(es, place());
    REQUIRE(plc.size() == 2);
    CHECK(place()[static_cast<std::size_t>(plc[1].class_index)] == "forest");

    const auto joint = joint_vocabulary(incident(), place());
    const auto j = resolve_single_label(es, joint);
    REQUIRE(j.size() == 3);
    CHECK(joint[static_cast<std::size_t>(j[2].class_index)] == "on fire");
    CHECK(j[2].vocabulary_version == joint.version());

    CHECK_THROWS_AS(resolve_single_label(es, LabelVocabulary("disaster_types", {"a", "b"})), ConfigError);
}

TEST_CASE("resolution is a per-entry function and never invents labels") {
    std::mt19937 rng(17);
    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 120; ++i) {
        std::vector<std::string> inc, plc;
        std::uniform_int_distribution<int> count(0, 3);
        std::set<std::size_t> used;
        for (int k = count(rng); k > 0; --k) used.insert(rng() % 43);
        for (auto u : used) inc.push_back(incident()[u]);
        used.clear();
        for (int k = count(rng); k > 0; --k) used.insert(rng() % 49);
        for (auto u : used) plc.push_back(place()[u]);
        std::shuffle(inc.begin(), inc.end(), rng);
        es.push_back(entry("e" + std::to_string(i), inc, plc));
    }
    const auto joint = joint_vocabulary(incident(), place());
    for (const auto* vocab : {&incident(), &place(), &joint}) {
        const auto base = resolve_single_label(es, *vocab);
        std::map<std::string, int> by_id;
        for (const auto& r : base) {
            by_id[r.entry_id] = r.class_index;
            const auto& e = *std::find_if(es.begin(), es.end(), [&](auto& x) { return x.entry_id == r.entry_id; });
            CHECK(e.lists((*vocab)[static_cast<std::size_t>(r.class_index)]));
        }
        auto shuffled = es;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto permuted = resolve_single_label(shuffled, *vocab);
        REQUIRE(permuted.size() == base.size());
        std::size_t k = 0;
        for (const auto& e : shuffled) {
            if (!by_id.count(e.entry_id)) continue;
            CHECK(permuted[k].entry_id == e.entry_id);
            CHECK(permuted[k].class_index == by_id[e.entry_id]);
            ++k;
        }
    }
}

TEST_CASE("binary tasks") {
    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 100; ++i) es.push_back(entry("f" + std::to_string(i), {"flood"}, {}));
    for (int i = 0; i < 150; ++i) es.push_back(entry("o" + std::to_string(i), {"earthquake"}, {"street"}));

    const auto t = make_binary_task(es, "flood", incident(), place(), 1.0, 3);
    CHECK(t.class_name == "flooded");
    CHECK(t.positives.size() == 100);
    CHECK(t.negatives.size() == 100);
    std::set<std::string> pos(t.positives.begin(), t.positives.end());
    for (const auto& n : t.negatives) {
        CHECK_FALSE(pos.count(n));
        CHECK(n[0] == 'o');
    }
    CHECK(make_binary_task(es, "flood", incident(), place(), 1.0, 3).negatives == t.negatives);

    const auto empty = make_binary_task(es, "sinkhole", incident(), place());
    CHECK(empty.skipped);
    CHECK_FALSE(empty.warning.empty());
    CHECK_THROWS_AS(make_binary_task(es, "weather", incident(), place()), VocabularyError);
}

TEST_CASE("binary positives over all 92 classes cover every labeled entry") {
    std::mt19937 rng(5);
    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 50; ++i) {
        std::vector<std::string> inc, plc;
        if (rng() % 3) inc.push_back(incident()[rng() % 43]);
        if (rng() % 2) plc.push_back(place()[rng() % 49]);
        if (rng() % 4 == 0) {
            const auto extra = incident()[rng() % 43];
            if (std::find(inc.begin(), inc.end(), extra) == inc.end()) inc.push_back(extra);
        }
        es.push_back(entry("m" + std::to_string(i), inc, plc));
    }
    // brute force: count (entry, label) pairs and labeled entries directly
    std::size_t pairs = 0, labeled = 0;
    for (const auto& e : es) {
        pairs += e.incident_labels.size() + e.place_labels.size();
        labeled += e.has_positive_label() ? 1 : 0;
    }
    std::size_t total = 0;
    const auto joint = joint_vocabulary(incident(), place());
    for (const auto& name : joint.classes())
        total += make_binary_task(es, name, incident(), place()).positives.size();
    CHECK(total == pairs);
    CHECK(total >= labeled);
}

TEST_CASE("holdout assignment is deterministic and near five percent") {
    std::size_t held = 0;
    for (int i = 0; i < 20000; ++i) held += is_holdout("id" + std::to_string(i), 1) ? 1 : 0;
    CHECK(held > 850);
    CHECK(held < 1150);
    CHECK(is_holdout("id7", 1) == is_holdout("id7", 1));
}

TEST_CASE("crawl records failures without aborting and is idempotent") {
    const auto dir = temp_dir("crawl_fake");
    ContentStore store(dir / "store");
    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 10; ++i) es.push_back(entry("c" + std::to_string(i), {}, {}));
    std::atomic<int> calls{0};
    Fetcher fake = [&](const std::string& url, const CrawlPolicy&) {
        ++calls;
        FetchResult r;
        const int n = url.back() == 'g' ? url[url.size() - 5] - '0' : 0;
        if (n < 7) {
            r.ok = true;
            r.body = "bytes of " + url;
        } else {
            r.error = "http status 404";
        }
        return r;
    };
    CrawlPolicy policy;
    policy.retries = 1;
    policy.concurrency = 3;
    const auto report = crawl(es, store, policy, fake);
    CHECK(report.fetched == 7);
    CHECK(report.failed == 3);
    CHECK(report.retrieval_fraction() == doctest::Approx(0.7));
    CHECK(report.failures.size() == 3);
    CHECK(calls.load() == 7 + 3 * 2);
    for (const auto& e : es)
        if (e.status == RetrievalStatus::fetched) CHECK(store.has(e.content_digest));

    // drop the failures; a re-run over fully fetched entries issues nothing
    es.erase(std::remove_if(es.begin(), es.end(), [](auto& e) { return e.status != RetrievalStatus::fetched; }),
             es.end());
    calls = 0;
    const auto again = crawl(es, store, policy, fake);
    CHECK(calls.load() == 0);
    CHECK(again.requests_issued == 0);
    CHECK(again.skipped == 7);
    CHECK(again.retrieval_fraction() == 1.0);
}

TEST_CASE("crawl over a local http server") {
    httplib::Server server;
    server.Get(R"(/img/(\d+))", [](const httplib::Request& req, httplib::Response& res) {
        const int n = std::stoi(req.matches[1]);
        if (n % 2 == 0)
            res.set_content("image-" + std::to_string(n), "image/jpeg");
        else
            res.status = 410;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 6; ++i) {
        auto e = entry("h" + std::to_string(i), {}, {});
        e.url = "http://127.0.0.1:" + std::to_string(port) + "/img/" + std::to_string(i);
        es.push_back(e);
    }
    const auto dir = temp_dir("crawl_http");
    ContentStore store(dir / "store");
    CrawlPolicy policy;
    policy.retries = 0;
    policy.rate_limit_per_host = 200;
    std::vector<std::size_t> checkpoints;
    const auto report = crawl(es, store, policy, default_fetch,
                              [&](const auto& snapshot) { checkpoints.push_back(snapshot.size()); });
    server.stop();
    t.join();
    CHECK(report.fetched == 3);
    CHECK(report.retrieval_fraction() == doctest::Approx(0.5));
    CHECK(es[1].failure_reason == "http status 410");
    CHECK(es[0].content_digest == sha256_hex("image-0"));
    CHECK_FALSE(checkpoints.empty());
}

TEST_CASE("undecodable images are counted, skipped and can abort") {
    const auto dir = temp_dir("decode");
    ContentStore store(dir / "store");
    std::vector<DatasetManifestEntry> es;
    for (int i = 0; i < 4; ++i) {
        auto e = entry("d" + std::to_string(i), {}, {});
        e.status = RetrievalStatus::fetched;
        if (i == 2) {
            e.content_digest = store.put("definitely not an image");
        } else {
            const auto png = dir / "tmp.png";
            write_png(png, 20, 24, synthetic::class_pattern_rgb(24, i, 4, 1));
            e.content_digest = store.put(std::string(std::istreambuf_iterator<char>(std::ifstream(png, std::ios::binary).rdbuf()), {}));
        }
        es.push_back(e);
    }
    std::vector<const DatasetManifestEntry*> ptrs;
    for (const auto& e : es) ptrs.push_back(&e);
    DecodeReport report;
    const auto samples = decode_entries(ptrs, store, 16, {}, report, 0.5);
    CHECK(samples.size() == 3);
    CHECK(report.failures.size() == 1);
    CHECK(report.failures[0].first == "d2");
    CHECK(samples[2].id == "d3");
    CHECK(samples[0].pixels.rows() == 3);
    CHECK(samples[0].pixels.cols() == 256);

    DecodeReport strict;
    CHECK_THROWS_AS(decode_entries(ptrs, store, 16, {}, strict, 0.1), DataError);
}

#include "crisisvit/manifest.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "crisisvit/digest.hpp"
#include "crisisvit/errors.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit {

std::string to_string(RetrievalStatus s) {
    switch (s) {
        case RetrievalStatus::pending: return "pending";
        case RetrievalStatus::fetched: return "fetched";
        case RetrievalStatus::failed: return "failed";
    }
    return "pending";
}

RetrievalStatus retrieval_status_from_string(const std::string& s) {
    if (s == "pending") return RetrievalStatus::pending;
    if (s == "fetched") return RetrievalStatus::fetched;
    if (s == "failed") return RetrievalStatus::failed;
    throw DataError("unknown retrieval status '" + s + "'");
}

bool DatasetManifestEntry::lists(const std::string& label) const {
    return std::find(incident_labels.begin(), incident_labels.end(), label) != incident_labels.end() ||
           std::find(place_labels.begin(), place_labels.end(), label) != place_labels.end();
}

nlohmann::json to_json_record(const DatasetManifestEntry& e) {
    nlohmann::json out = {{"entry_id", e.entry_id},
                          {"url", e.url},
                          {"incident_labels", e.incident_labels},
                          {"place_labels", e.place_labels},
                          {"status", to_string(e.status)}};
    if (!e.content_digest.empty()) out["digest"] = e.content_digest;
    if (!e.failure_reason.empty()) out["failure"] = e.failure_reason;
    return out;
}

nlohmann::json ManifestSummary::to_json() const {
    return {{"total", total},       {"positive", positive}, {"incident_positive", incident_positive},
            {"place_positive", place_positive}, {"fetched", fetched}, {"failed", failed},
            {"pending", pending},   {"rejected", rejected}};
}

ManifestSummary summarize(const std::vector<DatasetManifestEntry>& entries) {
    ManifestSummary s;
    for (const auto& e : entries) {
        ++s.total;
        if (e.has_positive_label()) ++s.positive;
        if (!e.incident_labels.empty()) ++s.incident_positive;
        if (!e.place_labels.empty()) ++s.place_positive;
        switch (e.status) {
            case RetrievalStatus::fetched: ++s.fetched; break;
            case RetrievalStatus::failed: ++s.failed; break;
            case RetrievalStatus::pending: ++s.pending; break;
        }
    }
    return s;
}

namespace {

std::vector<std::string> parse_labels(const nlohmann::json& record, const char* field, const LabelVocabulary& vocab) {
    std::vector<std::string> out;
    if (!record.contains(field)) return out;
    const auto& arr = record.at(field);
    if (!arr.is_array()) throw DataError(std::string(field) + " is not an array");
    std::set<std::string> seen;
    for (const auto& v : arr) {
        if (!v.is_string()) throw DataError(std::string(field) + " holds a non-string label");
        const auto canon = vocab.canonical(v.get<std::string>());
        if (!canon) throw DataError("unknown " + vocab.name() + " label '" + v.get<std::string>() + "'");
        if (!seen.insert(*canon).second) throw DataError("duplicate " + vocab.name() + " label '" + *canon + "'");
        out.push_back(*canon);
    }
    return out;
}

}  // namespace

ManifestLoadResult parse_manifest(std::istream& in, const LabelVocabulary& incident, const LabelVocabulary& place) {
    ManifestLoadResult result;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json r;
            try {
                r = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw DataError("malformed JSON");
            }
            if (!r.is_object()) throw DataError("record is not an object");
            DatasetManifestEntry e;
            if (!r.contains("entry_id") || !r["entry_id"].is_string() || r["entry_id"].get<std::string>().empty())
                throw DataError("missing entry_id");
            if (!r.contains("url") || !r["url"].is_string()) throw DataError("missing url");
            e.entry_id = r["entry_id"].get<std::string>();
            e.url = r["url"].get<std::string>();
            e.incident_labels = parse_labels(r, "incident_labels", incident);
            e.place_labels = parse_labels(r, "place_labels", place);
            e.status = retrieval_status_from_string(r.value("status", std::string("pending")));
            e.content_digest = r.value("digest", std::string());
            e.failure_reason = r.value("failure", std::string());
            if (e.status == RetrievalStatus::fetched && e.content_digest.empty())
                throw DataError("fetched record has no digest");
            if (!ids.insert(e.entry_id).second) throw DataError("duplicate entry_id '" + e.entry_id + "'");
            result.entries.push_back(std::move(e));
        } catch (const DataError& err) {
            result.rejected.push_back({lineno, err.what()});
        }
    }
    result.summary = summarize(result.entries);
    result.summary.rejected = result.rejected.size();
    return result;
}

ManifestLoadResult load_manifest(const std::filesystem::path& path, const LabelVocabulary& incident,
                                 const LabelVocabulary& place) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    return parse_manifest(in, incident, place);
}

void save_manifest(const std::filesystem::path& path, const std::vector<DatasetManifestEntry>& entries) {
    std::string text;
    for (const auto& e : entries) text += to_json_record(e).dump() + '\n';
    write_file_atomic(path, text);
}

bool is_holdout(const std::string& entry_id, std::uint64_t seed, double holdout_fraction) {
    const std::uint64_t h = derive_seed(seed, entry_id);
    return static_cast<double>(h % 1000000ULL) < holdout_fraction * 1e6;
}

ContentStore::ContentStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ContentStore::path_for(const std::string& digest) const {
    if (digest.size() < 3) throw DataError("malformed content digest '" + digest + "'");
    return root_ / digest.substr(0, 2) / digest;
}

bool ContentStore::has(const std::string& digest) const {
    return !digest.empty() && std::filesystem::exists(path_for(digest));
}

std::string ContentStore::put(const std::string& bytes) const {
    const std::string digest = sha256_hex(bytes);
    const auto path = path_for(digest);
    if (std::filesystem::exists(path)) return digest;
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("cannot write to content store: " + path.string());
    }
    std::filesystem::rename(tmp, path);
    return digest;
}

std::vector<unsigned char> ContentStore::read(const std::string& digest) const {
    std::ifstream in(path_for(digest), std::ios::binary);
    if (!in) throw DataError("content " + digest + " is not in the store");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SampleSet decode_entries(const std::vector<const DatasetManifestEntry*>& entries, const ContentStore& store,
                         int image_size, const Normalization& norm, DecodeReport& report,
                         double max_failure_fraction, unsigned workers) {
    const std::size_t n = entries.size();
    std::vector<std::optional<Sample>> slots(n);
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const auto& e = *entries[i];
            try {
                if (e.status != RetrievalStatus::fetched) throw DataError("not fetched");
                Sample s;
                s.id = e.entry_id;
                s.pixels = decode_image(store.read(e.content_digest), image_size, norm);
                slots[i] = std::move(s);
            } catch (const Error& err) {
                errors[i] = err.what();
            }
        }
    };
    if (workers == 0) workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    if (const char* det = std::getenv("CRISISVIT_DETERMINISTIC"); det && std::string(det) == "1") workers = 1;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }

    SampleSet out;
    report.attempted += n;
    for (std::size_t i = 0; i < n; ++i) {
        if (slots[i]) {
            out.push_back(std::move(*slots[i]));
            ++report.decoded;
        } else {
            report.failures.emplace_back(entries[i]->entry_id, errors[i]);
        }
    }
    if (report.failure_fraction() > max_failure_fraction) {
        std::ostringstream msg;
        msg << report.failures.size() << " of " << report.attempted << " images could not be decoded (limit "
            << max_failure_fraction << ")";
        throw DataError(msg.str());
    }
    return out;
}

}  // namespace crisisvit

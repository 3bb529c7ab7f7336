#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "crisisvit/dataset.hpp"
#include "crisisvit/model_config.hpp"
#include "crisisvit/vocabulary.hpp"
#include "json.hpp"

namespace crisisvit {

enum class RetrievalStatus { pending, fetched, failed };

std::string to_string(RetrievalStatus s);
RetrievalStatus retrieval_status_from_string(const std::string& s);

/// One manifest record. Label order is the order listed in the source
/// manifest and drives single-label resolution.
struct DatasetManifestEntry {
    std::string entry_id;
    std::string url;
    std::vector<std::string> incident_labels;
    std::vector<std::string> place_labels;
    RetrievalStatus status = RetrievalStatus::pending;
    std::string content_digest;  // set when fetched
    std::string failure_reason;  // set when failed

    bool has_positive_label() const { return !incident_labels.empty() || !place_labels.empty(); }
    bool lists(const std::string& label) const;
};

nlohmann::json to_json_record(const DatasetManifestEntry& e);

struct ManifestSummary {
    std::size_t total = 0;
    std::size_t positive = 0;           // at least one incident or place label
    std::size_t incident_positive = 0;
    std::size_t place_positive = 0;
    std::size_t fetched = 0;
    std::size_t failed = 0;
    std::size_t pending = 0;
    std::size_t rejected = 0;

    nlohmann::json to_json() const;
};

ManifestSummary summarize(const std::vector<DatasetManifestEntry>& entries);

struct RejectedRecord {
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct ManifestLoadResult {
    std::vector<DatasetManifestEntry> entries;
    std::vector<RejectedRecord> rejected;
    ManifestSummary summary;
};

/// Parses line-delimited JSON records
///   {"entry_id", "url", "incident_labels": [...], "place_labels": [...],
///    "status": "pending|fetched|failed", "digest", "failure"}
/// Labels are mapped to their canonical vocabulary spelling. Malformed lines,
/// unknown labels, duplicate labels or ids, and fetched records without a
/// digest are rejected with their line number; blank lines are skipped.
ManifestLoadResult parse_manifest(std::istream& in, const LabelVocabulary& incident, const LabelVocabulary& place);
ManifestLoadResult load_manifest(const std::filesystem::path& path, const LabelVocabulary& incident,
                                 const LabelVocabulary& place);

/// Rewrites the manifest atomically (temp file + rename).
void save_manifest(const std::filesystem::path& path, const std::vector<DatasetManifestEntry>& entries);

/// Deterministic held-out assignment by hash of (seed, entry_id).
bool is_holdout(const std::string& entry_id, std::uint64_t seed, double holdout_fraction = 0.05);

/// Content-addressed image store: <root>/<digest[0:2]>/<digest>.
class ContentStore {
public:
    explicit ContentStore(std::filesystem::path root);

    std::filesystem::path path_for(const std::string& digest) const;
    bool has(const std::string& digest) const;
    /// Stores the bytes and returns their SHA-256 digest.
    std::string put(const std::string& bytes) const;
    std::vector<unsigned char> read(const std::string& digest) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

/// Decodes fetched entries into samples (labels left at -1). Undecodable or
/// missing images are counted and skipped; if their fraction exceeds
/// `max_failure_fraction` a DataError is thrown. Decoding fans out over
/// `workers` threads; output order always follows `entries`.
SampleSet decode_entries(const std::vector<const DatasetManifestEntry*>& entries, const ContentStore& store,
                         int image_size, const Normalization& norm, DecodeReport& report,
                         double max_failure_fraction = 0.05, unsigned workers = 0);

}  // namespace crisisvit

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crisisvit/manifest.hpp"
#include "crisisvit/vocabulary.hpp"

namespace crisisvit {

struct ResolvedExample {
    std::string entry_id;
    int class_index = -1;
    std::string vocabulary;          // incident | place | joint
    std::string vocabulary_version;

    friend bool operator==(const ResolvedExample&, const ResolvedExample&) = default;
};

/// One example per entry that has a label in the vocabulary's scope, keyed
/// to the first listed applicable label. The joint scope reads the incident
/// list followed by the place list. Entries without an in-scope label are
/// left out. Throws ConfigError for vocabularies other than
/// incident/place/joint.
std::vector<ResolvedExample> resolve_single_label(const std::vector<DatasetManifestEntry>& entries,
                                                  const LabelVocabulary& vocabulary);

struct BinaryTask {
    std::string class_name;
    std::vector<std::string> positives;  // entry ids
    std::vector<std::string> negatives;
    bool skipped = false;
    std::string warning;
};

/// One-vs-rest task for `class_name`: every entry listing it is positive;
/// round(negative_ratio * positives) negatives are drawn (seeded, without
/// replacement, capped by availability) from entries not listing it.
/// A class with no positives yields a skipped task carrying a warning.
BinaryTask make_binary_task(const std::vector<DatasetManifestEntry>& entries, const std::string& class_name,
                            const LabelVocabulary& incident, const LabelVocabulary& place,
                            double negative_ratio = 1.0, std::uint64_t seed = 0);

}  // namespace crisisvit

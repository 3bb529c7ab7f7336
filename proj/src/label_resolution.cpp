#include "crisisvit/label_resolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crisisvit/errors.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit {

std::vector<ResolvedExample> resolve_single_label(const std::vector<DatasetManifestEntry>& entries,
                                                  const LabelVocabulary& vocabulary) {
    const std::string& scope = vocabulary.name();
    const bool use_incident = scope == "incident" || scope == "joint";
    const bool use_place = scope == "place" || scope == "joint";
    if (!use_incident && !use_place)
        throw ConfigError("resolve_single_label: vocabulary '" + scope + "' is not incident, place or joint");

    std::vector<ResolvedExample> out;
    for (const auto& e : entries) {
        std::optional<int> idx;
        if (use_incident)
            for (const auto& label : e.incident_labels)
                if ((idx = vocabulary.index_of(label))) break;
        if (!idx && use_place)
            for (const auto& label : e.place_labels)
                if ((idx = vocabulary.index_of(label))) break;
        if (idx) out.push_back({e.entry_id, *idx, scope, vocabulary.version()});
    }
    return out;
}

BinaryTask make_binary_task(const std::vector<DatasetManifestEntry>& entries, const std::string& class_name,
                            const LabelVocabulary& incident, const LabelVocabulary& place, double negative_ratio,
                            std::uint64_t seed) {
    std::string canon;
    if (auto c = incident.canonical(class_name))
        canon = *c;
    else if (auto p = place.canonical(class_name))
        canon = *p;
    else
        throw VocabularyError("'" + class_name + "' is neither an incident nor a place class");
    if (negative_ratio < 0) throw ConfigError("negative_ratio: must be >= 0");

    BinaryTask task;
    task.class_name = canon;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].lists(canon))
            task.positives.push_back(entries[i].entry_id);
        else
            pool.push_back(i);
    }
    if (task.positives.empty()) {
        task.skipped = true;
        task.warning = "class '" + canon + "' has no positive examples; task skipped";
        return task;
    }
    const auto want = std::min<std::size_t>(
        pool.size(), static_cast<std::size_t>(std::llround(negative_ratio * static_cast<double>(task.positives.size()))));
    Rng rng(derive_seed(seed, canon));
    for (std::size_t i = 0; i < want; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(want);
    std::sort(pool.begin(), pool.end());
    for (std::size_t i : pool) task.negatives.push_back(entries[i].entry_id);
    return task;
}

}  // namespace crisisvit

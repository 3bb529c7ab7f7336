#pragma once

#include <string>
#include <vector>

#include "crisisvit/manifest.hpp"
#include "crisisvit/synthetic.hpp"

namespace fixtures {

inline crisisvit::ModelConfig tiny_model(int image = 16, int patch = 4, int hidden = 16, int heads = 2) {
    crisisvit::ModelConfig c;
    c.image_size = image;
    c.patch_size = patch;
    c.depth = 2;
    c.hidden_dim = hidden;
    c.num_heads = heads;
    c.num_classes = 0;
    return c;
}

/// Decoded pattern images plus manifest entries whose first listed place
/// label is the pattern class and whose incident label cycles independently.
struct LabeledCorpus {
    crisisvit::SampleSet images;
    std::vector<crisisvit::DatasetManifestEntry> entries;
};

inline LabeledCorpus place_corpus(int count, int size, const crisisvit::LabelVocabulary& incident,
                                  const crisisvit::LabelVocabulary& place, std::uint64_t seed = 3) {
    const int k = static_cast<int>(place.size());
    LabeledCorpus out;
    out.images = crisisvit::synthetic::class_pattern_samples(count, k, size, seed);
    for (const auto& s : out.images) {
        crisisvit::DatasetManifestEntry e;
        e.entry_id = s.id;
        e.url = "file:///dev/null";
        e.status = crisisvit::RetrievalStatus::fetched;
        e.content_digest = "00";
        e.place_labels = {place[static_cast<std::size_t>(s.label)]};
        e.incident_labels = {incident[static_cast<std::size_t>(s.label) % incident.size()]};
        out.entries.push_back(std::move(e));
    }
    return out;
}

}  // namespace fixtures

#include "crisisvit/synthetic.hpp"

#include <cmath>
#include <fstream>

#include "crisisvit/benchmark.hpp"
#include "crisisvit/io.hpp"
#include "crisisvit/manifest.hpp"
#include "crisisvit/rng.hpp"

namespace crisisvit::synthetic {

std::vector<unsigned char> class_pattern_rgb(int size, int class_index, int num_classes, std::uint64_t seed,
                                             double noise) {
    Rng rng(seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2 * M_PI);
    std::normal_distribution<double> pixel_noise(0.0, noise);
    const double angle = M_PI * class_index / std::max(1, num_classes);
    const double freq = 2 * M_PI * (1.5 + (class_index % 3)) / size;
    const double phase = phase_dist(rng);
    const double tint[3] = {0.5 + 0.4 * std::cos(2 * M_PI * class_index / std::max(1, num_classes)),
                            0.5 + 0.4 * std::sin(2 * M_PI * class_index / std::max(1, num_classes)),
                            0.5 - 0.3 * std::cos(4 * M_PI * class_index / std::max(1, num_classes))};

    std::vector<unsigned char> rgb(static_cast<std::size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double t = (x * std::cos(angle) + y * std::sin(angle)) * freq + phase;
            const double wave = 0.5 + 0.5 * std::sin(t);
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(0.6 * wave * tint[c] + 0.3 * tint[c] + pixel_noise(rng), 0.0, 1.0);
                rgb[(static_cast<std::size_t>(y) * size + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255));
            }
        }
    return rgb;
}

ImagePlanes<float> rgb_to_planes(const std::vector<unsigned char>& rgb, int size, const Normalization& norm) {
    ImagePlanes<float> planes(3, size * size);
    for (int p = 0; p < size * size; ++p)
        for (int c = 0; c < 3; ++c)
            planes(c, p) = (rgb[static_cast<std::size_t>(p) * 3 + c] / 255.0f - norm.mean[c]) / norm.std[c];
    return planes;
}

SampleSet class_pattern_samples(int count, int num_classes, int size, std::uint64_t seed, const Normalization& norm,
                                const std::string& split) {
    SampleSet out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int label = i % num_classes;
        Sample s;
        s.id = split + "-" + std::to_string(i);
        s.label = label;
        s.split = split;
        s.pixels = rgb_to_planes(class_pattern_rgb(size, label, num_classes, derive_seed(seed, static_cast<std::uint64_t>(i))),
                                 size, norm);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

// Incidents toy classes: the pattern class selects one incident and one place
// label spread across the shipped vocabularies.
constexpr int kToyClasses = 6;

std::string png_bytes(const std::filesystem::path& path, int size, const std::vector<unsigned char>& rgb) {
    write_png(path, size, size, rgb);
    return read_file(path);
}

}  // namespace

void write_toy_corpus(const std::filesystem::path& root, const ToyCorpusSpec& spec) {
    namespace fs = std::filesystem;
    const auto incident = incident_vocabulary();
    const auto place = place_vocabulary();

    const fs::path inc_root = root / "incidents";
    fs::create_directories(inc_root / "web");
    ContentStore store(inc_root / "store");
    std::vector<DatasetManifestEntry> entries;
    for (int i = 0; i < spec.manifest_entries; ++i) {
        const int c = i % kToyClasses;
        DatasetManifestEntry e;
        e.entry_id = "inc-" + std::to_string(i);
        const fs::path web = fs::absolute(inc_root / "web" / (e.entry_id + ".png"));
        e.url = "file://" + web.string();
        const auto bytes = png_bytes(web, spec.image_size,
                                     class_pattern_rgb(spec.image_size, c, kToyClasses,
                                                       derive_seed(spec.seed, static_cast<std::uint64_t>(i))));
        e.status = RetrievalStatus::fetched;
        e.content_digest = store.put(bytes);
        const std::string inc = incident[static_cast<std::size_t>(c * 7 % incident.size())];
        const std::string plc = place[static_cast<std::size_t>(c * 8 % place.size())];
        // every 11th entry unlabeled, every 7th place-only, every 5th multi-label
        if (i % 11 != 10) {
            if (i % 7 != 6) e.incident_labels = {inc};
            if (i % 7 != 6 && i % 5 == 4)
                e.incident_labels.push_back(incident[static_cast<std::size_t>((c * 7 + 3) % incident.size())]);
            e.place_labels = {plc};
        }
        entries.push_back(std::move(e));
    }
    save_manifest(inc_root / "manifest.jsonl", entries);

    for (TaskId task : kAllTasks) {
        const auto vocab = task_vocabulary(task);
        const int k = static_cast<int>(vocab.size());
        const fs::path dir = root / "benchmark" / to_string(task);
        fs::create_directories(dir / "images");
        const std::uint64_t task_seed = derive_seed(spec.seed, to_string(task));
        for (const auto& [split, count] : {std::pair<std::string, int>{kSplitTrain, spec.train_per_task},
                                           {kSplitValidation, spec.validation_per_task},
                                           {kSplitTest, spec.test_per_task}}) {
            std::string tsv = "image_id\timage_path\tclass_label\n";
            for (int i = 0; i < count; ++i) {
                const int label = i % k;
                const std::string id = to_string(task) + "-" + split + "-" + std::to_string(i);
                const std::string rel = "images/" + id + ".png";
                write_png(dir / rel, spec.image_size, spec.image_size,
                          class_pattern_rgb(spec.image_size, label, k,
                                            derive_seed(derive_seed(task_seed, split), static_cast<std::uint64_t>(i))));
                tsv += id + "\t" + rel + "\t" + vocab[static_cast<std::size_t>(label)] + "\n";
            }
            write_file_atomic(dir / (split + ".tsv"), tsv);
        }
    }
}

}  // namespace crisisvit::synthetic

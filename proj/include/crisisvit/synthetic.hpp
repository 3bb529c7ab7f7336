#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crisisvit/dataset.hpp"
#include "crisisvit/image.hpp"

namespace crisisvit::synthetic {

/// 8-bit interleaved RGB (size x size x 3) of a class-dependent pattern:
/// oriented stripes whose angle and tint encode the class, with a random
/// phase and pixel noise drawn from `seed`.
std::vector<unsigned char> class_pattern_rgb(int size, int class_index, int num_classes, std::uint64_t seed,
                                             double noise = 0.08);

ImagePlanes<float> rgb_to_planes(const std::vector<unsigned char>& rgb, int size, const Normalization& norm);

/// `count` decoded samples with labels cycling through the classes.
SampleSet class_pattern_samples(int count, int num_classes, int size, std::uint64_t seed,
                                const Normalization& norm = {}, const std::string& split = kSplitTrain);

/// On-disk toy corpus for end-to-end runs:
///   <root>/incidents/manifest.jsonl + store/   (fetched entries; images in
///       the content store keyed by digest, labels drawn from the shipped
///       incident/place vocabularies with the pattern class keyed to the
///       first listed label)
///   <root>/benchmark/<task>/{train,validation,test}.tsv + images/
struct ToyCorpusSpec {
    int image_size = 32;
    int manifest_entries = 120;
    int train_per_task = 32;
    int validation_per_task = 12;
    int test_per_task = 16;
    std::uint64_t seed = 7;
};

void write_toy_corpus(const std::filesystem::path& root, const ToyCorpusSpec& spec = {});

}  // namespace crisisvit::synthetic

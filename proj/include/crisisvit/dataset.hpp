#pragma once

#include <string>
#include <vector>

#include "crisisvit/image.hpp"

namespace crisisvit {

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitValidation = "validation";
inline constexpr const char* kSplitTest = "test";

/// A decoded image with an optional class index. `split` tags where the
/// image came from; trainers refuse to update on anything not tagged train.
struct Sample {
    std::string id;
    ImagePlanes<float> pixels;
    int label = -1;
    std::string split = kSplitTrain;
};

using SampleSet = std::vector<Sample>;

/// Images that failed to decode while assembling a SampleSet.
struct DecodeReport {
    std::size_t attempted = 0;
    std::size_t decoded = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // id, reason

    double failure_fraction() const {
        return attempted == 0 ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(attempted);
    }
};

}  // namespace crisisvit

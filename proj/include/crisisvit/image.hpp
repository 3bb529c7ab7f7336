#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "crisisvit/errors.hpp"
#include "crisisvit/model_config.hpp"
#include "crisisvit/types.hpp"

namespace crisisvit {

/// Per-channel normalization applied after decoding; recorded in checkpoint
/// provenance so evaluation uses the constants training used.
struct Normalization {
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

void to_json(nlohmann::json& j, const Normalization& n);
void from_json(const nlohmann::json& j, Normalization& n);

/// One image as channel planes: channels x (size*size), row-major pixels.
template <typename Scalar>
using ImagePlanes = Matrix<Scalar>;

template <typename Scalar>
struct ImageTensorBatch {
    int image_size = 0;
    int channels = 0;
    std::vector<ImagePlanes<Scalar>> images;
    std::vector<std::string> ids;

    std::size_t size() const { return images.size(); }

    void push_back(ImagePlanes<Scalar> planes, std::string id) {
        images.push_back(std::move(planes));
        ids.push_back(std::move(id));
    }

    void check_against(const ModelConfig& config) const {
        if (images.empty()) throw DimensionError("image batch is empty");
        if (image_size != config.image_size || channels != config.channels)
            throw DimensionError("batch is " + std::to_string(channels) + "x" + std::to_string(image_size) + "x" +
                                 std::to_string(image_size) + " but model expects " +
                                 std::to_string(config.channels) + "x" + std::to_string(config.image_size) + "x" +
                                 std::to_string(config.image_size));
        for (const auto& im : images)
            if (im.rows() != channels || im.cols() != static_cast<Eigen::Index>(image_size) * image_size)
                throw DimensionError("image planes do not match the batch's declared shape");
    }
};

/// Split an image into non-overlapping patches, one per row in raster order.
/// Each row holds the patch pixels as (y, x, channel) with channel fastest.
template <typename Scalar>
Matrix<Scalar> patchify(const ImagePlanes<Scalar>& planes, int image_size, int patch_size) {
    const int grid = image_size / patch_size;
    const int channels = static_cast<int>(planes.rows());
    Matrix<Scalar> out(grid * grid, patch_size * patch_size * channels);
    for (int gy = 0; gy < grid; ++gy)
        for (int gx = 0; gx < grid; ++gx) {
            const int row = gy * grid + gx;
            int col = 0;
            for (int py = 0; py < patch_size; ++py)
                for (int px = 0; px < patch_size; ++px) {
                    const int pixel = (gy * patch_size + py) * image_size + gx * patch_size + px;
                    for (int c = 0; c < channels; ++c) out(row, col++) = planes(c, pixel);
                }
        }
    return out;
}

/// Decode an image file, resize its shorter side to `size`, center-crop to
/// size x size, scale to [0,1] and normalize. Throws DataError when the file
/// cannot be decoded.
ImagePlanes<float> load_image(const std::filesystem::path& path, int size, const Normalization& norm);
ImagePlanes<float> decode_image(const std::vector<unsigned char>& bytes, int size, const Normalization& norm);

/// Write raw 8-bit RGB pixels (rows x cols x 3, interleaved) as PNG.
void write_png(const std::filesystem::path& path, int rows, int cols, const std::vector<unsigned char>& rgb);

}  // namespace crisisvit

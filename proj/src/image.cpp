#include "crisisvit/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace crisisvit {

void to_json(nlohmann::json& j, const Normalization& n) { j = nlohmann::json{{"mean", n.mean}, {"std", n.std}}; }

void from_json(const nlohmann::json& j, Normalization& n) {
    n.mean = j.at("mean").get<std::array<float, 3>>();
    n.std = j.at("std").get<std::array<float, 3>>();
}

namespace {

ImagePlanes<float> to_planes(const cv::Mat& decoded, int size, const Normalization& norm) {
    cv::Mat rgb;
    if (decoded.channels() == 1)
        cv::cvtColor(decoded, rgb, cv::COLOR_GRAY2RGB);
    else if (decoded.channels() == 4)
        cv::cvtColor(decoded, rgb, cv::COLOR_BGRA2RGB);
    else
        cv::cvtColor(decoded, rgb, cv::COLOR_BGR2RGB);

    const double scale = static_cast<double>(size) / std::min(rgb.rows, rgb.cols);
    const int rows = std::max(size, static_cast<int>(std::lround(rgb.rows * scale)));
    const int cols = std::max(size, static_cast<int>(std::lround(rgb.cols * scale)));
    cv::Mat resized;
    if (rows != rgb.rows || cols != rgb.cols)
        cv::resize(rgb, resized, cv::Size(cols, rows), 0, 0, cv::INTER_AREA);
    else
        resized = rgb;
    const cv::Mat crop = resized(cv::Rect((cols - size) / 2, (rows - size) / 2, size, size));

    ImagePlanes<float> planes(3, size * size);
    for (int y = 0; y < size; ++y) {
        const auto* row = crop.ptr<cv::Vec3b>(y);
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c)
                planes(c, y * size + x) = (row[x][c] / 255.0f - norm.mean[c]) / norm.std[c];
    }
    return planes;
}

}  // namespace

ImagePlanes<float> load_image(const std::filesystem::path& path, int size, const Normalization& norm) {
    cv::Mat decoded = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (decoded.empty() || decoded.depth() != CV_8U) throw DataError("cannot decode image: " + path.string());
    return to_planes(decoded, size, norm);
}

ImagePlanes<float> decode_image(const std::vector<unsigned char>& bytes, int size, const Normalization& norm) {
    if (bytes.empty()) throw DataError("cannot decode image: empty buffer");
    cv::Mat decoded = cv::imdecode(bytes, cv::IMREAD_UNCHANGED);
    if (decoded.empty() || decoded.depth() != CV_8U) throw DataError("cannot decode image buffer");
    return to_planes(decoded, size, norm);
}

void write_png(const std::filesystem::path& path, int rows, int cols, const std::vector<unsigned char>& rgb) {
    cv::Mat mat(rows, cols, CV_8UC3, const_cast<unsigned char*>(rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(mat, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), bgr)) throw DataError("cannot write image: " + path.string());
}

}  // namespace crisisvit

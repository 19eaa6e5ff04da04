#include "vsod/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace vsod::io {

namespace {

unsigned char quantize(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_png(const std::filesystem::path& path, const cv::Mat& mat) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("failed to write " + path.string());
}

cv::Mat read_png(const std::filesystem::path& path, int flags) {
    cv::Mat mat = cv::imread(path.string(), flags);
    if (mat.empty()) throw std::runtime_error("failed to read image " + path.string());
    return mat;
}

}  // namespace

void write_rgb(const std::filesystem::path& path, const Tensor& image) {
    const Shape s = image.shape();
    if (s.n != 1 || s.c != 3) throw ShapeError("write_rgb: expected (1,3,H,W), got " + s.str());
    cv::Mat mat(s.h, s.w, CV_8UC3);
    for (int y = 0; y < s.h; ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < s.w; ++x) {
            // OpenCV stores BGR.
            row[x] = {quantize(image.at(0, 2, y, x)), quantize(image.at(0, 1, y, x)), quantize(image.at(0, 0, y, x))};
        }
    }
    write_png(path, mat);
}

void write_gray(const std::filesystem::path& path, const Tensor& image) {
    const Shape s = image.shape();
    if (s.n != 1 || s.c != 1) throw ShapeError("write_gray: expected (1,1,H,W), got " + s.str());
    cv::Mat mat(s.h, s.w, CV_8UC1);
    for (int y = 0; y < s.h; ++y) {
        auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < s.w; ++x) row[x] = quantize(image.at(0, 0, y, x));
    }
    write_png(path, mat);
}

Tensor read_rgb(const std::filesystem::path& path) {
    const cv::Mat mat = read_png(path, cv::IMREAD_COLOR);
    Tensor out({1, 3, mat.rows, mat.cols});
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = row[x][2 - c] / 255.0;
        }
    }
    return out;
}

Tensor read_gray(const std::filesystem::path& path) {
    const cv::Mat mat = read_png(path, cv::IMREAD_GRAYSCALE);
    Tensor out({1, 1, mat.rows, mat.cols});
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<unsigned char>(y);
        for (int x = 0; x < mat.cols; ++x) out.at(0, 0, y, x) = row[x] / 255.0;
    }
    return out;
}

}  // namespace vsod::io

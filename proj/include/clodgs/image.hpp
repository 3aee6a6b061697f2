#pragma once

#include "clodgs/math.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace clodgs {

/// Row-major H x W x 3 float64 image.
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0)
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * 3, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }

    double& at(int x, int y, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }

    Vec3 pixel(int x, int y) const { return Vec3(at(x, y, 0), at(x, y, 1), at(x, y, 2)); }
    void set_pixel(int x, int y, const Vec3& v) {
        for (int c = 0; c < 3; ++c) at(x, y, c) = v[c];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// Columns [x0, x1) as a new image.
    Image crop_columns(int x0, int x1) const;

    bool all_finite() const;

    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// 8-bit RGB, values clamped to [0,1] and rounded.
std::vector<std::uint8_t> to_rgb8(const Image& img);
Image from_rgb8(const std::vector<std::uint8_t>& rgb, int width, int height);

/// Binary PPM (P6, maxval 255).
void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// PNG (8-bit RGB) encoded in memory.
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const Image& img, const std::filesystem::path& path);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace clodgs

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace craft {

/// H x W x C pixel grid, row-major with interleaved channels.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          pixels_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height <= 0 || width <= 0 || channels <= 0) {
            throw std::invalid_argument("image dimensions must be positive");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return pixels_.size(); }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

    std::span<double> pixels() { return pixels_; }
    std::span<const double> pixels() const { return pixels_; }

    bool same_shape(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }
    bool in_unit_range() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> pixels_;
};

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lossless float sidecar: "CVF1", u32 H, u32 W, u32 C, then H*W*C little-endian float32.
void write_cvf(const std::filesystem::path& path, const Image& img);
Image read_cvf(const std::filesystem::path& path);

/// Binary 8-bit PPM (P6). Single-channel images are replicated to RGB.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

/// Round every pixel to float32 precision.
Image quantize_to_float(const Image& img);

/// Float32-round adv while keeping |adv - clean| <= eps and adv in [0,1] after rounding.
Image quantize_within_budget(const Image& adv, const Image& clean, double eps);

/// Write to a sibling temp file, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace craft

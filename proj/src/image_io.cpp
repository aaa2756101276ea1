#include "craft/image.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace craft {

bool Image::in_unit_range() const {
    return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + k])) << (8 * k);
    return v;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ImageIoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ImageIoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_cvf(const std::filesystem::path& path, const Image& img) {
    std::string out = "CVF1";
    put_u32(out, static_cast<std::uint32_t>(img.height()));
    put_u32(out, static_cast<std::uint32_t>(img.width()));
    put_u32(out, static_cast<std::uint32_t>(img.channels()));
    out.reserve(16 + img.size() * 4);
    for (double v : img.pixels()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    write_file_atomic(path, out);
}

Image read_cvf(const std::filesystem::path& path) {
    const std::string in = read_file(path);
    if (in.size() < 16 || in.compare(0, 4, "CVF1") != 0) {
        throw ImageIoError(path.string() + ": not a CVF1 file");
    }
    const auto h = get_u32(in, 4);
    const auto w = get_u32(in, 8);
    const auto c = get_u32(in, 12);
    const std::size_t n = static_cast<std::size_t>(h) * w * c;
    if (h == 0 || w == 0 || c == 0 || in.size() != 16 + 4 * n) {
        throw ImageIoError(path.string() + ": CVF1 size mismatch");
    }
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    auto px = img.pixels();
    for (std::size_t k = 0; k < n; ++k) {
        px[k] = static_cast<double>(std::bit_cast<float>(get_u32(in, 16 + 4 * k)));
    }
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw ImageIoError("ppm: only 1 or 3 channel images are supported");
    }
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(img.width()) * img.height() * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src = img.channels() == 1 ? 0 : c;
                out.push_back(static_cast<char>(to_byte(img.at(y, x, src))));
            }
        }
    }
    write_file_atomic(path, out);
}

Image read_ppm(const std::filesystem::path& path) {
    const std::string in = read_file(path);
    std::istringstream hdr(in);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    hdr >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
        throw ImageIoError(path.string() + ": unsupported PPM header");
    }
    const auto off = static_cast<std::size_t>(hdr.tellg()) + 1;
    const std::size_t n = static_cast<std::size_t>(w) * h * 3;
    if (in.size() != off + n) throw ImageIoError(path.string() + ": PPM size mismatch");
    Image img(h, w, 3);
    auto px = img.pixels();
    for (std::size_t k = 0; k < n; ++k) px[k] = static_cast<unsigned char>(in[off + k]) / 255.0;
    return img;
}

Image quantize_to_float(const Image& img) {
    Image out = img;
    for (double& v : out.pixels()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

Image quantize_within_budget(const Image& adv, const Image& clean, double eps) {
    if (!adv.same_shape(clean)) throw std::invalid_argument("quantize_within_budget: shape mismatch");
    Image out = adv;
    auto px = out.pixels();
    auto ref = clean.pixels();
    for (std::size_t k = 0; k < px.size(); ++k) {
        float f = static_cast<float>(px[k]);
        const double lo = std::max(0.0, ref[k] - eps);
        const double hi = std::min(1.0, ref[k] + eps);
        while (static_cast<double>(f) > hi) f = std::nextafter(f, -1.0f);
        while (static_cast<double>(f) < lo) f = std::nextafter(f, 2.0f);
        px[k] = static_cast<double>(f);
    }
    return out;
}

}  // namespace craft

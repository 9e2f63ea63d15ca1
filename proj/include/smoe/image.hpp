#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace smoe {

// Interleaved (height, width, channels) image with values in [0,1].
class ImageBuffer {
public:
    ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> values);
    ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::span<const double> values() const { return values_; }

    double at(std::size_t i, std::size_t j, std::size_t c = 0) const {
        return values_[(i * width_ + j) * channels_ + c];
    }
    // Writes are clamped to [0,1] so the invariant cannot be broken.
    void set(std::size_t i, std::size_t j, std::size_t c, double v);

    bool operator==(const ImageBuffer&) const = default;

private:
    std::size_t height_;
    std::size_t width_;
    std::size_t channels_;
    std::vector<double> values_;
};

// Rec. 601 luma for 3-channel images; 1-channel images are returned as-is.
ImageBuffer to_grayscale(const ImageBuffer& image);

// v*255 rounded half-to-even, clamped to [0,255].
std::uint8_t quantize_u8(double v);

std::vector<std::uint8_t> encode_png(const ImageBuffer& image);
void write_png(const std::filesystem::path& path, const ImageBuffer& image);

// 8-bit gray / gray+alpha / RGB / RGBA PNG. Alpha is dropped.
ImageBuffer read_png(const std::filesystem::path& path);

// Write bytes to a temp file beside `path`, then rename over it.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace smoe

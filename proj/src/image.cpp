#include "smoe/image.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <png.h>

namespace smoe {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
    if (height_ == 0 || width_ == 0) throw ValidationError("image dimensions must be >= 1");
    if (channels_ != 1 && channels_ != 3) throw ValidationError("image must have 1 or 3 channels");
    if (values_.size() != height_ * width_ * channels_)
        throw ValidationError("image values length does not equal height*width*channels");
    for (double v : values_)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("image value outside [0,1]");
}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : ImageBuffer(height, width, channels, std::vector<double>(height * width * channels, fill)) {}

void ImageBuffer::set(std::size_t i, std::size_t j, std::size_t c, double v) {
    values_[(i * width_ + j) * channels_ + c] = std::clamp(v, 0.0, 1.0);
}

ImageBuffer to_grayscale(const ImageBuffer& image) {
    if (image.channels() == 1) return image;
    ImageBuffer out(image.height(), image.width(), 1);
    for (std::size_t i = 0; i < image.height(); ++i)
        for (std::size_t j = 0; j < image.width(); ++j)
            out.set(i, j, 0,
                    0.299 * image.at(i, j, 0) + 0.587 * image.at(i, j, 1) + 0.114 * image.at(i, j, 2));
    return out;
}

std::uint8_t quantize_u8(double v) {
    // nearbyint honours the default FE_TONEAREST mode: ties go to even.
    double q = std::nearbyint(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(q);
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& image) {
    std::vector<std::uint8_t> pixels(image.values().size());
    std::transform(image.values().begin(), image.values().end(), pixels.begin(), quantize_u8);

    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(image.width());
    desc.height = static_cast<png_uint_32>(image.height());
    desc.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode failed: ") + desc.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&desc, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode failed: ") + desc.message);
    out.resize(size);
    png_image_free(&desc);
    return out;
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
    write_file_atomic(path, encode_png(image));
}

ImageBuffer read_png(const std::filesystem::path& path) {
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&desc, path.string().c_str()))
        throw IoError("cannot read png " + path.string() + ": " + desc.message);
    const bool color = (desc.format & PNG_FORMAT_FLAG_COLOR) != 0;
    desc.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(desc));
    if (!png_image_finish_read(&desc, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&desc);
        throw FormatError("cannot decode png " + path.string() + ": " + desc.message);
    }
    std::vector<double> values(pixels.size());
    std::transform(pixels.begin(), pixels.end(), values.begin(),
                   [](std::uint8_t p) { return p / 255.0; });
    return ImageBuffer(desc.height, desc.width, color ? 3 : 1, std::move(values));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
    }
}

}  // namespace smoe

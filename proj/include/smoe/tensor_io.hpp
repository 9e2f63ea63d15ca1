#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smoe {

inline constexpr double kDefaultEpsilon = 1e-6;

enum class Stage { pre_activation, post_activation };

std::string_view to_string(Stage stage);

// Raw contents of a little-endian float32 C-order NPY v1.0 file.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& array);

// Serialized bytes exactly as write_npy emits them (header padded to 64).
std::vector<char> encode_npy(const NpyArray& array);
NpyArray decode_npy(std::span<const char> bytes);

// The r values found at one spatial location, in channel order. Owns a copy
// and never hands out mutable access.
class ActivationColumn {
public:
    explicit ActivationColumn(std::vector<double> values, double epsilon = kDefaultEpsilon);

    std::span<const double> values() const { return values_; }
    double epsilon() const { return epsilon_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }

private:
    std::vector<double> values_;
    double epsilon_;
};

// One scale's activation snapshot, stored (channels, height, width) C-order.
class ActivationTensor {
public:
    ActivationTensor(std::size_t channels, std::size_t height, std::size_t width,
                     std::vector<float> values, Stage stage);

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    Stage stage() const { return stage_; }
    std::span<const float> values() const { return values_; }

    float at(std::size_t k, std::size_t i, std::size_t j) const {
        return values_[(k * height_ + i) * width_ + j];
    }

    ActivationColumn column(std::size_t i, std::size_t j,
                            double epsilon = kDefaultEpsilon) const;

    // Hot-loop variant of column(): fills `out` (resized to channels) without
    // bounds checks beyond a debug assertion.
    void gather_column(std::size_t i, std::size_t j, std::vector<double>& out) const;

private:
    std::size_t channels_;
    std::size_t height_;
    std::size_t width_;
    std::vector<float> values_;
    Stage stage_;
};

ActivationColumn column_view(const ActivationTensor& tensor, std::size_t i, std::size_t j);

ActivationTensor load_tensor(const std::filesystem::path& path, Stage stage);
void save_tensor(const std::filesystem::path& path, const ActivationTensor& tensor);

struct ScaleEntry {
    int scale_index = 0;
    std::filesystem::path post_path;
    std::optional<std::filesystem::path> pre_path;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct InputImageRef {
    std::filesystem::path path;
    std::size_t height = 0;
    std::size_t width = 0;
};

struct ScaleManifest {
    std::string model_name;
    InputImageRef input_image;
    std::vector<ScaleEntry> entries;  // ordered by scale_index
};

// Relative paths inside the manifest resolve against the manifest's directory.
ScaleManifest load_manifest(const std::filesystem::path& path);

}  // namespace smoe

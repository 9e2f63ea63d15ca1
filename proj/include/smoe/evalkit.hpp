#pragma once

#include "smoe/image.hpp"
#include "smoe/saliency.hpp"
#include "smoe/tensor_io.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace smoe::evalkit {

enum class MaskMode { kar_keep, roar_remove };
enum class Fill { zero, per_channel_mean };

struct MaskSpec {
    MaskMode mode = MaskMode::kar_keep;
    double fraction = 0.1;
    Fill fill = Fill::zero;
};

// true = pixel passes through.
class BinaryMask {
public:
    BinaryMask(std::size_t height, std::size_t width, std::vector<bool> bits);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    bool at(std::size_t i, std::size_t j) const { return bits_[i * width_ + j]; }
    const std::vector<bool>& bits() const { return bits_; }
    std::size_t popcount() const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<bool> bits_;
};

// n = round(fraction * p * q) most salient pixels are kept (KAR) or removed
// (ROAR). Equal values rank by ascending row-major index.
BinaryMask make_mask(const SaliencyMap& map, const MaskSpec& spec);

ImageBuffer apply_image_mask(const ImageBuffer& image, const BinaryMask& mask, Fill fill = Fill::zero);
ActivationTensor apply_tensor_mask(const ActivationTensor& tensor, const BinaryMask& mask);

ImageBuffer mask_image(const BinaryMask& mask);

// Per-layer accuracies as fractions. The random-mask baseline is kept
// separately for the KAR and ROAR runs since the two are measured apart.
struct ScoreVectors {
    std::vector<double> kappa;   // KAR accuracies
    std::vector<double> rho;     // ROAR accuracies
    std::vector<double> z_kar;   // random-mask accuracy at the KAR setting
    std::vector<double> z_roar;  // random-mask accuracy at the ROAR setting

    // Same baseline for both terms.
    static ScoreVectors with_shared_baseline(std::vector<double> kappa, std::vector<double> rho,
                                             std::vector<double> z);
};

double difference_score(const ScoreVectors& v);
// Natural log throughout.
double information_score(const ScoreVectors& v);

// CSV with header layer,kappa,rho,z  or  layer,kappa,rho,z_kar,z_roar.
// Percentages are detected when any value exceeds 1.5 and divided by 100.
ScoreVectors parse_score_csv(std::istream& in);
ScoreVectors load_score_csv(const std::filesystem::path& path);

struct LayerDims {
    std::uint64_t channels;
    std::uint64_t height;
    std::uint64_t width;
    bool operator==(const LayerDims&) const = default;
};

struct FlopsRow {
    LayerDims dims;
    std::uint64_t smoe_ops;
    std::uint64_t norm_ops;
    std::optional<std::uint64_t> combine_ops;  // reference data, ResNet-50 only
};

struct FlopsReport {
    std::vector<FlopsRow> rows;
    std::uint64_t smoe_total = 0;
    std::uint64_t norm_total = 0;
    std::optional<std::uint64_t> combine_total;
    std::uint64_t grand_total = 0;

    // grand_total / network_flops
    double overhead_ratio(double network_flops = kResNet50ForwardFlops) const;

    static constexpr double kResNet50ForwardFlops = 3.8e9;
};

const std::vector<LayerDims>& resnet50_layers();

FlopsReport flops_report(const std::vector<LayerDims>& layers);

std::string format_flops_table(const FlopsReport& report);
std::string flops_json(const FlopsReport& report, double network_flops = FlopsReport::kResNet50ForwardFlops);

}  // namespace smoe::evalkit

#pragma once

#include "smoe/image.hpp"
#include "smoe/stats.hpp"
#include "smoe/tensor_io.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace smoe {

// Row-major p x q map. `normalized` maps are guaranteed to lie in [0,1].
class SaliencyMap {
public:
    SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values, bool normalized);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }
    bool normalized() const { return normalized_; }
    std::span<const double> values() const { return values_; }
    double at(std::size_t i, std::size_t j) const { return values_[i * width_ + j]; }

    bool operator==(const SaliencyMap&) const = default;

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<double> values_;
    bool normalized_;
};

struct WeightScheme {
    enum class Kind { uniform, ramp, prior, custom };
    Kind kind = Kind::uniform;
    std::vector<double> custom;

    static WeightScheme uniform() { return {Kind::uniform, {}}; }
    static WeightScheme ramp() { return {Kind::ramp, {}}; }
    static WeightScheme prior() { return {Kind::prior, {}}; }
    static WeightScheme from(std::vector<double> w) { return {Kind::custom, std::move(w)}; }

    // Prior when there are five scales, uniform otherwise.
    static WeightScheme default_for(std::size_t scale_count);
};

inline constexpr std::array<double, 5> kPriorLayerWeights{0.18, 0.15, 0.37, 0.4, 0.72};

// "uniform" | "ramp" | "prior" | "w1,w2,..."
WeightScheme parse_weight_scheme(std::string_view text);

// Concrete weight vector for the given number of scales.
std::vector<double> resolve_weights(const WeightScheme& scheme, std::size_t scale_count);

// Normalized maps at a common size plus their combination weights.
class ScaleStack {
public:
    ScaleStack(std::vector<SaliencyMap> maps, std::vector<double> weights);

    const std::vector<SaliencyMap>& maps() const { return maps_; }
    std::span<const double> weights() const { return weights_; }
    std::size_t height() const { return maps_.front().height(); }
    std::size_t width() const { return maps_.front().width(); }
    std::size_t depth() const { return maps_.size(); }

private:
    std::vector<SaliencyMap> maps_;
    std::vector<double> weights_;
};

SaliencyMap compute_scale_map(const ActivationTensor& tensor, stats::StatisticKind kind,
                              double epsilon = kDefaultEpsilon);

// Phi((s - mean) / std) with moments taken over this map alone.
SaliencyMap normalize_cdf(const SaliencyMap& map);

// Half-pixel-center bilinear upsampling with edge clamping.
SaliencyMap upsample_bilinear(const SaliencyMap& map, std::size_t target_h, std::size_t target_w);

SaliencyMap combine(const ScaleStack& stack);

// Element-wise product, then min-max rescale unless the product is constant.
SaliencyMap fuse_cam(const SaliencyMap& combined, const SaliencyMap& cam);

// gray(image) * alpha + map * (1 - alpha). Single-channel output.
ImageBuffer render_overlay(const SaliencyMap& map, const ImageBuffer& image, double alpha = 0.25);

// Min-max rescale to [0,1]; constant maps come back unchanged (clamped).
SaliencyMap rescale_min_max(const SaliencyMap& map);

ImageBuffer to_image(const SaliencyMap& map);

}  // namespace smoe

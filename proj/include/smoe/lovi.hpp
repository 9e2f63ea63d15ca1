#pragma once

#include "smoe/image.hpp"
#include "smoe/saliency.hpp"

#include <span>

namespace smoe::lovi {

struct HsvPixel {
    double hue = 0.0;  // degrees, [0,300] as produced here
    double sat = 0.0;
    double val = 0.0;
};

struct RgbPixel {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

// Position of layer k (1-based) on [0,1]: 1 for the first layer, 0 for the last.
double layer_position(std::size_t k, std::size_t r);

// Columns whose total mass is below this render black.
inline constexpr double kMassFloor = 1e-12;

// Center of mass of per-layer saliency mapped to [0,300].
double hue(std::span<const double> s);
// Uniqueness of the peak layer, clamped to [0,1].
double saturation(std::span<const double> s);
double value(std::span<const double> s);

HsvPixel layer_pixel(std::span<const double> s);

RgbPixel hsv_to_rgb(const HsvPixel& hsv);

ImageBuffer lovi_render(const ScaleStack& stack);

// gray(image) * alpha + color * (1 - alpha), per channel.
ImageBuffer blend_with_gray(const ImageBuffer& color, const ImageBuffer& image, double alpha = 0.25);

}  // namespace smoe::lovi

#include "smoe/lovi.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace smoe::lovi {

namespace {

void require_layers(std::span<const double> s) {
    if (s.size() < 2) throw UsageError("layer visualization needs at least 2 layers");
}

}  // namespace

double layer_position(std::size_t k, std::size_t r) {
    if (r < 2) throw UsageError("layer visualization needs at least 2 layers");
    if (k < 1 || k > r) throw UsageError("layer index " + std::to_string(k) + " outside 1.." + std::to_string(r));
    return 1.0 - static_cast<double>(k - 1) / static_cast<double>(r - 1);
}

double hue(std::span<const double> s) {
    require_layers(s);
    double mass = 0.0;
    double moment = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        mass += s[k];
        moment += s[k] * layer_position(k + 1, s.size());
    }
    if (mass < kMassFloor) return 0.0;
    return std::clamp(300.0 * moment / mass, 0.0, 300.0);
}

double saturation(std::span<const double> s) {
    require_layers(s);
    const double peak = *std::max_element(s.begin(), s.end());
    const double mass = std::accumulate(s.begin(), s.end(), 0.0);
    if (mass < kMassFloor || !(peak > 0.0)) return 0.0;
    const double r = static_cast<double>(s.size());
    const double nu = 1.0 / r;
    return std::clamp(1.0 - (mass - nu) / (r * peak * (1.0 - nu)), 0.0, 1.0);
}

double value(std::span<const double> s) {
    if (s.empty()) return 0.0;
    return *std::max_element(s.begin(), s.end());
}

HsvPixel layer_pixel(std::span<const double> s) {
    const double mass = std::accumulate(s.begin(), s.end(), 0.0);
    if (mass < kMassFloor) {
        require_layers(s);
        return {};
    }
    return {hue(s), saturation(s), value(s)};
}

RgbPixel hsv_to_rgb(const HsvPixel& hsv) {
    const double v = hsv.val;
    if (hsv.sat <= 0.0) return {v, v, v};
    double h = std::fmod(hsv.hue, 360.0);
    if (h < 0.0) h += 360.0;
    h /= 60.0;
    const int sector = std::min(static_cast<int>(h), 5);
    const double f = h - sector;
    const double p = v * (1.0 - hsv.sat);
    const double q = v * (1.0 - hsv.sat * f);
    const double t = v * (1.0 - hsv.sat * (1.0 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

ImageBuffer lovi_render(const ScaleStack& stack) {
    if (stack.depth() < 2) throw UsageError("layer visualization needs at least 2 scales");
    ImageBuffer out(stack.height(), stack.width(), 3);
    std::vector<double> s(stack.depth());
    for (std::size_t i = 0; i < stack.height(); ++i) {
        for (std::size_t j = 0; j < stack.width(); ++j) {
            for (std::size_t k = 0; k < stack.depth(); ++k) s[k] = stack.maps()[k].at(i, j);
            const RgbPixel rgb = hsv_to_rgb(layer_pixel(s));
            out.set(i, j, 0, rgb.r);
            out.set(i, j, 1, rgb.g);
            out.set(i, j, 2, rgb.b);
        }
    }
    return out;
}

ImageBuffer blend_with_gray(const ImageBuffer& color, const ImageBuffer& image, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("blend alpha must lie in [0,1]");
    if (color.height() != image.height() || color.width() != image.width())
        throw UsageError("blend_with_gray: image dimensions differ");
    const ImageBuffer gray = to_grayscale(image);
    ImageBuffer out(color.height(), color.width(), color.channels());
    for (std::size_t i = 0; i < color.height(); ++i)
        for (std::size_t j = 0; j < color.width(); ++j)
            for (std::size_t c = 0; c < color.channels(); ++c)
                out.set(i, j, c, gray.at(i, j) * alpha + color.at(i, j, c) * (1.0 - alpha));
    return out;
}

}  // namespace smoe::lovi

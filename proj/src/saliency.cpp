#include "smoe/saliency.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace smoe {

namespace {

constexpr double kSigmaFloor = 1e-12;

void require_same_dims(const SaliencyMap& a, const SaliencyMap& b, const char* op) {
    if (a.height() != b.height() || a.width() != b.width())
        throw UsageError(std::string(op) + ": map dimensions differ (" + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()) + ")");
}

std::vector<double> parse_csv_doubles(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto item = std::string(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw UsageError("bad weight '" + item + "'");
        }
        if (used != item.size()) throw UsageError("bad weight '" + item + "'");
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

SaliencyMap::SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values, bool normalized)
    : height_(height), width_(width), values_(std::move(values)), normalized_(normalized) {
    if (height_ == 0 || width_ == 0) throw ValidationError("saliency map dimensions must be >= 1");
    if (values_.size() != height_ * width_) throw ValidationError("saliency map values length mismatch");
    for (double v : values_) {
        if (!std::isfinite(v)) throw ValidationError("saliency map holds a non-finite value");
        if (normalized_ && (v < 0.0 || v > 1.0))
            throw ValidationError("normalized saliency map value outside [0,1]");
    }
}

WeightScheme WeightScheme::default_for(std::size_t scale_count) {
    return scale_count == kPriorLayerWeights.size() ? prior() : uniform();
}

WeightScheme parse_weight_scheme(std::string_view text) {
    if (text == "uniform") return WeightScheme::uniform();
    if (text == "ramp") return WeightScheme::ramp();
    if (text == "prior") return WeightScheme::prior();
    return WeightScheme::from(parse_csv_doubles(text));
}

std::vector<double> resolve_weights(const WeightScheme& scheme, std::size_t scale_count) {
    std::vector<double> w;
    switch (scheme.kind) {
        case WeightScheme::Kind::uniform:
            w.assign(scale_count, 1.0);
            break;
        case WeightScheme::Kind::ramp:
            w.resize(scale_count);
            std::iota(w.begin(), w.end(), 1.0);
            break;
        case WeightScheme::Kind::prior:
            if (scale_count != kPriorLayerWeights.size())
                throw UsageError("prior weights are defined for 5 scales, manifest has " +
                                 std::to_string(scale_count));
            w.assign(kPriorLayerWeights.begin(), kPriorLayerWeights.end());
            break;
        case WeightScheme::Kind::custom:
            if (scheme.custom.size() != scale_count)
                throw UsageError("custom weights have " + std::to_string(scheme.custom.size()) +
                                 " entries for " + std::to_string(scale_count) + " scales");
            w = scheme.custom;
            break;
    }
    double sum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("weights must be finite and non-negative");
        sum += v;
    }
    if (!(sum > 0.0)) throw UsageError("weights must have a positive sum");
    return w;
}

ScaleStack::ScaleStack(std::vector<SaliencyMap> maps, std::vector<double> weights)
    : maps_(std::move(maps)), weights_(std::move(weights)) {
    if (maps_.empty()) throw UsageError("scale stack needs at least one map");
    if (weights_.size() != maps_.size())
        throw UsageError("scale stack has " + std::to_string(maps_.size()) + " maps but " +
                         std::to_string(weights_.size()) + " weights");
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw UsageError("scale stack weights must be non-negative");
        sum += w;
    }
    if (!(sum > 0.0)) throw UsageError("scale stack weights must have a positive sum");
    for (const auto& m : maps_) {
        require_same_dims(maps_.front(), m, "scale stack");
        if (!m.normalized()) throw UsageError("scale stack maps must be normalized");
    }
}

SaliencyMap compute_scale_map(const ActivationTensor& tensor, stats::StatisticKind kind, double epsilon) {
    if (tensor.stage() != stats::required_stage(kind))
        throw UsageError(std::string(stats::to_string(kind)) + " needs a " +
                         std::string(to_string(stats::required_stage(kind))) + " tensor, got " +
                         std::string(to_string(tensor.stage())));
    const std::size_t p = tensor.height();
    const std::size_t q = tensor.width();
    std::vector<double> out(p * q);
    std::vector<double> column;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            tensor.gather_column(i, j, column);
            out[i * q + j] = stats::column_statistic(kind, column, epsilon);
        }
    }

    // Degenerate entropies sit at the bottom of the ranking, tied with the
    // smallest real value, so normalization never sees the sentinel.
    double floor = 0.0;
    bool found = false;
    for (double v : out) {
        if (v != stats::kDegenerateEntropy && (!found || v < floor)) {
            floor = v;
            found = true;
        }
    }
    for (double& v : out)
        if (v == stats::kDegenerateEntropy) v = floor;
    return SaliencyMap(p, q, std::move(out), false);
}

SaliencyMap normalize_cdf(const SaliencyMap& map) {
    const auto values = map.values();
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / n);

    std::vector<double> out(values.size(), 0.5);
    if (sigma >= kSigmaFloor) {
        for (std::size_t k = 0; k < values.size(); ++k)
            out[k] = stats::standard_normal_cdf((values[k] - mean) / sigma);
    }
    return SaliencyMap(map.height(), map.width(), std::move(out), true);
}

SaliencyMap upsample_bilinear(const SaliencyMap& map, std::size_t target_h, std::size_t target_w) {
    const std::size_t h = map.height();
    const std::size_t w = map.width();
    if (target_h < h || target_w < w)
        throw UsageError("upsample_bilinear: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                         " is smaller than source " + std::to_string(h) + "x" + std::to_string(w));
    if (target_h == h && target_w == w) return map;

    struct Tap {
        std::size_t lo;
        std::size_t hi;
        double t;
    };
    auto taps = [](std::size_t src, std::size_t dst) {
        std::vector<Tap> out(dst);
        const double scale = static_cast<double>(src) / static_cast<double>(dst);
        for (std::size_t d = 0; d < dst; ++d) {
            double x = (static_cast<double>(d) + 0.5) * scale - 0.5;
            x = std::clamp(x, 0.0, static_cast<double>(src - 1));
            auto lo = static_cast<std::size_t>(std::floor(x));
            auto hi = std::min(lo + 1, src - 1);
            out[d] = {lo, hi, x - static_cast<double>(lo)};
        }
        return out;
    };
    const auto rows = taps(h, target_h);
    const auto cols = taps(w, target_w);

    std::vector<double> out(target_h * target_w);
    for (std::size_t i = 0; i < target_h; ++i) {
        const auto& ry = rows[i];
        for (std::size_t j = 0; j < target_w; ++j) {
            const auto& cx = cols[j];
            const double top = std::lerp(map.at(ry.lo, cx.lo), map.at(ry.lo, cx.hi), cx.t);
            const double bottom = std::lerp(map.at(ry.hi, cx.lo), map.at(ry.hi, cx.hi), cx.t);
            out[i * target_w + j] = std::lerp(top, bottom, ry.t);
        }
    }
    return SaliencyMap(target_h, target_w, std::move(out), map.normalized());
}

SaliencyMap combine(const ScaleStack& stack) {
    const auto weights = stack.weights();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> out(stack.height() * stack.width(), 0.0);
    for (std::size_t k = 0; k < stack.depth(); ++k) {
        const auto values = stack.maps()[k].values();
        for (std::size_t n = 0; n < out.size(); ++n) out[n] += values[n] * weights[k];
    }
    for (double& v : out) v = std::clamp(v / total, 0.0, 1.0);
    return SaliencyMap(stack.height(), stack.width(), std::move(out), true);
}

SaliencyMap rescale_min_max(const SaliencyMap& map) {
    const auto values = map.values();
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(values.begin(), values.end());
    if (hi > lo) {
        for (double& v : out) v = (v - lo) / (hi - lo);
    } else {
        for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    }
    return SaliencyMap(map.height(), map.width(), std::move(out), true);
}

SaliencyMap fuse_cam(const SaliencyMap& combined, const SaliencyMap& cam) {
    require_same_dims(combined, cam, "fuse_cam");
    if (!combined.normalized() || !cam.normalized()) throw UsageError("fuse_cam: both maps must be normalized");
    std::vector<double> product(combined.size());
    for (std::size_t n = 0; n < product.size(); ++n) product[n] = combined.values()[n] * cam.values()[n];
    return rescale_min_max(SaliencyMap(combined.height(), combined.width(), std::move(product), true));
}

ImageBuffer render_overlay(const SaliencyMap& map, const ImageBuffer& image, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("overlay alpha must lie in [0,1]");
    if (!map.normalized()) throw UsageError("render_overlay: map must be normalized");
    if (map.height() != image.height() || map.width() != image.width())
        throw UsageError("render_overlay: map and image dimensions differ");
    const ImageBuffer gray = to_grayscale(image);
    ImageBuffer out(map.height(), map.width(), 1);
    for (std::size_t i = 0; i < map.height(); ++i)
        for (std::size_t j = 0; j < map.width(); ++j)
            out.set(i, j, 0, gray.at(i, j) * alpha + map.at(i, j) * (1.0 - alpha));
    return out;
}

ImageBuffer to_image(const SaliencyMap& map) {
    if (!map.normalized()) throw UsageError("to_image: map must be normalized");
    return ImageBuffer(map.height(), map.width(), 1, std::vector<double>(map.values().begin(), map.values().end()));
}

}  // namespace smoe

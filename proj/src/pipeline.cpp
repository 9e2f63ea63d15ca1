#include "smoe/pipeline.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <string>

namespace smoe {

std::vector<ActivationTensor> load_scale_tensors(const ScaleManifest& manifest, stats::StatisticKind kind) {
    const Stage stage = stats::required_stage(kind);
    std::vector<ActivationTensor> tensors;
    tensors.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        const auto tag = "scale " + std::to_string(e.scale_index);
        std::filesystem::path path = e.post_path;
        if (stage == Stage::pre_activation) {
            if (!e.pre_path)
                throw UsageError(tag + ": " + std::string(stats::to_string(kind)) +
                                 " needs a pre-activation snapshot but the manifest lists none");
            path = *e.pre_path;
        }
        auto t = load_tensor(path, stage);
        if (t.height() != e.height || t.width() != e.width)
            throw ValidationError(tag + ": tensor is " + std::to_string(t.height()) + "x" + std::to_string(t.width()) +
                                  ", manifest says " + std::to_string(e.height) + "x" + std::to_string(e.width));
        tensors.push_back(std::move(t));
    }
    return tensors;
}

PipelineMaps run_pipeline(const std::vector<ActivationTensor>& tensors, std::size_t out_h, std::size_t out_w,
                          stats::StatisticKind kind, const WeightScheme& weights) {
    if (tensors.empty()) throw UsageError("pipeline needs at least one scale");
    std::vector<SaliencyMap> native;
    std::vector<SaliencyMap> upsampled;
    for (const auto& t : tensors) {
        native.push_back(normalize_cdf(compute_scale_map(t, kind)));
        upsampled.push_back(upsample_bilinear(native.back(), out_h, out_w));
    }
    auto w = resolve_weights(weights, tensors.size());
    ScaleStack stack(upsampled, w);
    auto combined = combine(stack);
    return {std::move(native), std::move(upsampled), std::move(w), std::move(combined)};
}

PipelineMaps run_pipeline(const ScaleManifest& manifest, stats::StatisticKind kind, const WeightScheme& weights) {
    return run_pipeline(load_scale_tensors(manifest, kind), manifest.input_image.height, manifest.input_image.width,
                        kind, weights);
}

SaliencyMap load_cam(const std::filesystem::path& path, std::size_t h, std::size_t w) {
    std::size_t ch = 0;
    std::size_t cw = 0;
    std::vector<double> values;
    if (path.extension() == ".npy") {
        auto a = read_npy(path);
        if (a.shape.size() == 3 && a.shape[0] == 1) a.shape.erase(a.shape.begin());
        if (a.shape.size() != 2) throw FormatError(path.string() + ": CAM must be a 2D array");
        ch = a.shape[0];
        cw = a.shape[1];
        values.assign(a.data.begin(), a.data.end());
    } else {
        const auto img = to_grayscale(read_png(path));
        ch = img.height();
        cw = img.width();
        values.assign(img.values().begin(), img.values().end());
    }
    const bool in_range = std::all_of(values.begin(), values.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    SaliencyMap cam(ch, cw, std::move(values), false);
    cam = in_range ? SaliencyMap(ch, cw, std::vector<double>(cam.values().begin(), cam.values().end()), true)
                   : rescale_min_max(cam);
    return upsample_bilinear(cam, h, w);
}

}  // namespace smoe

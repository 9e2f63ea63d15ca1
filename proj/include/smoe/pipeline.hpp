#pragma once

#include "smoe/saliency.hpp"
#include "smoe/stats.hpp"
#include "smoe/tensor_io.hpp"

#include <filesystem>
#include <vector>

namespace smoe {

struct PipelineMaps {
    std::vector<SaliencyMap> native;     // CDF-normalized at each scale's own size
    std::vector<SaliencyMap> upsampled;  // same maps at input image size
    std::vector<double> weights;
    SaliencyMap combined;
};

// Loads every scale's tensor (pre- or post-activation as the statistic
// demands) and checks it against the manifest dims.
std::vector<ActivationTensor> load_scale_tensors(const ScaleManifest& manifest, stats::StatisticKind kind);

// statistic -> CDF normalize at native size -> upsample -> weighted combine
PipelineMaps run_pipeline(const std::vector<ActivationTensor>& tensors, std::size_t out_h, std::size_t out_w,
                          stats::StatisticKind kind, const WeightScheme& weights);
PipelineMaps run_pipeline(const ScaleManifest& manifest, stats::StatisticKind kind, const WeightScheme& weights);

// External class activation map from a 2D float32 .npy or a .png. Out-of-range
// values are min-max rescaled; smaller maps are upsampled to (h, w).
SaliencyMap load_cam(const std::filesystem::path& path, std::size_t h, std::size_t w);

}  // namespace smoe

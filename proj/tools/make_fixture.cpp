// Writes the synthetic 5-scale capture used by the CLI goldens: a 64x64 RGB
// image with a disk-shaped object, ten NPY snapshots (pre/post per scale),
// and manifest.json. Uses its own uniform/normal transforms over mt19937 so
// the bytes do not depend on the standard library's distributions.

#include "smoe/image.hpp"
#include "smoe/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

#include <json.hpp>

namespace {

constexpr std::size_t kImageSize = 64;
constexpr int kScales = 5;

class Noise {
public:
    explicit Noise(std::uint32_t seed) : gen_(seed) {}

    double uniform() { return (static_cast<double>(gen_()) + 0.5) / 4294967296.0; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937 gen_;
};

// 1 inside the object disk, fading to 0 over a couple of pixels.
double object_weight(double y, double x) {
    const double cy = 0.55 * kImageSize;
    const double cx = 0.45 * kImageSize;
    const double d = std::hypot(y - cy, x - cx);
    return std::clamp((15.0 - d) / 3.0, 0.0, 1.0);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixture <output-dir>\n";
        return 2;
    }
    namespace fs = std::filesystem;
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    Noise noise(20200131u);

    smoe::ImageBuffer image(kImageSize, kImageSize, 3);
    for (std::size_t i = 0; i < kImageSize; ++i) {
        for (std::size_t j = 0; j < kImageSize; ++j) {
            const double obj = object_weight(i + 0.5, j + 0.5);
            const double bg = 0.25 + 0.3 * static_cast<double>(i) / kImageSize + 0.05 * noise.uniform();
            image.set(i, j, 0, bg * (1 - obj) + 0.85 * obj);
            image.set(i, j, 1, bg * (1 - obj) + 0.35 * obj);
            image.set(i, j, 2, (bg + 0.1) * (1 - obj) + 0.2 * obj);
        }
    }
    smoe::write_png(dir / "input.png", image);

    nlohmann::json manifest;
    manifest["model"] = "synthetic-5scale";
    manifest["input"] = {{"path", "input.png"}, {"height", kImageSize}, {"width", kImageSize}};
    manifest["scales"] = nlohmann::json::array();

    for (int k = 1; k <= kScales; ++k) {
        const std::size_t size = kImageSize >> k;
        const std::size_t channels = std::size_t{4} << (k - 1);
        const double cell = static_cast<double>(kImageSize) / static_cast<double>(size);
        std::vector<float> pre(channels * size * size);
        std::vector<float> post(pre.size());
        for (std::size_t c = 0; c < channels; ++c) {
            // a few channels respond to the object, more strongly in deeper scales
            const bool selective = (c * 7 + static_cast<std::size_t>(k)) % 5 == 0;
            for (std::size_t i = 0; i < size; ++i) {
                for (std::size_t j = 0; j < size; ++j) {
                    const double obj = object_weight((i + 0.5) * cell, (j + 0.5) * cell);
                    const double texture = k <= 2 ? 0.3 * std::sin(0.9 * static_cast<double>(i * cell) +
                                                                  0.4 * static_cast<double>(c))
                                                  : 0.0;
                    double v = -0.2 + 0.3 * noise.normal() + texture;
                    if (selective) v += (0.8 + 0.4 * k) * obj;
                    const std::size_t n = (c * size + i) * size + j;
                    pre[n] = static_cast<float>(v);
                    post[n] = std::max(0.0f, pre[n]);
                }
            }
        }
        const auto pre_name = "scale" + std::to_string(k) + "_pre.npy";
        const auto post_name = "scale" + std::to_string(k) + "_post.npy";
        smoe::save_tensor(dir / pre_name, smoe::ActivationTensor(channels, size, size, pre, smoe::Stage::pre_activation));
        smoe::save_tensor(dir / post_name,
                          smoe::ActivationTensor(channels, size, size, post, smoe::Stage::post_activation));
        manifest["scales"].push_back(
            {{"index", k}, {"post", post_name}, {"pre", pre_name}, {"height", size}, {"width", size}});
    }
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
    return 0;
}

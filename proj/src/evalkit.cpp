#include "smoe/evalkit.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace smoe::evalkit {

namespace {

void require_dims(std::size_t h, std::size_t w, const BinaryMask& mask, const char* op) {
    if (mask.height() != h || mask.width() != w)
        throw UsageError(fmt::format("{}: mask is {}x{}, target is {}x{}", op, mask.height(), mask.width(), h, w));
}

void require_lengths(const ScoreVectors& v) {
    const auto n = v.kappa.size();
    if (n == 0) throw UsageError("score vectors are empty");
    if (v.rho.size() != n || v.z_kar.size() != n || v.z_roar.size() != n)
        throw UsageError(fmt::format("score vector lengths differ (kappa {}, rho {}, z_kar {}, z_roar {})", n,
                                     v.rho.size(), v.z_kar.size(), v.z_roar.size()));
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

// Combine Ops column of the published per-layer breakdown. No closed form
// reproduces it, so it is carried as data for the matching configuration.
constexpr std::array<std::uint64_t, 5> kResNet50CombineOps{225792, 338688, 338688, 338688, 338688};

}  // namespace

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<bool> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != height_ * width_) throw ValidationError("mask bits length mismatch");
}

std::size_t BinaryMask::popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

BinaryMask make_mask(const SaliencyMap& map, const MaskSpec& spec) {
    if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) throw UsageError("mask fraction must lie in [0,1]");
    const std::size_t total = map.size();
    const auto n = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(total)));

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    const auto values = map.values();
    // Descending by value, ascending index on ties.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    const bool keep = spec.mode == MaskMode::kar_keep;
    std::vector<bool> bits(total, !keep);
    for (std::size_t r = 0; r < n; ++r) bits[order[r]] = keep;
    return BinaryMask(map.height(), map.width(), std::move(bits));
}

ImageBuffer apply_image_mask(const ImageBuffer& image, const BinaryMask& mask, Fill fill) {
    require_dims(image.height(), image.width(), mask, "apply_image_mask");
    std::vector<double> fill_value(image.channels(), 0.0);
    if (fill == Fill::per_channel_mean) {
        for (std::size_t i = 0; i < image.height(); ++i)
            for (std::size_t j = 0; j < image.width(); ++j)
                for (std::size_t c = 0; c < image.channels(); ++c) fill_value[c] += image.at(i, j, c);
        for (double& v : fill_value) v /= static_cast<double>(image.height() * image.width());
    }
    ImageBuffer out = image;
    for (std::size_t i = 0; i < image.height(); ++i)
        for (std::size_t j = 0; j < image.width(); ++j)
            if (!mask.at(i, j))
                for (std::size_t c = 0; c < image.channels(); ++c) out.set(i, j, c, fill_value[c]);
    return out;
}

ActivationTensor apply_tensor_mask(const ActivationTensor& tensor, const BinaryMask& mask) {
    require_dims(tensor.height(), tensor.width(), mask, "apply_tensor_mask");
    std::vector<float> values(tensor.values().begin(), tensor.values().end());
    const std::size_t plane = tensor.height() * tensor.width();
    for (std::size_t i = 0; i < tensor.height(); ++i)
        for (std::size_t j = 0; j < tensor.width(); ++j)
            if (!mask.at(i, j))
                for (std::size_t k = 0; k < tensor.channels(); ++k) values[k * plane + i * tensor.width() + j] = 0.0f;
    return ActivationTensor(tensor.channels(), tensor.height(), tensor.width(), std::move(values), tensor.stage());
}

ImageBuffer mask_image(const BinaryMask& mask) {
    ImageBuffer out(mask.height(), mask.width(), 1);
    for (std::size_t i = 0; i < mask.height(); ++i)
        for (std::size_t j = 0; j < mask.width(); ++j) out.set(i, j, 0, mask.at(i, j) ? 1.0 : 0.0);
    return out;
}

ScoreVectors ScoreVectors::with_shared_baseline(std::vector<double> kappa, std::vector<double> rho,
                                                std::vector<double> z) {
    return {std::move(kappa), std::move(rho), z, z};
}

double difference_score(const ScoreVectors& v) {
    require_lengths(v);
    double d = 0.0;
    for (std::size_t p = 0; p < v.rho.size(); ++p) d += v.z_roar[p] - v.rho[p];
    for (std::size_t q = 0; q < v.kappa.size(); ++q) d += v.kappa[q] - v.z_kar[q];
    return d;
}

double information_score(const ScoreVectors& v) {
    require_lengths(v);
    for (const auto* vec : {&v.kappa, &v.rho, &v.z_kar, &v.z_roar})
        for (double x : *vec)
            if (!(x > 0.0)) throw UsageError("information score needs strictly positive accuracies");
    double score = 0.0;
    for (std::size_t p = 0; p < v.rho.size(); ++p) score -= v.rho[p] * std::log(v.rho[p] / v.z_roar[p]);
    for (std::size_t q = 0; q < v.kappa.size(); ++q) score -= v.z_kar[q] * std::log(v.z_kar[q] / v.kappa[q]);
    return score;
}

ScoreVectors parse_score_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        header = split_row(line);
    }
    if (header.empty()) throw FormatError("score csv: missing header row");

    std::map<std::string, std::size_t> col;
    for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
    for (const char* required : {"kappa", "rho"})
        if (!col.count(required)) throw FormatError(fmt::format("score csv: header lacks column '{}'", required));
    const bool shared = col.count("z") > 0;
    if (!shared && (!col.count("z_kar") || !col.count("z_roar")))
        throw FormatError("score csv: header needs 'z' or both 'z_kar' and 'z_roar'");

    ScoreVectors v;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split_row(line);
        if (cells.size() != header.size())
            throw FormatError(fmt::format("score csv row {}: expected {} fields, got {}", row, header.size(),
                                          cells.size()));
        auto number = [&](const char* name) {
            const auto& text = cells[col.at(name)];
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != text.size() || !std::isfinite(x) || x < 0.0)
                throw FormatError(fmt::format("score csv row {}: bad {} value '{}'", row, name, text));
            return x;
        };
        v.kappa.push_back(number("kappa"));
        v.rho.push_back(number("rho"));
        if (shared) {
            const double z = number("z");
            v.z_kar.push_back(z);
            v.z_roar.push_back(z);
        } else {
            v.z_kar.push_back(number("z_kar"));
            v.z_roar.push_back(number("z_roar"));
        }
    }
    if (v.kappa.empty()) throw FormatError("score csv: no data rows");

    bool percent = false;
    for (const auto* vec : {&v.kappa, &v.rho, &v.z_kar, &v.z_roar})
        for (double x : *vec) percent = percent || x > 1.5;
    if (percent)
        for (auto* vec : {&v.kappa, &v.rho, &v.z_kar, &v.z_roar})
            for (double& x : *vec) x /= 100.0;
    for (const auto* vec : {&v.kappa, &v.rho, &v.z_kar, &v.z_roar})
        for (double x : *vec)
            if (x > 1.0) throw FormatError("score csv: accuracy above 100%");
    return v;
}

ScoreVectors load_score_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score csv " + path.string());
    return parse_score_csv(in);
}

double FlopsReport::overhead_ratio(double network_flops) const {
    return static_cast<double>(grand_total) / network_flops;
}

const std::vector<LayerDims>& resnet50_layers() {
    static const std::vector<LayerDims> layers{
        {64, 112, 112}, {256, 56, 56}, {512, 28, 28}, {1024, 14, 14}, {2048, 7, 7}};
    return layers;
}

FlopsReport flops_report(const std::vector<LayerDims>& layers) {
    if (layers.empty()) throw UsageError("flops report needs at least one layer");
    const bool reference = layers == resnet50_layers();
    FlopsReport rep;
    std::uint64_t combine_total = 0;
    for (std::size_t n = 0; n < layers.size(); ++n) {
        const auto& d = layers[n];
        if (d.channels == 0 || d.height == 0 || d.width == 0) throw UsageError("layer dimensions must be >= 1");
        const std::uint64_t pixels = d.height * d.width;
        FlopsRow row{d, pixels * (4 * d.channels + 1), 12 * pixels, std::nullopt};
        if (reference) {
            row.combine_ops = kResNet50CombineOps[n];
            combine_total += kResNet50CombineOps[n];
        }
        rep.smoe_total += row.smoe_ops;
        rep.norm_total += row.norm_ops;
        rep.rows.push_back(row);
    }
    if (reference) rep.combine_total = combine_total;
    rep.grand_total = rep.smoe_total + rep.norm_total + rep.combine_total.value_or(0);
    return rep;
}

std::string format_flops_table(const FlopsReport& report) {
    auto combine = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
    std::string out = fmt::format("{:<8} {:>9} {:>7} {:>7} {:>12} {:>10} {:>12}\n", "Layer", "Channels", "Size H",
                                  "Size W", "SMOE Ops", "Norm Ops", "Combine Ops");
    for (std::size_t n = 0; n < report.rows.size(); ++n) {
        const auto& r = report.rows[n];
        out += fmt::format("{:<8} {:>9} {:>7} {:>7} {:>12} {:>10} {:>12}\n", fmt::format("Layer {}", n + 1),
                           r.dims.channels, r.dims.height, r.dims.width, r.smoe_ops, r.norm_ops,
                           combine(r.combine_ops));
    }
    out += fmt::format("{:<8} {:>9} {:>7} {:>7} {:>12} {:>10} {:>12}\n", "Total", "", "", "", report.smoe_total,
                       report.norm_total, combine(report.combine_total));
    out += fmt::format("Grand total: {} FLOPs\n", report.grand_total);
    out += fmt::format("Overhead vs {:.1e} FLOP forward pass: {:.2f}%\n", FlopsReport::kResNet50ForwardFlops,
                       100.0 * report.overhead_ratio());
    if (!report.combine_total)
        out += "Combine Ops are reference data for the ResNet-50 configuration only; excluded from totals.\n";
    return out;
}

std::string flops_json(const FlopsReport& report, double network_flops) {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row{{"channels", r.dims.channels},
                           {"height", r.dims.height},
                           {"width", r.dims.width},
                           {"smoe_ops", r.smoe_ops},
                           {"norm_ops", r.norm_ops}};
        row["combine_ops"] = r.combine_ops ? nlohmann::json(*r.combine_ops) : nlohmann::json(nullptr);
        j["layers"].push_back(row);
    }
    j["totals"] = {{"smoe_ops", report.smoe_total},
                   {"norm_ops", report.norm_total},
                   {"combine_ops", report.combine_total ? nlohmann::json(*report.combine_total) : nlohmann::json(nullptr)},
                   {"grand_total", report.grand_total}};
    j["overhead_ratio"] = report.overhead_ratio(network_flops);
    j["network_flops"] = network_flops;
    return j.dump(2) + "\n";
}

}  // namespace smoe::evalkit

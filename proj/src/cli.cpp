#include "smoe/cli.hpp"

#include "smoe/errors.hpp"
#include "smoe/evalkit.hpp"
#include "smoe/image.hpp"
#include "smoe/lovi.hpp"
#include "smoe/pipeline.hpp"
#include "smoe/saliency.hpp"
#include "smoe/stats.hpp"
#include "smoe/tensor_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

namespace smoe::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
    fs::path manifest;
    std::string stat = "smoe_scale";
    std::string weights;  // empty: prior for 5 scales, else uniform
    fs::path out = ".";
    double alpha = 0.25;
    std::string mode;
    std::optional<double> fraction;
    std::string fill = "zero";
    fs::path cam;
    fs::path config;
};

struct StageFailure {
    std::string stage;
    std::string message;
    bool usage;
};

template <class F>
auto in_stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const UsageError& e) {
        throw StageFailure{name, e.what(), true};
    } catch (const std::exception& e) {
        throw StageFailure{name, e.what(), false};
    }
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    sink->set_pattern("[%l] %v");
    auto logger = std::make_shared<spdlog::logger>("smoe", sink);
    logger->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SMOE_LOG")) logger->set_level(spdlog::level::from_str(env));
    return logger;
}

class Runner {
public:
    Runner(const RunConfig& cfg, std::ostream& out, std::shared_ptr<spdlog::logger> log)
        : cfg_(cfg), out_(out), log_(std::move(log)) {}

    void saliency() {
        auto ctx = prepare();
        for (std::size_t k = 0; k < ctx.maps.upsampled.size(); ++k)
            emit(fmt::format("scale_{}.png", k + 1), to_image(ctx.maps.upsampled[k]));
        emit("combined.png", to_image(ctx.maps.combined));
        emit("overlay.png",
             in_stage("overlay", [&] { return render_overlay(ctx.maps.combined, ctx.image, cfg_.alpha); }));
    }

    void lovi() {
        auto ctx = prepare();
        if (ctx.maps.upsampled.size() < 2)
            throw StageFailure{"lovi", "layer visualization needs at least 2 scales", true};
        auto color = in_stage("lovi", [&] {
            return lovi::lovi_render(ScaleStack(ctx.maps.upsampled, ctx.maps.weights));
        });
        emit("lovi.png", color);
        emit("lovi_overlay.png", in_stage("overlay", [&] { return lovi::blend_with_gray(color, ctx.image, cfg_.alpha); }));
    }

    void mask() {
        const auto spec = in_stage("arguments", [&] { return mask_spec(); });
        auto ctx = prepare();
        auto m = in_stage("mask", [&] { return evalkit::make_mask(ctx.maps.combined, spec); });
        log_->info("mask passes {} of {} pixels", m.popcount(), m.bits().size());
        emit("masked.png", in_stage("mask", [&] { return evalkit::apply_image_mask(ctx.image, m, spec.fill); }));
        emit("mask.png", evalkit::mask_image(m));
    }

    void fuse() {
        if (cfg_.cam.empty()) throw StageFailure{"arguments", "fuse-cam needs --cam", true};
        auto ctx = prepare();
        auto cam = in_stage("load cam", [&] {
            return load_cam(cfg_.cam, ctx.maps.combined.height(), ctx.maps.combined.width());
        });
        auto fused = in_stage("fuse", [&] { return fuse_cam(ctx.maps.combined, cam); });
        emit("fused.png", to_image(fused));
        emit("fused_overlay.png", in_stage("overlay", [&] { return render_overlay(fused, ctx.image, cfg_.alpha); }));
    }

private:
    struct Context {
        PipelineMaps maps;
        ImageBuffer image;
    };

    Context prepare() {
        if (cfg_.manifest.empty()) throw StageFailure{"arguments", "--manifest is required", true};
        if (!(cfg_.alpha >= 0.0 && cfg_.alpha <= 1.0))
            throw StageFailure{"arguments", "--alpha must lie in [0,1]", true};
        auto kind = stats::parse_statistic(cfg_.stat);
        if (!kind) throw StageFailure{"arguments", "unknown statistic '" + cfg_.stat + "'", true};

        auto manifest = in_stage("load manifest", [&] { return load_manifest(cfg_.manifest); });
        const auto scheme = in_stage("weights", [&] {
            return cfg_.weights.empty() ? WeightScheme::default_for(manifest.entries.size())
                                        : parse_weight_scheme(cfg_.weights);
        });
        auto tensors = in_stage("load tensors", [&] { return load_scale_tensors(manifest, *kind); });
        log_->info("{} scales from {} ({})", tensors.size(), cfg_.manifest.string(), manifest.model_name);
        auto maps = in_stage("saliency", [&] {
            return run_pipeline(tensors, manifest.input_image.height, manifest.input_image.width, *kind, scheme);
        });
        auto image = in_stage("load image", [&] {
            auto img = read_png(manifest.input_image.path);
            if (img.height() != manifest.input_image.height || img.width() != manifest.input_image.width)
                throw ValidationError(fmt::format("input image is {}x{}, manifest says {}x{}", img.height(),
                                                  img.width(), manifest.input_image.height,
                                                  manifest.input_image.width));
            return img;
        });
        in_stage("prepare output", [&] { fs::create_directories(cfg_.out); });
        return {std::move(maps), std::move(image)};
    }

    evalkit::MaskSpec mask_spec() const {
        if (cfg_.mode.empty() || !cfg_.fraction) throw UsageError("mask needs --mode and --fraction");
        evalkit::MaskSpec spec;
        if (cfg_.mode == "kar") spec.mode = evalkit::MaskMode::kar_keep;
        else if (cfg_.mode == "roar") spec.mode = evalkit::MaskMode::roar_remove;
        else throw UsageError("--mode must be kar or roar");
        if (!(*cfg_.fraction >= 0.0 && *cfg_.fraction <= 1.0)) throw UsageError("--fraction must lie in [0,1]");
        spec.fraction = *cfg_.fraction;
        if (cfg_.fill == "zero") spec.fill = evalkit::Fill::zero;
        else if (cfg_.fill == "mean") spec.fill = evalkit::Fill::per_channel_mean;
        else throw UsageError("--fill must be zero or mean");
        return spec;
    }

    void emit(const std::string& name, const ImageBuffer& image) {
        const auto path = cfg_.out / name;
        in_stage("write " + name, [&] { write_png(path, image); });
        log_->info("wrote {}", path.string());
        out_ << path.string() << "\n";
    }

    const RunConfig& cfg_;
    std::ostream& out_;
    std::shared_ptr<spdlog::logger> log_;
};

evalkit::LayerDims parse_layer(const std::string& text) {
    std::vector<std::uint64_t> parts;
    std::size_t pos = 0;
    while (true) {
        auto comma = text.find(',', pos);
        auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw UsageError("bad layer spec '" + text + "', expected r,H,W");
        parts.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (parts.size() != 3) throw UsageError("bad layer spec '" + text + "', expected r,H,W");
    return {parts[0], parts[1], parts[2]};
}

void add_map_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--manifest", cfg.manifest, "Scale manifest (JSON)");
    sub->add_option("--stat", cfg.stat, "Column statistic")->capture_default_str();
    sub->add_option("--weights", cfg.weights, "uniform | ramp | prior | w1,w2,...");
    sub->add_option("--alpha", cfg.alpha, "Gray image weight in overlays")->capture_default_str();
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sub->add_option("--config", cfg.config, "Key-value config file; flags override it");
}

// Fills options not given on the command line from a TOML/INI-style file.
void apply_config(CLI::App* sub, const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw UsageError("config file " + path.string() + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty() && item.parents != std::vector<std::string>{sub->get_name()}) continue;
        auto* opt = sub->get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config")
            throw UsageError("config file " + path.string() + ": unknown key '" + item.fullname() + "'");
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto log = make_logger(err);

    CLI::App app{"Activation-statistic saliency maps, layer visualizations, masks, and score arithmetic", "smoe"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* sal = app.add_subcommand("saliency", "Per-scale and combined saliency maps with overlay");
    add_map_options(sal, cfg);

    auto* lov = app.add_subcommand("lovi", "Layer-ordered HSV visualization of the scale maps");
    add_map_options(lov, cfg);

    auto* msk = app.add_subcommand("mask", "KAR/ROAR masked image from the combined map");
    add_map_options(msk, cfg);
    msk->add_option("--mode", cfg.mode, "kar | roar");
    msk->add_option("--fraction", cfg.fraction, "Fraction of pixels kept (kar) or removed (roar)");
    msk->add_option("--fill", cfg.fill, "zero | mean")->capture_default_str();

    auto* fus = app.add_subcommand("fuse-cam", "Multiply the combined map with an external class activation map");
    add_map_options(fus, cfg);
    fus->add_option("--cam", cfg.cam, "CAM as 2D float32 .npy or .png");

    std::string csv;
    auto* score = app.add_subcommand("score", "Difference and information scores from per-layer accuracies");
    score->add_option("csv", csv, "CSV with layer,kappa,rho,z (or z_kar,z_roar)")->required();

    bool resnet50 = false;
    bool as_json = false;
    double network_flops = evalkit::FlopsReport::kResNet50ForwardFlops;
    std::vector<std::string> layer_specs;
    auto* flops = app.add_subcommand("flops", "Operation counts per tapped layer");
    flops->add_flag("--resnet50", resnet50, "Use the five ResNet-50 scale taps");
    flops->add_option("--layer", layer_specs, "Layer as r,H,W (repeatable)");
    flops->add_flag("--json", as_json, "Emit JSON instead of a table");
    flops->add_option("--network-flops", network_flops, "Forward-pass FLOPs for the overhead ratio")
        ->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (auto* sub : {sal, lov, msk, fus})
            if (*sub && !cfg.config.empty()) in_stage("arguments", [&] { apply_config(sub, cfg.config); });
        Runner runner(cfg, out, log);
        if (*sal) {
            runner.saliency();
        } else if (*lov) {
            runner.lovi();
        } else if (*msk) {
            runner.mask();
        } else if (*fus) {
            runner.fuse();
        } else if (*score) {
            auto v = in_stage("load scores", [&] { return evalkit::load_score_csv(csv); });
            const double d = in_stage("difference score", [&] { return evalkit::difference_score(v); });
            const double i = in_stage("information score", [&] { return evalkit::information_score(v); });
            out << fmt::format("layers: {}\ndifference_score: {:.4f}\ninformation_score: {:.4f}\n", v.kappa.size(),
                               d, i);
        } else if (*flops) {
            if (resnet50 && !layer_specs.empty())
                throw StageFailure{"arguments", "use either --resnet50 or --layer, not both", true};
            if (!resnet50 && layer_specs.empty())
                throw StageFailure{"arguments", "flops needs --resnet50 or at least one --layer r,H,W", true};
            if (!(network_flops > 0.0)) throw StageFailure{"arguments", "--network-flops must be positive", true};
            std::vector<evalkit::LayerDims> layers = evalkit::resnet50_layers();
            if (!resnet50) {
                layers.clear();
                for (const auto& s : layer_specs) layers.push_back(in_stage("arguments", [&] { return parse_layer(s); }));
            }
            auto rep = in_stage("flops", [&] { return evalkit::flops_report(layers); });
            if (as_json) {
                out << evalkit::flops_json(rep, network_flops);
            } else {
                out << evalkit::format_flops_table(rep);
                if (network_flops != evalkit::FlopsReport::kResNet50ForwardFlops)
                    out << fmt::format("Overhead vs {:.3e} FLOP forward pass: {:.2f}%\n", network_flops,
                                       100.0 * rep.overhead_ratio(network_flops));
            }
        }
    } catch (const StageFailure& f) {
        err << "error [" << f.stage << "]: " << f.message << "\n";
        return f.usage ? kExitUsage : kExitFailure;
    }
    return kExitOk;
}

}  // namespace smoe::cli

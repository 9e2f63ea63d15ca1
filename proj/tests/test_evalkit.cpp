#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smoe/errors.hpp"
#include "smoe/evalkit.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

using namespace smoe;
using namespace smoe::evalkit;

namespace {

SaliencyMap random_map(std::mt19937& gen, std::size_t h, std::size_t w) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(h * w);
    for (auto& x : v) x = u(gen);
    return SaliencyMap(h, w, std::move(v), true);
}

SaliencyMap transformed(const SaliencyMap& m, double (*f)(double)) {
    std::vector<double> v(m.values().begin(), m.values().end());
    for (auto& x : v) x = f(x);
    return SaliencyMap(m.height(), m.width(), std::move(v), false);
}

BinaryMask all(std::size_t h, std::size_t w, bool bit) { return BinaryMask(h, w, std::vector<bool>(h * w, bit)); }

// Direct evaluation of the two score sums, written out term by term.
double difference_oracle(const std::vector<double>& k, const std::vector<double>& r, const std::vector<double>& zk,
                         const std::vector<double>& zr) {
    double roar = 0.0, kar = 0.0;
    for (std::size_t n = 0; n < k.size(); ++n) {
        roar += zr[n] - r[n];
        kar += k[n] - zk[n];
    }
    return roar + kar;
}

}  // namespace

TEST_CASE("mask fractions at the extremes") {
    std::mt19937 gen(1);
    auto m = random_map(gen, 6, 7);
    CHECK(make_mask(m, {MaskMode::kar_keep, 1.0}) == all(6, 7, true));
    CHECK(make_mask(m, {MaskMode::kar_keep, 0.0}) == all(6, 7, false));
    CHECK(make_mask(m, {MaskMode::roar_remove, 1.0}) == all(6, 7, false));
    CHECK(make_mask(m, {MaskMode::roar_remove, 0.0}) == all(6, 7, true));
    CHECK_THROWS_AS(make_mask(m, {MaskMode::kar_keep, 1.5}), UsageError);
    CHECK_THROWS_AS(make_mask(m, {MaskMode::kar_keep, -0.1}), UsageError);
}

TEST_CASE("ties break by row-major index") {
    SaliencyMap m(2, 2, {0.9, 0.1, 0.5, 0.5}, true);
    auto mask = make_mask(m, {MaskMode::kar_keep, 0.5});
    CHECK(mask.at(0, 0));
    CHECK_FALSE(mask.at(0, 1));
    CHECK(mask.at(1, 0));
    CHECK_FALSE(mask.at(1, 1));

    SaliencyMap flat(3, 3, std::vector<double>(9, 0.2), true);
    auto first = make_mask(flat, {MaskMode::kar_keep, 1.0 / 3.0});
    for (std::size_t j = 0; j < 3; ++j) CHECK(first.at(0, j));
    CHECK(first.popcount() == 3);
}

TEST_CASE("popcount follows the rounding rule") {
    std::mt19937 gen(2);
    for (double f : {0.025, 0.1, 0.25, 0.5, 0.73}) {
        auto m = random_map(gen, 17, 23);
        const auto n = static_cast<std::size_t>(std::llround(f * 17 * 23));
        CHECK(make_mask(m, {MaskMode::kar_keep, f}).popcount() == n);
        CHECK(make_mask(m, {MaskMode::roar_remove, f}).popcount() == 17 * 23 - n);
    }
}

TEST_CASE("masks are invariant to increasing transforms") {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = random_map(gen, 14, 14);
        for (double f : {0.025, 0.1, 0.5}) {
            for (auto mode : {MaskMode::kar_keep, MaskMode::roar_remove}) {
                const auto ref = make_mask(m, {mode, f});
                CHECK(make_mask(transformed(m, [](double x) { return 3.0 * x - 1.0; }), {mode, f}) == ref);
                CHECK(make_mask(transformed(m, [](double x) { return x * x * x; }), {mode, f}) == ref);
                CHECK(make_mask(normalize_cdf(m), {mode, f}) == ref);
            }
        }
    }
}

TEST_CASE("KAR and ROAR at the same fraction are complements") {
    std::mt19937 gen(4);
    auto m = random_map(gen, 10, 12);
    auto keep = make_mask(m, {MaskMode::kar_keep, 0.3});
    auto remove = make_mask(m, {MaskMode::roar_remove, 0.3});
    for (std::size_t n = 0; n < keep.bits().size(); ++n) CHECK(keep.bits()[n] != remove.bits()[n]);
}

TEST_CASE("image masking") {
    ImageBuffer img(2, 2, 3, {0.1, 0.3, 0.5, 0.3, 0.5, 0.7, 0.1, 0.3, 0.5, 0.3, 0.5, 0.7});
    CHECK(apply_image_mask(img, all(2, 2, true)) == img);
    const auto black = apply_image_mask(img, all(2, 2, false));
    for (double v : black.values()) CHECK(v == 0.0);

    const auto mean = apply_image_mask(img, all(2, 2, false), Fill::per_channel_mean);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(mean.at(i, j, 0) == doctest::Approx(0.2));
            CHECK(mean.at(i, j, 1) == doctest::Approx(0.4));
            CHECK(mean.at(i, j, 2) == doctest::Approx(0.6));
        }

    BinaryMask one(2, 2, {true, false, true, true});
    auto partial = apply_image_mask(img, one);
    CHECK(partial.at(0, 0, 1) == img.at(0, 0, 1));
    CHECK(partial.at(0, 1, 2) == 0.0);
    CHECK_THROWS_AS(apply_image_mask(img, all(3, 2, true)), UsageError);
}

TEST_CASE("tensor masking") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<float> u(0.1f, 2.0f);
    std::vector<float> v(6 * 5 * 4);
    for (auto& x : v) x = u(gen);
    ActivationTensor t(6, 5, 4, v, Stage::post_activation);

    CHECK(apply_tensor_mask(t, all(5, 4, true)).values().size() == v.size());
    auto same = apply_tensor_mask(t, all(5, 4, true));
    CHECK(std::equal(same.values().begin(), same.values().end(), v.begin()));

    std::vector<bool> bits(20, true);
    bits[7] = false;
    auto single = apply_tensor_mask(t, BinaryMask(5, 4, bits));
    CHECK(std::count(single.values().begin(), single.values().end(), 0.0f) == 6);

    auto mask = make_mask(random_map(gen, 5, 4), {MaskMode::kar_keep, 0.35});
    auto masked = apply_tensor_mask(t, mask);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const auto c = masked.column(i, j);
            bool any = false;
            for (std::size_t k = 0; k < c.size(); ++k) any = any || c[k] != 0.0;
            nonzero += any;
        }
    CHECK(nonzero == mask.popcount());
    CHECK_THROWS_AS(apply_tensor_mask(t, all(4, 5, true)), UsageError);
}

TEST_CASE("mask image is 0/1 gray") {
    auto img = mask_image(BinaryMask(1, 3, {true, false, true}));
    CHECK(img.channels() == 1);
    CHECK(img.at(0, 0) == 1.0);
    CHECK(img.at(0, 1) == 0.0);
}

TEST_CASE("scores on identical vectors vanish") {
    const std::vector<double> z{0.6, 0.5, 0.4, 0.45, 0.7};
    auto v = ScoreVectors::with_shared_baseline(z, z, z);
    CHECK(difference_score(v) == 0.0);
    CHECK(information_score(v) == 0.0);

    // each ROAR term is positive when rho < z
    auto better = ScoreVectors::with_shared_baseline(z, {0.5, 0.5, 0.4, 0.45, 0.7}, z);
    CHECK(information_score(better) > 0.0);
    CHECK(difference_score(better) == doctest::Approx(0.1));
}

TEST_CASE("scores from the published ImageNet table") {
    auto smoe = load_score_csv(test::data_dir() / "imagenet_smoe.csv");
    auto stdev = load_score_csv(test::data_dir() / "imagenet_std.csv");
    REQUIRE(smoe.kappa.size() == 5);
    CHECK(smoe.kappa[0] == doctest::Approx(0.5661));
    CHECK(smoe.z_roar[4] == doctest::Approx(0.6604));

    CHECK(std::abs(difference_score(smoe) - 1.70) <= 0.01);
    CHECK(std::abs(difference_score(stdev) - 1.64) <= 0.01);
    CHECK(std::abs(information_score(smoe) - 1.13) <= 0.01);
    CHECK(std::abs(information_score(stdev) - 1.07) <= 0.01);
    CHECK(difference_score(smoe) ==
          doctest::Approx(difference_oracle(smoe.kappa, smoe.rho, smoe.z_kar, smoe.z_roar)).epsilon(1e-12));

    // a base-2 log would overshoot the published value
    double log2_score = 0.0;
    for (std::size_t n = 0; n < 5; ++n) {
        log2_score -= smoe.rho[n] * std::log2(smoe.rho[n] / smoe.z_roar[n]);
        log2_score -= smoe.z_kar[n] * std::log2(smoe.z_kar[n] / smoe.kappa[n]);
    }
    CHECK(std::abs(log2_score - 1.63) <= 0.01);
}

TEST_CASE("score errors") {
    const std::vector<double> z{0.5, 0.5};
    CHECK_THROWS_AS(difference_score(ScoreVectors::with_shared_baseline({0.5}, z, z)), UsageError);
    CHECK_THROWS_AS(information_score(ScoreVectors::with_shared_baseline({0.5, 0.0}, z, z)), UsageError);
    CHECK_THROWS_AS(difference_score(ScoreVectors{}), UsageError);
}

TEST_CASE("score csv parsing") {
    std::istringstream fractions("layer,kappa,rho,z\n1,0.5,0.4,0.45\n2,0.6,0.3,0.5\n");
    std::istringstream percents("layer, kappa, rho, z\n# comment\n1,50,40,45\n\n2,60,30,50\n");
    auto a = parse_score_csv(fractions);
    auto b = parse_score_csv(percents);
    REQUIRE(a.kappa.size() == 2);
    REQUIRE(b.kappa.size() == 2);
    for (std::size_t n = 0; n < 2; ++n) {
        CHECK(a.kappa[n] == doctest::Approx(b.kappa[n]));
        CHECK(a.rho[n] == doctest::Approx(b.rho[n]));
        CHECK(a.z_kar[n] == doctest::Approx(b.z_kar[n]));
        CHECK(b.z_kar[n] == b.z_roar[n]);
    }

    auto error_text = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_score_csv(in);
        } catch (const FormatError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(error_text("layer,kappa,rho,z\n1,0.5,0.4,0.4\n2,0.5,abc,0.4\n").find("row 3") != std::string::npos);
    CHECK(error_text("layer,kappa,rho,z\n1,0.5,0.4\n").find("row 2") != std::string::npos);
    CHECK_FALSE(error_text("layer,kappa,z\n1,0.5,0.4\n").empty());
    CHECK_FALSE(error_text("layer,kappa,rho,z_kar\n1,0.5,0.4,0.4\n").empty());
    CHECK_FALSE(error_text("layer,kappa,rho,z\n").empty());
    CHECK_FALSE(error_text("").empty());
    CHECK_FALSE(error_text("layer,kappa,rho,z\n1,150,40,45\n").empty());
    CHECK_FALSE(error_text("layer,kappa,rho,z\n1,-0.5,0.4,0.4\n").empty());
    CHECK_THROWS_AS(load_score_csv(test::data_dir() / "missing.csv"), IoError);
}

TEST_CASE("FLOPs for the ResNet-50 layers") {
    const auto rep = flops_report(resnet50_layers());
    REQUIRE(rep.rows.size() == 5);
    const std::uint64_t smoe[] = {3223808, 3214400, 1606416, 803012, 401457};
    const std::uint64_t norm[] = {150528, 37632, 9408, 2352, 588};
    for (std::size_t n = 0; n < 5; ++n) {
        CHECK(rep.rows[n].smoe_ops == smoe[n]);
        CHECK(rep.rows[n].norm_ops == norm[n]);
        REQUIRE(rep.rows[n].combine_ops.has_value());
    }
    CHECK(*rep.rows[0].combine_ops == 225792);
    CHECK(rep.smoe_total == 9249093);
    CHECK(rep.norm_total == 200508);
    CHECK(rep.combine_total == 1580544);
    CHECK(rep.grand_total == 11030145);
    CHECK(std::abs(100.0 * rep.overhead_ratio() - 0.29) <= 0.01);

    const auto table = format_flops_table(rep);
    CHECK(table.find("11030145") != std::string::npos);
    CHECK(table.find("0.29%") != std::string::npos);
}

TEST_CASE("FLOPs for other layer lists") {
    const auto one = flops_report({{1, 1, 1}});
    CHECK(one.rows[0].smoe_ops == 5);
    CHECK(one.rows[0].norm_ops == 12);
    CHECK_FALSE(one.rows[0].combine_ops.has_value());
    CHECK_FALSE(one.combine_total.has_value());
    CHECK(one.grand_total == 17);

    // a prefix of the reference config is not the reference config
    const auto partial = flops_report({{64, 112, 112}, {256, 56, 56}});
    CHECK_FALSE(partial.combine_total.has_value());
    CHECK(partial.smoe_total == 3223808 + 3214400);

    CHECK_THROWS_AS(flops_report({}), UsageError);
    CHECK_THROWS_AS(flops_report({{0, 3, 3}}), UsageError);
    CHECK(format_flops_table(one).find("excluded") != std::string::npos);
}

TEST_CASE("FLOPs JSON") {
    const auto j = nlohmann::json::parse(flops_json(flops_report(resnet50_layers())));
    CHECK(j["layers"].size() == 5);
    CHECK(j["layers"][4]["smoe_ops"] == 401457);
    CHECK(j["totals"]["grand_total"] == 11030145);
    CHECK(j["overhead_ratio"].get<double>() == doctest::Approx(11030145 / 3.8e9));

    const auto k = nlohmann::json::parse(flops_json(flops_report({{8, 2, 2}})));
    CHECK(k["layers"][0]["combine_ops"].is_null());
    CHECK(k["totals"]["combine_ops"].is_null());
}

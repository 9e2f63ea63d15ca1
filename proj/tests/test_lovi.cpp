#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smoe/errors.hpp"
#include "smoe/lovi.hpp"

#include <algorithm>
#include <random>
#include <vector>

using namespace smoe;
using namespace smoe::lovi;

namespace {

using Vec = std::vector<double>;

bool near(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

SaliencyMap filled(std::size_t h, std::size_t w, double v) { return SaliencyMap(h, w, Vec(h * w, v), true); }

}  // namespace

TEST_CASE("layer position") {
    CHECK(layer_position(1, 5) == 1.0);
    CHECK(layer_position(5, 5) == 0.0);
    CHECK(layer_position(3, 5) == 0.5);
    CHECK(layer_position(2, 2) == 0.0);
    CHECK_THROWS_AS(layer_position(1, 1), UsageError);
    CHECK_THROWS_AS(layer_position(0, 5), UsageError);
    CHECK_THROWS_AS(layer_position(6, 5), UsageError);
}

TEST_CASE("hue endpoints") {
    CHECK(near(hue(Vec{1, 0, 0, 0, 0}), 300.0));
    CHECK(near(hue(Vec{0, 0, 0, 0, 1}), 0.0));
    CHECK(near(hue(Vec{0.4, 0.4, 0.4, 0.4, 0.4}), 150.0));
    CHECK(near(hue(Vec{0, 0, 1, 0, 0}), 150.0));
}

TEST_CASE("hue is scale invariant and tracks the mass") {
    std::mt19937 gen(6);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vec s(5);
        for (auto& x : s) x = u(gen);
        Vec half(s);
        for (auto& x : half) x *= 0.5;
        CHECK(near(hue(s), hue(half)));

        // move some mass from layer 1 to layer 5: center of mass moves toward red
        Vec shifted(s);
        const double d = 0.5 * shifted[0];
        shifted[0] -= d;
        shifted[4] += d;
        CHECK(hue(shifted) < hue(s));
    }
}

TEST_CASE("saturation") {
    CHECK(near(saturation(Vec{1, 0, 0, 0, 0}), 0.8));
    CHECK(near(saturation(Vec{0.2, 0.2, 0.2, 0.2, 0.2}), 0.0));
    // raw value is -0.2 here
    CHECK(saturation(Vec{1, 1, 1, 1, 1}) == 0.0);
    CHECK(saturation(Vec{0, 0, 0, 0, 0}) == 0.0);

    std::mt19937 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        Vec s(2 + trial % 6);
        for (auto& x : s) x = u(gen);
        const double v = saturation(s);
        CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("value is the maximum") {
    CHECK(value(Vec{0.1, 0.9, 0.3, 0, 0}) == 0.9);
    CHECK(value(Vec{0, 0, 0}) == 0.0);
    CHECK(value(Vec{0.3, 0, 0, 0.9, 0.1}) == 0.9);
}

TEST_CASE("all-zero pixel is black") {
    auto px = layer_pixel(Vec{0, 0, 0, 0, 0});
    CHECK(px.hue == 0.0);
    CHECK(px.sat == 0.0);
    CHECK(px.val == 0.0);
    CHECK_THROWS_AS(layer_pixel(Vec{0.5}), UsageError);
}

TEST_CASE("HSV conversion") {
    auto black = hsv_to_rgb({120.0, 1.0, 0.0});
    CHECK(black.r == 0.0);
    CHECK(black.g == 0.0);
    CHECK(black.b == 0.0);

    auto gray = hsv_to_rgb({200.0, 0.0, 0.6});
    CHECK(gray.r == 0.6);
    CHECK(gray.g == 0.6);
    CHECK(gray.b == 0.6);

    auto red = hsv_to_rgb({0.0, 1.0, 1.0});
    CHECK(red.r == 1.0);
    CHECK(red.g == 0.0);
    CHECK(red.b == 0.0);

    // sector boundaries and one point per sector, against hand-worked values
    struct Case {
        double h, r, g, b;
    };
    for (auto c : {Case{60, 1, 1, 0}, Case{120, 0, 1, 0}, Case{180, 0, 1, 1}, Case{240, 0, 0, 1}, Case{300, 1, 0, 1},
                   Case{30, 1, 0.5, 0}, Case{90, 0.5, 1, 0}, Case{150, 0, 1, 0.5}, Case{210, 0, 0.5, 1},
                   Case{270, 0.5, 0, 1}, Case{330, 1, 0, 0.5}}) {
        auto px = hsv_to_rgb({c.h, 1.0, 1.0});
        CAPTURE(c.h);
        CHECK(near(px.r, c.r, 1e-12));
        CHECK(near(px.g, c.g, 1e-12));
        CHECK(near(px.b, c.b, 1e-12));
    }

    auto muted = hsv_to_rgb({0.0, 0.5, 0.8});
    CHECK(near(muted.r, 0.8));
    CHECK(near(muted.g, 0.4));
    CHECK(near(muted.b, 0.4));
}

TEST_CASE("render") {
    SUBCASE("one-hot first layer renders violet at value 1") {
        ScaleStack stack({filled(3, 4, 1.0), filled(3, 4, 0.0), filled(3, 4, 0.0), filled(3, 4, 0.0), filled(3, 4, 0.0)},
                         Vec(5, 1.0));
        auto img = lovi_render(stack);
        REQUIRE(img.channels() == 3);
        const auto expect = hsv_to_rgb({300.0, 0.8, 1.0});
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(near(img.at(i, j, 0), expect.r));
                CHECK(near(img.at(i, j, 1), expect.g));
                CHECK(near(img.at(i, j, 2), expect.b));
            }
    }
    SUBCASE("all-zero maps render black") {
        ScaleStack stack({filled(2, 2, 0.0), filled(2, 2, 0.0)}, Vec(2, 1.0));
        auto img = lovi_render(stack);
        for (double v : img.values()) CHECK(v == 0.0);
    }
    SUBCASE("random maps stay in range") {
        std::mt19937 gen(9);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<SaliencyMap> maps;
        for (int k = 0; k < 4; ++k) {
            Vec v(20 * 30);
            for (auto& x : v) x = u(gen);
            maps.emplace_back(20, 30, v, true);
        }
        auto img = lovi_render(ScaleStack(maps, Vec(4, 1.0)));
        for (double v : img.values()) CHECK((v >= 0.0 && v <= 1.0));
    }
    SUBCASE("needs two layers and common dims") {
        CHECK_THROWS_AS(lovi_render(ScaleStack({filled(2, 2, 0.5)}, Vec{1.0})), UsageError);
        CHECK_THROWS_AS(ScaleStack({filled(2, 2, 0.5), filled(2, 3, 0.5)}, Vec{1.0, 1.0}), UsageError);
    }
}

TEST_CASE("blend with gray") {
    ImageBuffer color(2, 2, 3, 1.0);
    ImageBuffer dark(2, 2, 3, 0.0);
    auto out = blend_with_gray(color, dark, 0.25);
    for (double v : out.values()) CHECK(near(v, 0.75));
    CHECK_THROWS_AS(blend_with_gray(color, ImageBuffer(3, 2, 3), 0.25), UsageError);
}

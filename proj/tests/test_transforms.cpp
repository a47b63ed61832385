#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "trimct/rng.hpp"
#include "trimct/transforms.hpp"

using namespace trimct;

namespace {

Image8 textured_image(uint64_t seed, int h = 32, int w = 32) {
    Rng rng(seed);
    Image8 img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<uint8_t>(
                    std::clamp(90 + 3 * x + static_cast<int>(rng.uniform_int(60)), 0, 255));
    return img;
}

Image8 constant_image(uint8_t v, int h = 16, int w = 16) {
    Image8 img(h, w);
    std::fill(img.data.begin(), img.data.end(), v);
    return img;
}

double mean_abs_change(const Image8& a, const Image8& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(static_cast<int>(a.data[i]) - static_cast<int>(b.data[i]));
    return acc / a.data.size();
}

}  // namespace

TEST_CASE("identity intensities are bit-exact no-ops") {
    const Image8 img = textured_image(1);
    CHECK(blur(img, 0.0f) == img);
    CHECK(brighten(img, 1.0f) == img);
    CHECK(sharpen(img, 1.0f) == img);
}

TEST_CASE("brighten endpoints") {
    const Image8 img = textured_image(2);
    const Image8 black = brighten(img, 0.0f);
    for (uint8_t v : black.data) CHECK(v == 0);

    Image8 one(1, 1);
    one.data = {100, 100, 100};
    CHECK(brighten(one, 1.5f).data[0] == 150);
}

TEST_CASE("sharpen with s=0 equals the reference blur exactly") {
    const Image8 img = textured_image(3);
    CHECK(sharpen(img, 0.0f) == blur(img, kUnsharpSigma));
}

TEST_CASE("blur of a constant image is unchanged for any sigma") {
    const Image8 img = constant_image(137);
    for (float sigma : {0.5f, 1.0f, 2.0f, 5.0f}) CHECK(blur(img, sigma) == img);
}

TEST_CASE("blurred white pixel center matches the analytic kernel peak") {
    const int n = 15;
    Image8 img(n, n);
    img.at(n / 2, n / 2, 0) = 255;
    img.at(n / 2, n / 2, 1) = 255;
    img.at(n / 2, n / 2, 2) = 255;

    // Analytic: normalized 1-D kernel weight at 0, squared by separability.
    const float sigma = 1.0f;
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += std::exp(-0.5 * i * i / (sigma * sigma));
    const double w0 = 1.0 / sum;
    const auto expected = static_cast<uint8_t>(std::lround(255.0 * w0 * w0));

    const Image8 out = blur(img, sigma);
    CHECK(out.at(n / 2, n / 2, 0) == expected);
    CHECK(out.at(n / 2, n / 2, 1) == expected);
}

TEST_CASE("negative intensities are rejected") {
    const Image8 img = textured_image(4);
    CHECK_THROWS_AS(blur(img, -0.1f), Error);
    CHECK_THROWS_AS(brighten(img, -1.0f), Error);
    CHECK_THROWS_AS(sharpen(img, -2.0f), Error);
}

TEST_CASE("sharpening a step edge increases contrast across it") {
    Image8 img(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = x < 8 ? 60 : 180;
    const Image8 out = sharpen(img, 2.0f);
    const int orig_contrast = 180 - 60;
    const int new_contrast = static_cast<int>(out.at(8, 8, 0)) - static_cast<int>(out.at(8, 7, 0));
    CHECK(new_contrast > orig_contrast);
}

TEST_CASE("outputs stay valid 8-bit images with unchanged dims") {
    const Image8 img = textured_image(5);
    for (const auto& spec : harmful_shift_defaults()) {
        const Image8 out = apply_shift(img, spec);
        CHECK(out.h == img.h);
        CHECK(out.w == img.w);
        CHECK(out.data.size() == img.data.size());
    }
}

TEST_CASE("mean absolute change is nondecreasing in intensity") {
    const Image8 img = textured_image(6);
    auto ladder_check = [&](ShiftKind kind, const std::vector<float>& intensities) {
        double prev = -1.0;
        for (float v : intensities) {
            const double d = mean_abs_change(img, apply_shift(img, {kind, v, ShiftRegime::moderate}));
            CHECK(d >= prev);
            prev = d;
        }
    };
    ladder_check(ShiftKind::blur, {0.0f, 0.5f, 1.0f, 2.0f, 4.0f, 8.0f});
    ladder_check(ShiftKind::brighten, {1.0f, 1.2f, 1.5f, 2.0f, 2.5f, 3.0f});
    ladder_check(ShiftKind::sharpen, {1.0f, 2.0f, 5.0f, 20.0f, 100.0f});
}

TEST_CASE("suite counting and defaults") {
    std::vector<Image8> base;
    for (int i = 0; i < 10; ++i) base.push_back(textured_image(100 + i));
    const auto [mod, harm] = build_shift_suites(base, moderate_shift_defaults(), harmful_shift_defaults());
    CHECK(mod.images.size() == 60);   // 10 images x 6 moderate specs
    CHECK(harm.images.size() == 60);
    CHECK(mod.specs.size() == 6);
    // provenance tags present for every output
    CHECK(mod.src_index.size() == mod.images.size());
    CHECK(mod.spec_index.size() == mod.images.size());

    CHECK_THROWS_AS(build_shift_suite(base, {}), Error);
    CHECK_THROWS_AS(build_shift_suite({}, moderate_shift_defaults()), Error);
}

TEST_CASE("determinism: same transform twice gives identical bytes") {
    const Image8 img = textured_image(7);
    for (const auto& spec : moderate_shift_defaults())
        CHECK(apply_shift(img, spec) == apply_shift(img, spec));
}

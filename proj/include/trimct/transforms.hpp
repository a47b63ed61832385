#pragma once

#include <string>
#include <vector>

#include "trimct/image.hpp"

namespace trimct {

enum class ShiftKind { blur, brighten, sharpen };
enum class ShiftRegime { moderate, harmful };

const char* shift_kind_name(ShiftKind k);
ShiftKind shift_kind_from_name(const std::string& name);

// One synthetic-shift setting: sigma for blur, beta for brighten, s for
// sharpen.
struct ShiftSpec {
    ShiftKind kind = ShiftKind::blur;
    float intensity = 0.0f;
    ShiftRegime regime = ShiftRegime::moderate;

    std::string label() const;
    bool operator==(const ShiftSpec&) const = default;
};

// Reference blur scale used inside unsharp masking. Not specified by the
// transform itself, so it is a documented, configurable constant.
inline constexpr float kUnsharpSigma = 2.0f;

// Gaussian blur: separable float convolution, kernel radius ceil(3*sigma),
// reflected borders, one final round-half-away-from-zero quantization.
// sigma = 0 returns the original image bit-exactly.
Image8 blur(const Image8& img, float sigma);

// Per-pixel v' = clip(round(beta * v)). beta = 1 is a bit-exact no-op,
// beta = 0 is all black.
Image8 brighten(const Image8& img, float beta);

// Unsharp masking: out = clip(round(s*orig + (1-s)*blurred(sigma_us))).
// s = 1 is a bit-exact no-op; s = 0 equals blur(img, sigma_us) exactly.
Image8 sharpen(const Image8& img, float s, float sigma_us = kUnsharpSigma);

Image8 apply_shift(const Image8& img, const ShiftSpec& spec);

// Intensity settings for the two regimes.
std::vector<ShiftSpec> moderate_shift_defaults();
std::vector<ShiftSpec> harmful_shift_defaults();

// Every configured spec applied to every image. `src_index`/`spec_index`
// record provenance per output image.
struct ShiftSuite {
    std::vector<ShiftSpec> specs;
    std::vector<Image8> images;
    std::vector<int> src_index;
    std::vector<int> spec_index;
};

ShiftSuite build_shift_suite(const std::vector<Image8>& base, const std::vector<ShiftSpec>& specs);

std::pair<ShiftSuite, ShiftSuite> build_shift_suites(const std::vector<Image8>& base,
                                                     const std::vector<ShiftSpec>& moderate,
                                                     const std::vector<ShiftSpec>& harmful);

}  // namespace trimct

#include "trimct/transforms.hpp"

#include <cmath>
#include <cstdio>

#include "trimct/common.hpp"

namespace trimct {

const char* shift_kind_name(ShiftKind k) {
    switch (k) {
        case ShiftKind::blur: return "blur";
        case ShiftKind::brighten: return "brighten";
        case ShiftKind::sharpen: return "sharpen";
    }
    return "?";
}

ShiftKind shift_kind_from_name(const std::string& name) {
    if (name == "blur") return ShiftKind::blur;
    if (name == "brighten") return ShiftKind::brighten;
    if (name == "sharpen") return ShiftKind::sharpen;
    throw Error("unknown shift kind: " + name);
}

std::string ShiftSpec::label() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%g", shift_kind_name(kind), static_cast<double>(intensity));
    return buf;
}

namespace {

inline uint8_t quantize(float v) {
    // round half away from zero, then clip; pixels are nonnegative so
    // std::lround already rounds halves upward.
    long r = std::lround(v);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<uint8_t>(r);
}

// Mirror reflection (edge pixel repeated): -1 -> 0, n -> n-1.
inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

std::vector<float> gaussian_kernel(float sigma) {
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    std::vector<float> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i) * i / (2.0 * sigma * sigma));
        k[static_cast<size_t>(i + radius)] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

// Planar float blur; shared by blur() and sharpen() so their outputs agree
// bit-for-bit at the quantization step.
std::vector<float> blur_planar(const Image8& img, float sigma) {
    const int h = img.h, w = img.w;
    const size_t plane = static_cast<size_t>(h) * w;
    std::vector<float> src(3 * plane);
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) src[c * plane + i] = static_cast<float>(img.data[i * 3 + c]);
    if (sigma == 0.0f) return src;

    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);

    std::vector<float> tmp(3 * plane);
    // horizontal pass
    parallel_for(static_cast<size_t>(3) * h, [&](size_t row) {
        const int c = static_cast<int>(row / h);
        const int y = static_cast<int>(row % h);
        const float* s = src.data() + c * plane + static_cast<size_t>(y) * w;
        float* d = tmp.data() + c * plane + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] * s[reflect(x + i, w)];
            d[x] = acc;
        }
    });
    // vertical pass
    std::vector<float> out(3 * plane);
    parallel_for(static_cast<size_t>(3) * h, [&](size_t row) {
        const int c = static_cast<int>(row / h);
        const int y = static_cast<int>(row % h);
        float* d = out.data() + c * plane + static_cast<size_t>(y) * w;
        const float* base = tmp.data() + c * plane;
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[static_cast<size_t>(i + radius)] *
                       base[static_cast<size_t>(reflect(y + i, h)) * w + x];
            d[x] = acc;
        }
    });
    return out;
}

Image8 quantize_planar(const std::vector<float>& planar, int h, int w) {
    Image8 out(h, w);
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = quantize(planar[c * plane + i]);
    return out;
}

}  // namespace

Image8 blur(const Image8& img, float sigma) {
    if (sigma < 0.0f) throw Error("blur: sigma must be >= 0");
    if (sigma == 0.0f) return img;
    return quantize_planar(blur_planar(img, sigma), img.h, img.w);
}

Image8 brighten(const Image8& img, float beta) {
    if (beta < 0.0f) throw Error("brighten: beta must be >= 0");
    Image8 out(img.h, img.w);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = quantize(static_cast<float>(beta * img.data[i]));
    return out;
}

Image8 sharpen(const Image8& img, float s, float sigma_us) {
    if (s < 0.0f) throw Error("sharpen: factor must be >= 0");
    if (s == 1.0f) return img;
    const auto blurred = blur_planar(img, sigma_us);
    const size_t plane = static_cast<size_t>(img.h) * img.w;
    std::vector<float> out(3 * plane);
    // s*orig + (1-s)*blur == blur + s*(orig - blur); this association makes
    // s=0 reproduce blur() and s=1 reproduce the original exactly.
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            const float orig = static_cast<float>(img.data[i * 3 + c]);
            out[c * plane + i] = s * orig + (1.0f - s) * blurred[c * plane + i];
        }
    }
    return quantize_planar(out, img.h, img.w);
}

Image8 apply_shift(const Image8& img, const ShiftSpec& spec) {
    switch (spec.kind) {
        case ShiftKind::blur: return blur(img, spec.intensity);
        case ShiftKind::brighten: return brighten(img, spec.intensity);
        case ShiftKind::sharpen: return sharpen(img, spec.intensity);
    }
    throw Error("apply_shift: bad kind");
}

std::vector<ShiftSpec> moderate_shift_defaults() {
    return {
        {ShiftKind::brighten, 1.5f, ShiftRegime::moderate},
        {ShiftKind::brighten, 1.8f, ShiftRegime::moderate},
        {ShiftKind::sharpen, 5.0f, ShiftRegime::moderate},
        {ShiftKind::sharpen, 20.0f, ShiftRegime::moderate},
        {ShiftKind::blur, 2.0f, ShiftRegime::moderate},
        {ShiftKind::blur, 3.0f, ShiftRegime::moderate},
    };
}

std::vector<ShiftSpec> harmful_shift_defaults() {
    return {
        {ShiftKind::brighten, 2.5f, ShiftRegime::harmful},
        {ShiftKind::brighten, 3.0f, ShiftRegime::harmful},
        {ShiftKind::sharpen, 100.0f, ShiftRegime::harmful},
        {ShiftKind::sharpen, 500.0f, ShiftRegime::harmful},
        {ShiftKind::blur, 5.0f, ShiftRegime::harmful},
        {ShiftKind::blur, 10.0f, ShiftRegime::harmful},
    };
}

ShiftSuite build_shift_suite(const std::vector<Image8>& base, const std::vector<ShiftSpec>& specs) {
    if (base.empty()) throw Error("build_shift_suite: empty dataset");
    if (specs.empty()) throw Error("build_shift_suite: empty regime spec list");
    ShiftSuite suite;
    suite.specs = specs;
    const size_t n = base.size() * specs.size();
    suite.images.resize(n);
    suite.src_index.resize(n);
    suite.spec_index.resize(n);
    parallel_for(n, [&](size_t i) {
        const size_t si = i / base.size();
        const size_t bi = i % base.size();
        suite.images[i] = apply_shift(base[bi], specs[si]);
        suite.src_index[i] = static_cast<int>(bi);
        suite.spec_index[i] = static_cast<int>(si);
    });
    return suite;
}

std::pair<ShiftSuite, ShiftSuite> build_shift_suites(const std::vector<Image8>& base,
                                                     const std::vector<ShiftSpec>& moderate,
                                                     const std::vector<ShiftSpec>& harmful) {
    return {build_shift_suite(base, moderate), build_shift_suite(base, harmful)};
}

}  // namespace trimct

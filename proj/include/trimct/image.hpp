#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trimct/tensor.hpp"

namespace trimct {

// 8-bit RGB raster, interleaved row-major (HWC). The unit of inspection.
struct Image8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> data;  // h*w*3

    Image8() = default;
    Image8(int height, int width) : h(height), w(width), data(static_cast<size_t>(height) * width * 3, 0) {}

    uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * w + x) * 3 + c]; }

    bool operator==(const Image8&) const = default;
};

// Binary PPM (P6), the lossless raster format used for all stored samples.
void save_ppm(const std::filesystem::path& path, const Image8& img);
Image8 load_ppm(const std::filesystem::path& path);

// Planar float image in [0,1], layout [3,H,W]; the network-facing view.
nn::Tensor image_to_tensor(const Image8& img);

// Batch [B,3,H,W] from a set of images (all same dims).
nn::Tensor images_to_batch(const std::vector<const Image8*>& imgs);
nn::Tensor images_to_batch(const std::vector<Image8>& imgs, size_t begin, size_t end);

// Inverse of image_to_tensor for a single [3,H,W] (or flat 3*H*W) tensor;
// values clamped to [0,1] then quantized.
Image8 tensor_to_image(const nn::Tensor& t, int h, int w);

}  // namespace trimct

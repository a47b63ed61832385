#include "trimct/image.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "trimct/common.hpp"

namespace trimct {

void save_ppm(const std::filesystem::path& path, const Image8& img) {
    char header[64];
    const int hl = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", img.w, img.h);
    std::vector<uint8_t> bytes;
    bytes.reserve(hl + img.data.size());
    bytes.insert(bytes.end(), header, header + hl);
    bytes.insert(bytes.end(), img.data.begin(), img.data.end());
    write_file_bytes(path, bytes.data(), bytes.size());
}

Image8 load_ppm(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {  // comment line
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    if (token() != "P6") throw Error("not a P6 ppm: " + path.string());
    const int w = std::stoi(token());
    const int h = std::stoi(token());
    const int maxval = std::stoi(token());
    if (maxval != 255 || w <= 0 || h <= 0) throw Error("unsupported ppm: " + path.string());
    ++pos;  // single whitespace after maxval
    Image8 img(h, w);
    if (bytes.size() - pos < img.data.size()) throw Error("truncated ppm: " + path.string());
    std::memcpy(img.data.data(), bytes.data() + pos, img.data.size());
    return img;
}

nn::Tensor image_to_tensor(const Image8& img) {
    nn::Tensor t({3, img.h, img.w});
    const size_t plane = static_cast<size_t>(img.h) * img.w;
    for (size_t i = 0; i < plane; ++i) {
        t.data[i] = img.data[i * 3] * (1.0f / 255.0f);
        t.data[plane + i] = img.data[i * 3 + 1] * (1.0f / 255.0f);
        t.data[2 * plane + i] = img.data[i * 3 + 2] * (1.0f / 255.0f);
    }
    return t;
}

nn::Tensor images_to_batch(const std::vector<const Image8*>& imgs) {
    if (imgs.empty()) throw Error("images_to_batch: empty batch");
    const int h = imgs[0]->h, w = imgs[0]->w;
    nn::Tensor t({static_cast<int>(imgs.size()), 3, h, w});
    const size_t stride = 3 * static_cast<size_t>(h) * w;
    parallel_for(imgs.size(), [&](size_t b) {
        if (imgs[b]->h != h || imgs[b]->w != w) return;  // validated below
        nn::Tensor one = image_to_tensor(*imgs[b]);
        std::memcpy(t.data.data() + b * stride, one.data.data(), stride * sizeof(float));
    });
    for (const auto* im : imgs)
        if (im->h != h || im->w != w) throw Error("images_to_batch: mixed dims");
    return t;
}

nn::Tensor images_to_batch(const std::vector<Image8>& imgs, size_t begin, size_t end) {
    std::vector<const Image8*> ptrs;
    ptrs.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) ptrs.push_back(&imgs[i]);
    return images_to_batch(ptrs);
}

Image8 tensor_to_image(const nn::Tensor& t, int h, int w) {
    if (t.numel() != static_cast<size_t>(3) * h * w) throw Error("tensor_to_image: size mismatch");
    Image8 img(h, w);
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            float v = t.data[c * plane + i];
            v = std::min(1.0f, std::max(0.0f, v));
            img.data[i * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0f));
        }
    }
    return img;
}

}  // namespace trimct

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trimct/common.hpp"

namespace trimct::nn {

// Dense row-major float32 tensor. Shape product always equals data size.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size()) throw Error("tensor shape/data size mismatch");
    }

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw Error("tensor dims must be positive");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    size_t numel() const { return data.size(); }
    int dim(size_t i) const { return shape.at(i); }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

// C[M x N] = A[M x K] * B[K x N], row-major. Parallel over rows of C; each
// output cell is one sequential dot product, so results do not depend on the
// worker count.
void matmul(const float* a, const float* b, float* c, int m, int k, int n);

// C[M x N] += A[M x K] * B[K x N]
void matmul_acc(const float* a, const float* b, float* c, int m, int k, int n);

// C[M x N] = A^T[M x K] * B[K x N] where A is stored [K x M].
void matmul_at(const float* a, const float* b, float* c, int m, int k, int n);

// C[M x N] = A[M x K] * B^T[K x N] where B is stored [N x K].
void matmul_bt(const float* a, const float* b, float* c, int m, int k, int n);

bool all_finite(const Tensor& t);

}  // namespace trimct::nn

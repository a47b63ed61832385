#include "trimct/tensor.hpp"

#include <cmath>
#include <cstring>

namespace trimct::nn {

namespace {

// Inner kernel over a row block [row_lo, row_hi). ikj order so the j loop
// vectorizes; each C row is owned by exactly one thread.
inline void matmul_rows(const float* a, const float* b, float* c, int k, int n, size_t row_lo,
                        size_t row_hi, bool accumulate) {
    for (size_t i = row_lo; i < row_hi; ++i) {
        float* crow = c + i * static_cast<size_t>(n);
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<size_t>(n));
        const float* arow = a + i * static_cast<size_t>(k);
        for (int kk = 0; kk < k; ++kk) {
            const float av = arow[kk];
            if (av == 0.0f) continue;
            const float* brow = b + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    parallel_for_blocks(static_cast<size_t>(m), [&](size_t lo, size_t hi) {
        matmul_rows(a, b, c, k, n, lo, hi, false);
    });
}

void matmul_acc(const float* a, const float* b, float* c, int m, int k, int n) {
    parallel_for_blocks(static_cast<size_t>(m), [&](size_t lo, size_t hi) {
        matmul_rows(a, b, c, k, n, lo, hi, true);
    });
}

void matmul_at(const float* a, const float* b, float* c, int m, int k, int n) {
    // A stored [K x M]; C[i][j] = sum_kk A[kk][i] * B[kk][j]
    parallel_for_blocks(static_cast<size_t>(m), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            float* crow = c + i * static_cast<size_t>(n);
            std::memset(crow, 0, sizeof(float) * static_cast<size_t>(n));
            for (int kk = 0; kk < k; ++kk) {
                const float av = a[static_cast<size_t>(kk) * m + i];
                if (av == 0.0f) continue;
                const float* brow = b + static_cast<size_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

void matmul_bt(const float* a, const float* b, float* c, int m, int k, int n) {
    // B stored [N x K]; C[i][j] = dot(A row i, B row j)
    parallel_for_blocks(static_cast<size_t>(m), [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            const float* arow = a + i * static_cast<size_t>(k);
            float* crow = c + i * static_cast<size_t>(n);
            for (int j = 0; j < n; ++j) {
                const float* brow = b + static_cast<size_t>(j) * k;
                float acc = 0.0f;
                for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                crow[j] = acc;
            }
        }
    });
}

bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace trimct::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvq/error.hpp"

namespace mvq {

struct TensorShape {
    uint32_t cout = 0;
    uint32_t cin = 0;
    uint32_t kh = 0;
    uint32_t kw = 0;

    std::size_t count() const {
        return std::size_t(cout) * cin * std::size_t(kh) * kw;
    }
    bool operator==(const TensorShape&) const = default;
};

// Dense 4-D weights, row-major (cout, cin, kh, kw). Values must be finite.
struct WeightTensor {
    TensorShape shape;
    std::vector<double> data;

    double at(uint32_t c, uint32_t i, uint32_t h, uint32_t w) const {
        return data[((std::size_t(c) * shape.cin + i) * shape.kh + h) * shape.kw + w];
    }
};

// Validates length and finiteness.
WeightTensor make_weight_tensor(TensorShape shape, std::vector<double> data);

// Row-major rows x cols matrix of reals.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

// 0/1 mask with the same geometry as the value matrix it annotates.
struct BitmaskMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<uint8_t> bits;

    BitmaskMatrix() = default;
    BitmaskMatrix(std::size_t r, std::size_t c, uint8_t fill = 0)
        : rows(r), cols(c), bits(r * c, fill) {}

    uint8_t& at(std::size_t r, std::size_t c) { return bits[r * cols + c]; }
    uint8_t at(std::size_t r, std::size_t c) const { return bits[r * cols + c]; }
    std::span<uint8_t> row(std::size_t r) { return {bits.data() + r * cols, cols}; }
    std::span<const uint8_t> row(std::size_t r) const { return {bits.data() + r * cols, cols}; }
};

// Output-channel-wise grouping descriptor: d consecutive output channels per row,
// rows ordered (cout-block, cin, kh, kw) lexicographic.
struct GroupLayout {
    TensorShape shape;
    uint32_t d = 0;

    std::size_t num_rows() const {
        return (std::size_t(shape.cout) / d) * shape.cin * shape.kh * shape.kw;
    }
};

struct GroupedMatrix {
    Matrix values;
    GroupLayout layout;
};

struct SseReport {
    double total_sse = 0.0;
    double mask_sse = 0.0;
};

// Reshape 4-D weights into the (Cout/d * Cin * Kh * Kw) x d subvector matrix.
// Column t of row (block, cin, kh, kw) holds output channel block*d + t.
GroupedMatrix group_weights(const WeightTensor& w, uint32_t d);

// Exact inverse of group_weights.
WeightTensor ungroup_weights(const GroupedMatrix& g);

// total_sse sums squared differences over all entries; mask_sse only over
// mask=1 entries (equal to total_sse when mask is null). Accumulates in
// long double.
SseReport sse(const Matrix& original, const Matrix& reconstructed,
              const BitmaskMatrix* mask = nullptr);

inline SseReport sse(const GroupedMatrix& original, const GroupedMatrix& reconstructed,
                     const BitmaskMatrix* mask = nullptr) {
    return sse(original.values, reconstructed.values, mask);
}

} // namespace mvq

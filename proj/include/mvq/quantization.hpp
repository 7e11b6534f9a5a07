#pragma once

#include <cstdint>
#include <vector>

#include "mvq/clustering.hpp"

namespace mvq {

// Symmetric fixed-bit codebook quantization: stored integers in
// [-2^(qb-1), 2^(qb-1)-1], dequantized value = integer * scale.
struct QuantizedCodebook {
    std::size_t k = 0;
    std::size_t d = 0;
    uint32_t qb = 8;
    double scale = 1.0;
    std::vector<int32_t> q; // k*d row-major

    int32_t min_code() const { return -(int32_t(1) << (qb - 1)); }
    int32_t max_code() const { return (int32_t(1) << (qb - 1)) - 1; }
};

enum class ScaleMode {
    AbsMax,     // scale = max|v| / (2^(qb-1)-1)
    GridSearch, // pick the scale minimizing codebook MSE over 128 candidates
};

// Round-to-nearest-even, clamp to the signed qb-bit range. An all-zero
// codebook gets scale 1 (any scale represents it exactly).
QuantizedCodebook quantize_codebook(const Codebook& cb, uint32_t qb,
                                    ScaleMode mode = ScaleMode::AbsMax);

QuantizedCodebook quantize_codebook_with_scale(const Codebook& cb, uint32_t qb, double scale);

Codebook dequantize_codebook(const QuantizedCodebook& qc);

} // namespace mvq

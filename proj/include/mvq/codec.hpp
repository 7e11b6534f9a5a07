#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvq/quantization.hpp"
#include "mvq/sparsity.hpp"
#include "mvq/tensor.hpp"

namespace mvq {

// One compressed layer: quantized codebook + packed assignments + packed
// mask LUT ids, with the shape metadata needed to rebuild the dense tensor.
struct CompressedLayer {
    TensorShape shape;
    uint16_t d = 0;
    uint16_t k = 0;
    uint16_t n = 0; // kept weights per M-chunk
    uint16_t m = 0;
    uint8_t qc = 8;
    float scale = 1.0f;
    std::vector<int32_t> codebook;     // k*d signed qc-bit values
    std::vector<uint32_t> assignments; // NG entries
    std::vector<uint32_t> mask_ids;    // NG * d/m entries

    std::size_t ng() const { return (std::size_t(shape.cout) / d) * shape.cin * shape.kh * shape.kw; }
    std::size_t chunks_per_row() const { return std::size_t(d) / m; }
    double sparsity() const { return double(m - n) / m; }
};

struct PayloadBits {
    uint64_t b_a = 0; // assignments
    uint64_t b_m = 0; // mask ids
    uint64_t b_c = 0; // codebook
    uint64_t total() const { return b_a + b_m + b_c; }
};

PayloadBits payload_bits(uint64_t ng, uint32_t d, uint32_t k, NmPattern pattern, uint32_t qc);
PayloadBits payload_bits(const CompressedLayer& layer);

struct CompressionReport {
    PayloadBits bits;
    double cr = 0.0;          // NG*d*b_f / (b_a+b_m+b_c)
    double dense_flops = 0.0; // 2 per weight, per application of the weights
    double sparse_flops = 0.0; // dense * N/M
};

CompressionReport compression_ratio(uint64_t ng, uint32_t d, uint32_t k, NmPattern pattern,
                                    uint32_t qc, uint32_t b_f = 32);

// Container: magic "MVQ1", version u8=1, layer count u32; per layer the
// fixed header (shape 4xu32; d,k,N,M u16; qc u8; scale f32) followed by the
// codebook / assignment / mask-id bit streams, each preceded by its u64 bit
// length. All integers little-endian; bit packing per bitstream.hpp.
std::vector<uint8_t> serialize(std::span<const CompressedLayer> layers);
std::vector<CompressedLayer> deserialize(std::span<const uint8_t> bytes);

// Dequantize + reconstruct + ungroup back to a dense 4-D tensor.
WeightTensor decompress(const CompressedLayer& layer);

// The reconstruction as a grouped matrix plus its mask (used by stats/SSE paths).
SparseGroupedMatrix decompress_grouped(const CompressedLayer& layer);

} // namespace mvq

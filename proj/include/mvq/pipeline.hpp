#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mvq/codec.hpp"
#include "mvq/io.hpp"

namespace mvq {

enum class ClusterMode { Masked, Common };
enum class CodebookScope { Layerwise, CrossLayer };

struct LayerSettings {
    uint32_t d = 16;
    uint32_t k = 512;
    NmPattern pattern{4, 16};
    uint32_t qc = 8;
};

struct CompressOptions {
    uint32_t b_f = 32;
    uint64_t seed = 42;
    ClusterMode mode = ClusterMode::Masked;
    CodebookScope scope = CodebookScope::Layerwise;
    ScaleMode scale_mode = ScaleMode::AbsMax;
    KMeansOptions kmeans;
};

struct LayerCompressionResult {
    std::string name;
    CompressedLayer layer;
    ClusterRunStats stats;
    double cluster_mask_sse = 0.0; // Eq. 1 SSE at convergence, full-precision codebook
    SseReport recon_sse;           // decoded reconstruction vs the pruned weights
    CompressionReport report;
};

struct ModelCompressionResult {
    std::vector<LayerCompressionResult> layers;
    uint64_t total_raw_bits = 0;
    uint64_t total_payload_bits = 0; // codebook counted once under CrossLayer
    double aggregate_cr = 0.0;
};

// group -> prune -> (masked|common) k-means -> quantize, one CompressedLayer
// per input. Layerwise scope clusters each layer with seed+index; CrossLayer
// clusters the concatenated rows once (uniform settings required) and every
// layer stores the shared codebook.
ModelCompressionResult compress_model(std::span<const NamedTensor> tensors,
                                      std::span<const LayerSettings> settings,
                                      const CompressOptions& opts);

struct AblationCase {
    std::string label;
    double total_sse = 0.0;
    double mask_sse = 0.0;
    double flops_ratio = 1.0;
};

struct AblationOptions {
    // (k,d) pairs chosen so all four cases land at the same compression ratio
    uint32_t ab_k = 1024, ab_d = 8;  // cases A/B (no stored mask)
    uint32_t cd_k = 512, cd_d = 16;  // cases C/D (sparse reconstruction)
    NmPattern pattern{4, 16};
    uint64_t seed = 42;
    KMeansOptions kmeans;
};

// Four-way comparison: A dense+common, B sparse+common with dense
// reconstruction, C sparse+common with sparse reconstruction, D
// sparse+masked. SSEs for A are measured against the dense weights; B/C/D
// against the pruned weights.
std::array<AblationCase, 4> run_ablation(const WeightTensor& w, const AblationOptions& opts);

// Re-expresses a mask produced under one grouping in another grouping of the
// same tensor.
BitmaskMatrix regroup_mask(const BitmaskMatrix& mask, const GroupLayout& from, uint32_t to_d);

} // namespace mvq

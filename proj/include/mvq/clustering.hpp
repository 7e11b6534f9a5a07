#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvq/sparsity.hpp"
#include "mvq/tensor.hpp"

namespace mvq {

struct Codebook {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> data; // k*d row-major

    Codebook() = default;
    Codebook(std::size_t k_, std::size_t d_) : k(k_), d(d_), data(k_ * d_, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * d, d}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
};

using Assignments = std::vector<uint32_t>;

struct ClusterRunStats {
    std::size_t iterations = 0;
    std::vector<double> masked_sse; // one entry per iteration, non-increasing
    std::vector<std::size_t> changed; // changed assignments per iteration
    uint64_t seed = 0;
};

struct KMeansOptions {
    std::size_t max_iters = 100;
    // Stop once the number of changed assignments drops below this fraction
    // of NG (0.001 per the usual 0.1% convention).
    double change_threshold_fraction = 0.001;
};

struct KMeansResult {
    Codebook codebook;
    Assignments assignments;
    ClusterRunStats stats;
};

// Sample k distinct rows (without replacement, mt19937_64 seeded with `seed`)
// as the initial codewords.
Codebook kmeans_init(const Matrix& rows, std::size_t k, uint64_t seed);

// Per-row distance of the masked assignment objective: ||w - c o bm||^2 over
// all coordinates. A null mask means all-ones.
double masked_distance(std::span<const double> row, std::span<const uint8_t> mask,
                       std::span<const double> codeword);

// argmin_i ||w_j - c_i o bm_j||^2 per row; ties go to the lowest codeword
// index. Rows with an all-zero mask land on index 0.
Assignments masked_assign(const Matrix& values, const BitmaskMatrix& mask, const Codebook& cb);

// Per codeword per coordinate: mean of assigned unpruned values. Coordinates
// with no coverage (and codewords with no assigned rows) keep the previous
// value.
Codebook masked_update(const Matrix& values, const BitmaskMatrix& mask, const Assignments& assign,
                       const Codebook& previous);

// Sum over rows of ||w_j - c_{a_j} o bm_j||^2 (mask may be null).
double masked_sse(const Matrix& values, const BitmaskMatrix* mask, const Codebook& cb,
                  const Assignments& assign);

// Alternate masked assignment / masked update until fewer than
// threshold*NG assignments change (or max_iters). Empty clusters are
// re-seeded from the worst-fit row. Final codeword order is normalized to
// first use in the assignment stream, so identical partitions serialize
// identically.
KMeansResult run_masked_kmeans(const Matrix& values, const BitmaskMatrix& mask, std::size_t k,
                               uint64_t seed, const KMeansOptions& opts = {});

inline KMeansResult run_masked_kmeans(const SparseGroupedMatrix& g, std::size_t k, uint64_t seed,
                                      const KMeansOptions& opts = {}) {
    return run_masked_kmeans(g.grouped.values, g.mask, k, seed, opts);
}

// Plain k-means: masked k-means with an all-ones mask.
KMeansResult run_common_kmeans(const Matrix& values, std::size_t k, uint64_t seed,
                               const KMeansOptions& opts = {});

} // namespace mvq

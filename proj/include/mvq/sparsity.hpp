#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "mvq/tensor.hpp"

namespace mvq {

// N:M structured sparsity: N kept weights per aligned group of M.
struct NmPattern {
    uint32_t n_keep = 0;
    uint32_t m_group = 0;

    double sparsity() const { return double(m_group - n_keep) / m_group; }
    bool operator==(const NmPattern&) const = default;
};

// Throws InvalidPattern unless 0 < N < M (M capped so the mask LUT stays small).
NmPattern make_pattern(uint32_t n_keep, uint32_t m_group);

uint64_t binomial(uint32_t m, uint32_t n);

// Number of bits to address `count` distinct values (0 when count <= 1).
uint32_t bits_for_count(uint64_t count);

// Dense enumeration of all C(M,N) legal N:M masks. Ids follow lexicographic
// order of the ascending kept-position tuples, so id 0 is [1..1,0..0] and the
// last id is [0..0,1..1].
class MaskLut {
public:
    explicit MaskLut(NmPattern pattern);

    NmPattern pattern() const { return pattern_; }
    uint32_t size() const { return uint32_t(masks_.size()); }
    uint32_t id_bits() const { return id_bits_; }
    double bits_per_weight() const { return double(id_bits_) / pattern_.m_group; }

    // chunk must have exactly N ones (InvalidPopcount otherwise).
    uint32_t encode(std::span<const uint8_t> chunk) const;
    // Writes the M chunk bits for `id` (IdOutOfRange when id >= size()).
    void decode(uint32_t id, std::span<uint8_t> out) const;

private:
    NmPattern pattern_;
    uint32_t id_bits_ = 0;
    std::vector<uint32_t> masks_; // bit j of masks_[id] = chunk element j
    std::unordered_map<uint32_t, uint32_t> index_;
};

struct SparseGroupedMatrix {
    GroupedMatrix grouped; // pruned values (zeros outside the mask)
    BitmaskMatrix mask;
    NmPattern pattern;
};

// Keep the N largest-magnitude weights of every aligned M-chunk, zero the
// rest. Ties broken by lowest index.
SparseGroupedMatrix prune_nm(const GroupedMatrix& g, NmPattern pattern);

// One LUT id per M-chunk of the row.
std::vector<uint32_t> mask_to_lut_ids(std::span<const uint8_t> mask_row, NmPattern pattern);

// Inverse of mask_to_lut_ids for a row of length d.
std::vector<uint8_t> lut_ids_to_mask(std::span<const uint32_t> ids, NmPattern pattern, uint32_t d);

} // namespace mvq

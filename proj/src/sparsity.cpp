#include "mvq/sparsity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace mvq {

namespace {
constexpr uint32_t kMaxM = 24; // keeps the full C(M,N) enumeration tractable
}

NmPattern make_pattern(uint32_t n_keep, uint32_t m_group) {
    if (n_keep == 0 || m_group <= n_keep)
        fail(Errc::InvalidPattern, "need 0 < N < M, got " + std::to_string(n_keep) + ":" +
                                       std::to_string(m_group));
    if (m_group > kMaxM)
        fail(Errc::InvalidPattern, "M=" + std::to_string(m_group) + " exceeds supported maximum " +
                                       std::to_string(kMaxM));
    return NmPattern{n_keep, m_group};
}

uint64_t binomial(uint32_t m, uint32_t n) {
    if (n > m) return 0;
    n = std::min(n, m - n);
    uint64_t result = 1;
    for (uint32_t i = 1; i <= n; ++i) {
        result = result * (m - n + i) / i;
    }
    return result;
}

uint32_t bits_for_count(uint64_t count) {
    if (count <= 1) return 0;
    return uint32_t(std::bit_width(count - 1));
}

MaskLut::MaskLut(NmPattern pattern) : pattern_(make_pattern(pattern.n_keep, pattern.m_group)) {
    const uint32_t n = pattern_.n_keep;
    const uint32_t m = pattern_.m_group;
    const uint64_t count = binomial(m, n);
    masks_.reserve(count);
    index_.reserve(count);

    // Enumerate kept-position tuples in lexicographic order.
    std::vector<uint32_t> pos(n);
    std::iota(pos.begin(), pos.end(), 0u);
    while (true) {
        uint32_t word = 0;
        for (uint32_t p : pos) word |= 1u << p;
        index_.emplace(word, uint32_t(masks_.size()));
        masks_.push_back(word);

        // next combination
        int i = int(n) - 1;
        while (i >= 0 && pos[i] == m - n + i) --i;
        if (i < 0) break;
        ++pos[i];
        for (uint32_t j = uint32_t(i) + 1; j < n; ++j) pos[j] = pos[j - 1] + 1;
    }
    id_bits_ = bits_for_count(masks_.size());
}

uint32_t MaskLut::encode(std::span<const uint8_t> chunk) const {
    const uint32_t m = pattern_.m_group;
    if (chunk.size() != m) fail(Errc::DimensionMismatch, "chunk length != M");
    uint32_t word = 0;
    uint32_t ones = 0;
    for (uint32_t j = 0; j < m; ++j) {
        if (chunk[j]) {
            word |= 1u << j;
            ++ones;
        }
    }
    if (ones != pattern_.n_keep)
        fail(Errc::InvalidPopcount, "chunk has " + std::to_string(ones) + " ones, expected " +
                                        std::to_string(pattern_.n_keep));
    return index_.at(word);
}

void MaskLut::decode(uint32_t id, std::span<uint8_t> out) const {
    if (id >= masks_.size())
        fail(Errc::IdOutOfRange, "mask id " + std::to_string(id) + " >= " +
                                     std::to_string(masks_.size()));
    if (out.size() != pattern_.m_group) fail(Errc::DimensionMismatch, "output length != M");
    const uint32_t word = masks_[id];
    for (uint32_t j = 0; j < pattern_.m_group; ++j) out[j] = uint8_t((word >> j) & 1u);
}

SparseGroupedMatrix prune_nm(const GroupedMatrix& g, NmPattern pattern) {
    pattern = make_pattern(pattern.n_keep, pattern.m_group);
    const uint32_t d = g.layout.d;
    const uint32_t m = pattern.m_group;
    if (d % m != 0)
        fail(Errc::DNotMultipleOfM,
             "d=" + std::to_string(d) + " is not a multiple of M=" + std::to_string(m));

    SparseGroupedMatrix out{g, BitmaskMatrix(g.values.rows, d), pattern};
    std::vector<uint32_t> order(m);
    for (std::size_t r = 0; r < g.values.rows; ++r) {
        auto values = out.grouped.values.row(r);
        auto mask = out.mask.row(r);
        for (uint32_t chunk = 0; chunk < d / m; ++chunk) {
            const uint32_t base = chunk * m;
            std::iota(order.begin(), order.end(), 0u);
            std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
                const double fa = std::fabs(values[base + a]);
                const double fb = std::fabs(values[base + b]);
                if (fa != fb) return fa > fb;
                return a < b;
            });
            for (uint32_t i = 0; i < pattern.n_keep; ++i) mask[base + order[i]] = 1;
            for (uint32_t i = pattern.n_keep; i < m; ++i) values[base + order[i]] = 0.0;
        }
    }
    return out;
}

std::vector<uint32_t> mask_to_lut_ids(std::span<const uint8_t> mask_row, NmPattern pattern) {
    const MaskLut lut(pattern);
    const uint32_t m = pattern.m_group;
    if (mask_row.size() % m != 0)
        fail(Errc::DNotMultipleOfM, "mask row length is not a multiple of M");
    std::vector<uint32_t> ids;
    ids.reserve(mask_row.size() / m);
    for (std::size_t c = 0; c + m <= mask_row.size(); c += m)
        ids.push_back(lut.encode(mask_row.subspan(c, m)));
    return ids;
}

std::vector<uint8_t> lut_ids_to_mask(std::span<const uint32_t> ids, NmPattern pattern, uint32_t d) {
    const MaskLut lut(pattern);
    const uint32_t m = pattern.m_group;
    if (d % m != 0 || ids.size() != d / m)
        fail(Errc::DimensionMismatch, "id count does not match d/M chunks");
    std::vector<uint8_t> bits(d, 0);
    for (std::size_t i = 0; i < ids.size(); ++i)
        lut.decode(ids[i], std::span<uint8_t>(bits).subspan(i * m, m));
    return bits;
}

} // namespace mvq

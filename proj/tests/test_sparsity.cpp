#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "mvq/sparsity.hpp"
#include "test_util.hpp"

using namespace mvq;

namespace {

GroupedMatrix make_grouped(std::size_t rows, uint32_t d, uint64_t seed) {
    GroupedMatrix g;
    g.layout = GroupLayout{{uint32_t(d), uint32_t(rows), 1, 1}, d};
    g.values = Matrix(rows, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    for (auto& v : g.values.data) v = dist(rng);
    return g;
}

// Independent oracle: the kept set per chunk via a full stable sort.
std::vector<uint8_t> prune_oracle(std::span<const double> chunk, uint32_t n) {
    std::vector<uint32_t> idx(chunk.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
        return std::fabs(chunk[a]) > std::fabs(chunk[b]);
    });
    std::vector<uint8_t> mask(chunk.size(), 0);
    for (uint32_t i = 0; i < n; ++i) mask[idx[i]] = 1;
    return mask;
}

} // namespace

TEST_CASE("prune_nm keeps the top-N magnitudes of each chunk") {
    GroupedMatrix g;
    g.layout = GroupLayout{{4, 1, 1, 1}, 4};
    g.values = Matrix(1, 4);
    g.values.data = {0.5, -2, 1, -0.1};
    const SparseGroupedMatrix s = prune_nm(g, {2, 4});
    CHECK(s.mask.bits == std::vector<uint8_t>{0, 1, 1, 0});
    CHECK(s.grouped.values.data == std::vector<double>{0, -2, 1, 0});
}

TEST_CASE("prune_nm breaks ties toward the lowest index") {
    GroupedMatrix g;
    g.layout = GroupLayout{{4, 1, 1, 1}, 4};
    g.values = Matrix(1, 4);
    g.values.data = {1, 1, 1, 1};
    const SparseGroupedMatrix s = prune_nm(g, {2, 4});
    CHECK(s.mask.bits == std::vector<uint8_t>{1, 1, 0, 0});
}

TEST_CASE("prune_nm matches a sort-based oracle on random data") {
    const GroupedMatrix g = make_grouped(1000, 16, 11);
    const SparseGroupedMatrix s = prune_nm(g, {4, 16});
    for (std::size_t r = 0; r < g.values.rows; ++r) {
        const auto oracle = prune_oracle(g.values.row(r), 4);
        std::size_t ones = 0;
        for (std::size_t c = 0; c < 16; ++c) {
            CHECK(s.mask.at(r, c) == oracle[c]);
            ones += s.mask.at(r, c);
            if (!s.mask.at(r, c)) CHECK(s.grouped.values.at(r, c) == 0.0);
        }
        CHECK(ones == 4);
    }
}

TEST_CASE("prune_nm sparsity is exactly (M-N)/M and pruning is idempotent") {
    const GroupedMatrix g = make_grouped(128, 16, 21);
    const SparseGroupedMatrix s = prune_nm(g, {4, 16});
    const std::size_t ones =
        std::count(s.mask.bits.begin(), s.mask.bits.end(), uint8_t(1));
    CHECK(double(s.mask.bits.size() - ones) / s.mask.bits.size() == doctest::Approx(0.75));

    const SparseGroupedMatrix again = prune_nm(s.grouped, {4, 16});
    CHECK(again.mask.bits == s.mask.bits);
    CHECK(again.grouped.values.data == s.grouped.values.data);
}

TEST_CASE("kept magnitudes dominate dropped magnitudes within each chunk") {
    const GroupedMatrix g = make_grouped(200, 8, 31);
    const SparseGroupedMatrix s = prune_nm(g, {2, 8});
    for (std::size_t r = 0; r < g.values.rows; ++r) {
        double min_kept = 1e300, max_dropped = 0.0;
        for (std::size_t c = 0; c < 8; ++c) {
            const double mag = std::fabs(g.values.at(r, c));
            if (s.mask.at(r, c)) min_kept = std::min(min_kept, mag);
            else max_dropped = std::max(max_dropped, mag);
        }
        CHECK(min_kept >= max_dropped);
    }
}

TEST_CASE("prune_nm requires d to be a multiple of M") {
    const GroupedMatrix g = make_grouped(4, 8, 1);
    expect_error(Errc::DNotMultipleOfM, [&] { (void)prune_nm(g, {4, 16}); });
}

TEST_CASE("mask LUT enumeration order for 1:2") {
    const MaskLut lut(NmPattern{1, 2});
    CHECK(lut.size() == 2);
    CHECK(lut.id_bits() == 1);
    const uint8_t first[2] = {1, 0};
    const uint8_t second[2] = {0, 1};
    CHECK(lut.encode({first, 2}) == 0);
    CHECK(lut.encode({second, 2}) == 1);
    std::vector<uint8_t> out(2);
    lut.decode(0, out);
    CHECK(out == std::vector<uint8_t>{1, 0});
}

TEST_CASE("mask storage cost: 2:4 exceeds 1:2 by exactly 0.25 bit/weight") {
    const MaskLut lut24(NmPattern{2, 4});
    const MaskLut lut12(NmPattern{1, 2});
    CHECK(lut24.size() == 6);
    CHECK(lut24.id_bits() == 3);
    CHECK(lut24.bits_per_weight() == 0.75);
    CHECK(lut12.bits_per_weight() == 0.5);
    CHECK(lut24.bits_per_weight() - lut12.bits_per_weight() == 0.25);
}

TEST_CASE("4:16 LUT geometry") {
    const MaskLut lut(NmPattern{4, 16});
    CHECK(lut.size() == 1820); // C(16,4)
    CHECK(lut.id_bits() == 11);
    CHECK(lut.bits_per_weight() == 0.6875);
}

TEST_CASE("LUT round-trips all C(16,4) masks and pins the boundary ids") {
    const MaskLut lut(NmPattern{4, 16});
    std::vector<uint8_t> bits(16);
    for (uint32_t id = 0; id < lut.size(); ++id) {
        lut.decode(id, bits);
        CHECK(lut.encode(bits) == id);
    }
    lut.decode(0, bits);
    CHECK(bits == std::vector<uint8_t>{1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
    lut.decode(1819, bits);
    CHECK(bits == std::vector<uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
}

TEST_CASE("row-level id conversion round-trips") {
    const GroupedMatrix g = make_grouped(32, 16, 77);
    const SparseGroupedMatrix s = prune_nm(g, {4, 16});
    for (std::size_t r = 0; r < s.mask.rows; ++r) {
        const auto ids = mask_to_lut_ids(s.mask.row(r), s.pattern);
        REQUIRE(ids.size() == 1);
        const auto bits = lut_ids_to_mask(ids, s.pattern, 16);
        for (std::size_t c = 0; c < 16; ++c) CHECK(bits[c] == s.mask.at(r, c));
    }
}

TEST_CASE("LUT errors") {
    const MaskLut lut(NmPattern{2, 4});
    const uint8_t bad[4] = {1, 1, 1, 0};
    expect_error(Errc::InvalidPopcount, [&] { (void)lut.encode({bad, 4}); });
    std::vector<uint8_t> out(4);
    expect_error(Errc::IdOutOfRange, [&] { lut.decode(6, out); });
    expect_error(Errc::InvalidPattern, [] { (void)make_pattern(4, 4); });
    expect_error(Errc::InvalidPattern, [] { (void)make_pattern(0, 4); });
}

TEST_CASE("binomial and id widths") {
    CHECK(binomial(16, 4) == 1820);
    CHECK(binomial(4, 2) == 6);
    CHECK(binomial(2, 1) == 2);
    CHECK(bits_for_count(1) == 0);
    CHECK(bits_for_count(2) == 1);
    CHECK(bits_for_count(6) == 3);
    CHECK(bits_for_count(1820) == 11);
}

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvq/sparsity.hpp"

namespace mvq {

// Normalized per-access energy, with one MAC operation as the unit.
struct EnergyModel {
    double dram = 200.0;
    double l2 = 15.0;
    double l1 = 6.0;
    double prf = 0.22;
    double arf = 0.11;
    double wrf = 0.02;
    double crf = 0.02;
    double mac = 1.0;
};

struct LayerSpec {
    std::string name;
    uint32_t cout = 0, cin = 0, kh = 0, kw = 0;
    uint32_t oh = 0, ow = 0;

    double weight_count() const { return double(cout) * cin * kh * kw; }
    double macs() const { return weight_count() * oh * ow; }
};

enum class Dataflow { WS, EWS };

// base: raw 8-bit weights. C: common VQ (assignments only). CM: masked VQ
// (assignments + mask ids). CMS: CM plus the sparse-tile array.
enum class Compression { Base, C, CM, CMS };

struct AccelConfig {
    uint32_t array_h = 32;
    uint32_t array_l = 32;
    uint32_t ext_a = 1, ext_b = 1, ext_d = 1; // EWS extensions (all 1 => plain WS)
    Dataflow dataflow = Dataflow::EWS;
    Compression compression = Compression::Base;
    uint32_t subvec_d = 16;
    NmPattern pattern{4, 16};
    uint32_t k = 512;
    uint32_t qc = 8;
    uint32_t weight_bits = 8;
    uint32_t act_bits = 8;
    uint32_t dma_bits = 64;
    double l1_kb = 256.0;
    double l2_kb = 2048.0;
    double weight_zero_frac = 0.0;
    double act_zero_frac = 0.0;
};

void validate_config(const AccelConfig& cfg);

// Access counts are element accesses (one weight or one activation). For
// compressed weight streams the count is total bits / weight_bits, so bit
// ratios carry through exactly.
//
// Base WS model (A=B=D=1): weights tile into H x L passes,
// passes = ceil(Cin/H) * ceil(Cout/L) * Kh * Kw; per pass the array streams
// the output plane, reading OH*OW activations per active row from L1 and
// doing a read+write psum pair per active column per position. EWS divides
// the ifmap reads by A*D and the psum accesses by B*D. Every weight enters
// the array exactly once.
struct AccessCounts {
    double macs_dense = 0.0;
    double mac_ops = 0.0; // scaled by N/M under CM/CMS

    double l1_ifmap_reads = 0.0;
    double l1_psum_accesses = 0.0;
    double l1_ifmap_fill_writes = 0.0;
    double l1_ofmap_writes = 0.0;
    double l1_ofmap_drain_reads = 0.0;

    double l2_weight_reads = 0.0;
    double l2_ifmap_reads = 0.0;
    double l2_ofmap_writes = 0.0;

    double dram_weight_reads = 0.0;
    double dram_ifmap_reads = 0.0;
    double dram_ofmap_writes = 0.0;

    double prf_accesses = 0.0;
    double arf_reads = 0.0, arf_writes = 0.0;
    double wrf_reads = 0.0, wrf_writes = 0.0;
    double crf_reads = 0.0, crf_writes = 0.0;

    double weight_stream_bits = 0.0; // assignment+mask (or raw) bits from L2
    double codebook_bits = 0.0;      // one-time CRF init traffic
    double gated_mac_fraction = 0.0;

    double dram() const { return dram_weight_reads + dram_ifmap_reads + dram_ofmap_writes; }
    double l2() const { return l2_weight_reads + l2_ifmap_reads + l2_ofmap_writes; }
    double l1() const {
        return l1_ifmap_reads + l1_psum_accesses + l1_ifmap_fill_writes + l1_ofmap_writes +
               l1_ofmap_drain_reads;
    }
    double prf() const { return prf_accesses; }
    double arf() const { return arf_reads + arf_writes; }
    double wrf() const { return wrf_reads + wrf_writes; }
    double crf() const { return crf_reads + crf_writes; }

    AccessCounts& operator+=(const AccessCounts& o);
};

AccessCounts ews_access_counts(const LayerSpec& layer, const AccelConfig& cfg);

// Storage-level order used in reports.
enum Level : int { kDram = 0, kL2, kL1, kPrf, kArf, kWrf, kCrf, kMac, kLevelCount };
extern const std::array<const char*, kLevelCount> kLevelNames;

struct SimReport {
    AccessCounts counts;
    std::array<double, kLevelCount> level_counts{};
    std::array<double, kLevelCount> level_energy{};
    std::array<double, kLevelCount> level_percent{};
    double total_energy = 0.0;
    double data_access_energy = 0.0; // total minus the MAC term
};

// energy = sum over levels of count * cost; the MAC term is scaled by
// (1 - gated fraction) when zero-value gating is configured.
SimReport energy_report(const AccessCounts& counts, const EnergyModel& model = {});

// Both columns of the tile resource table for an H x d tile.
struct TileResourceColumn {
    double multipliers = 0.0;
    double adders = 0.0;
    double rf_bits = 0.0;
    double lzc = 0.0;
    double demux = 0.0;
    double mux = 0.0;
    double parallelism = 0.0;
};

struct TileResources {
    TileResourceColumn dense;
    TileResourceColumn sparse;
    uint32_t q = 0; // active PEs per d-wide group
};

TileResources sparse_tile_resources(uint32_t h, uint32_t d, NmPattern pattern, uint32_t weight_bits,
                                    uint32_t psum_bits = 24, uint32_t wrf_depth = 16);

// Positions of the Q set bits in ascending index order, exactly what the
// cascaded LZC+XOR encoder emits. WrongPopcount unless popcount == expected_q.
std::vector<uint32_t> lzc_encode_mask(std::span<const uint8_t> mask, uint32_t expected_q);

enum class RooflineBound { Compute, WeightLoad };

struct RooflineResult {
    double peak_macs_per_cycle = 0.0;
    double load_limited_macs_per_cycle = 0.0;
    double attainable_macs_per_cycle = 0.0;
    double attainable_fraction = 0.0;
    double compute_cycles = 0.0;
    double load_cycles = 0.0;
    double cycles = 0.0; // max(compute, load): loading overlaps compute
    double bits_per_weight = 0.0;
    RooflineBound bound = RooflineBound::Compute;
};

// Attainable throughput = min(peak H*L, DMA bits/cycle / bits-per-weight *
// per-weight reuse), where reuse = MACs / weights (the ifmap plane
// traversal). Weight loading is assumed to overlap compute; the one-time
// codebook init does not count toward the steady-state loading rate.
RooflineResult roofline(const LayerSpec& layer, const AccelConfig& cfg);

// Whole-model roofline from summed MACs and weight-stream bits.
RooflineResult aggregate_roofline(std::span<const LayerSpec> layers, const AccelConfig& cfg);

// Fraction of MAC cycles whose operand registers can be held because either
// input is zero, assuming independence: 1 - (1-wz)(1-az).
double zero_gating_savings(double weight_zero_fraction, double act_zero_fraction);

// The six hardware settings compared in the reports.
enum class HwSetting { Ws, WsCms, Ews, EwsC, EwsCm, EwsCms };
extern const std::array<HwSetting, 6> kAllSettings;
const char* setting_name(HwSetting s);

// Applies dataflow/compression/codebook defaults for a setting on top of a
// base config (EWS-C uses k=1024, d=8; EWS-CM/CMS use k=512, d=16).
AccelConfig make_setting_config(HwSetting setting, AccelConfig base);

} // namespace mvq

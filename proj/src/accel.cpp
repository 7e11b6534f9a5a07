#include "mvq/accel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mvq {

const std::array<const char*, kLevelCount> kLevelNames = {"DRAM", "L2",  "L1",  "PRF",
                                                          "ARF",  "WRF", "CRF", "MAC"};

const std::array<HwSetting, 6> kAllSettings = {HwSetting::Ws,   HwSetting::WsCms,
                                               HwSetting::Ews,  HwSetting::EwsC,
                                               HwSetting::EwsCm, HwSetting::EwsCms};

void validate_config(const AccelConfig& cfg) {
    if (cfg.array_h < 1 || cfg.array_l < 1) fail(Errc::ConfigInvalid, "array must be at least 1x1");
    if (cfg.ext_a < 1 || cfg.ext_b < 1 || cfg.ext_d < 1)
        fail(Errc::ConfigInvalid, "EWS extensions must be at least 1");
    if (cfg.dataflow == Dataflow::WS && (cfg.ext_a != 1 || cfg.ext_b != 1 || cfg.ext_d != 1))
        fail(Errc::ConfigInvalid, "WS dataflow requires A=B=D=1");
    if (cfg.weight_bits < 1 || cfg.act_bits < 1 || cfg.dma_bits < 1)
        fail(Errc::ConfigInvalid, "bit widths must be positive");
    if (cfg.compression != Compression::Base) {
        if (cfg.subvec_d == 0 || cfg.array_l % cfg.subvec_d != 0)
            fail(Errc::ConfigInvalid, "CRF needs L/d read ports: L must be a multiple of d");
        if (cfg.k < 1) fail(Errc::ConfigInvalid, "codebook size must be positive");
        if (cfg.compression != Compression::C) {
            if (cfg.pattern.n_keep == 0 || cfg.pattern.m_group <= cfg.pattern.n_keep ||
                cfg.subvec_d % cfg.pattern.m_group != 0)
                fail(Errc::ConfigInvalid, "invalid N:M pattern for masked compression");
        }
    }
    if (!(cfg.l1_kb > 0.0) || !(cfg.l2_kb > 0.0))
        fail(Errc::ConfigInvalid, "buffer capacities must be positive");
    if (cfg.weight_zero_frac < 0.0 || cfg.weight_zero_frac > 1.0 || cfg.act_zero_frac < 0.0 ||
        cfg.act_zero_frac > 1.0)
        fail(Errc::ConfigInvalid, "zero fractions must be in [0,1]");
}

AccessCounts& AccessCounts::operator+=(const AccessCounts& o) {
    macs_dense += o.macs_dense;
    mac_ops += o.mac_ops;
    l1_ifmap_reads += o.l1_ifmap_reads;
    l1_psum_accesses += o.l1_psum_accesses;
    l1_ifmap_fill_writes += o.l1_ifmap_fill_writes;
    l1_ofmap_writes += o.l1_ofmap_writes;
    l1_ofmap_drain_reads += o.l1_ofmap_drain_reads;
    l2_weight_reads += o.l2_weight_reads;
    l2_ifmap_reads += o.l2_ifmap_reads;
    l2_ofmap_writes += o.l2_ofmap_writes;
    dram_weight_reads += o.dram_weight_reads;
    dram_ifmap_reads += o.dram_ifmap_reads;
    dram_ofmap_writes += o.dram_ofmap_writes;
    prf_accesses += o.prf_accesses;
    arf_reads += o.arf_reads;
    arf_writes += o.arf_writes;
    wrf_reads += o.wrf_reads;
    wrf_writes += o.wrf_writes;
    crf_reads += o.crf_reads;
    crf_writes += o.crf_writes;
    weight_stream_bits += o.weight_stream_bits;
    codebook_bits += o.codebook_bits;
    // gated fraction is a configuration property, not additive
    gated_mac_fraction = std::max(gated_mac_fraction, o.gated_mac_fraction);
    return *this;
}

namespace {

void check_layer(const LayerSpec& layer) {
    if (layer.cout == 0 || layer.cin == 0 || layer.kh == 0 || layer.kw == 0 || layer.oh == 0 ||
        layer.ow == 0)
        fail(Errc::ConfigInvalid, "layer '" + layer.name + "' has a zero dimension");
}

struct WeightBits {
    double stream = 0.0;
    double codebook = 0.0;
};

WeightBits weight_loading_bits(const LayerSpec& layer, const AccelConfig& cfg) {
    WeightBits bits;
    const double w = layer.weight_count();
    if (cfg.compression == Compression::Base) {
        bits.stream = w * cfg.weight_bits;
        return bits;
    }
    if (std::fmod(w, double(cfg.subvec_d)) != 0.0)
        fail(Errc::ConfigInvalid,
             "layer '" + layer.name + "' weight count is not a multiple of d");
    const double ng = w / cfg.subvec_d;
    double per_subvector = double(bits_for_count(cfg.k));
    if (cfg.compression != Compression::C) {
        const double chunks = double(cfg.subvec_d) / cfg.pattern.m_group;
        per_subvector +=
            chunks * bits_for_count(binomial(cfg.pattern.m_group, cfg.pattern.n_keep));
    }
    bits.stream = ng * per_subvector;
    bits.codebook = double(cfg.k) * cfg.subvec_d * cfg.qc;
    return bits;
}

} // namespace

AccessCounts ews_access_counts(const LayerSpec& layer, const AccelConfig& cfg) {
    validate_config(cfg);
    check_layer(layer);

    AccessCounts c;
    const double w = layer.weight_count();
    const double plane = double(layer.oh) * layer.ow;
    const double tiles_cin = std::ceil(double(layer.cin) / cfg.array_h);
    const double tiles_cout = std::ceil(double(layer.cout) / cfg.array_l);
    const double kernel = double(layer.kh) * layer.kw;

    c.macs_dense = layer.macs();
    const bool masked =
        cfg.compression == Compression::CM || cfg.compression == Compression::CMS;
    const double mac_scale =
        masked ? double(cfg.pattern.n_keep) / cfg.pattern.m_group : 1.0;
    c.mac_ops = c.macs_dense * mac_scale;

    const double ad = double(cfg.ext_a) * cfg.ext_d;
    const double bd = double(cfg.ext_b) * cfg.ext_d;
    c.l1_ifmap_reads = plane * kernel * tiles_cout * layer.cin / ad;
    c.l1_psum_accesses = 2.0 * plane * kernel * tiles_cin * layer.cout / bd;

    const WeightBits wb = weight_loading_bits(layer, cfg);
    c.weight_stream_bits = wb.stream;
    c.codebook_bits = wb.codebook;
    c.l2_weight_reads = (wb.stream + wb.codebook) / cfg.weight_bits;
    c.dram_weight_reads = c.l2_weight_reads; // weights stream from DRAM once

    const double ifmap_elems = double(layer.cin) * plane;
    const double ofmap_elems = double(layer.cout) * plane;
    const double ifmap_bytes = ifmap_elems * cfg.act_bits / 8.0;
    const double ofmap_bytes = ofmap_elems * cfg.act_bits / 8.0;
    const bool ifmap_fits_l1 = ifmap_bytes <= cfg.l1_kb * 1024.0;
    c.l2_ifmap_reads = ifmap_fits_l1 ? ifmap_elems : tiles_cout * ifmap_elems;
    c.l1_ifmap_fill_writes = c.l2_ifmap_reads;
    c.l2_ofmap_writes = ofmap_elems;
    c.l1_ofmap_writes = ofmap_elems;
    c.l1_ofmap_drain_reads = ofmap_elems;
    c.dram_ifmap_reads = ifmap_bytes > cfg.l2_kb * 1024.0 ? c.l2_ifmap_reads : 0.0;
    c.dram_ofmap_writes = ofmap_bytes > cfg.l2_kb * 1024.0 ? ofmap_elems : 0.0;

    c.prf_accesses = 2.0 * c.mac_ops;
    c.arf_reads = c.mac_ops;
    c.arf_writes = c.l1_ifmap_reads;
    c.wrf_reads = c.mac_ops;
    c.wrf_writes = cfg.compression == Compression::CMS ? w * mac_scale : w;
    if (cfg.compression != Compression::Base) {
        c.crf_writes = double(cfg.k) * cfg.subvec_d;
        c.crf_reads = w; // one read per reconstructed weight
    }

    c.gated_mac_fraction = zero_gating_savings(cfg.weight_zero_frac, cfg.act_zero_frac);
    return c;
}

SimReport energy_report(const AccessCounts& counts, const EnergyModel& model) {
    SimReport rep;
    rep.counts = counts;
    rep.level_counts = {counts.dram(), counts.l2(),  counts.l1(),  counts.prf(),
                        counts.arf(),  counts.wrf(), counts.crf(), counts.mac_ops};
    const std::array<double, kLevelCount> cost = {model.dram, model.l2,  model.l1,  model.prf,
                                                  model.arf,  model.wrf, model.crf, model.mac};
    for (int lv = 0; lv < kLevelCount; ++lv) {
        double e = rep.level_counts[lv] * cost[lv];
        if (lv == kMac) e *= 1.0 - counts.gated_mac_fraction;
        rep.level_energy[lv] = e;
        rep.total_energy += e;
    }
    rep.data_access_energy = rep.total_energy - rep.level_energy[kMac];
    for (int lv = 0; lv < kLevelCount; ++lv)
        rep.level_percent[lv] =
            rep.total_energy > 0.0 ? 100.0 * rep.level_energy[lv] / rep.total_energy : 0.0;
    return rep;
}

TileResources sparse_tile_resources(uint32_t h, uint32_t d, NmPattern pattern, uint32_t weight_bits,
                                    uint32_t psum_bits, uint32_t wrf_depth) {
    if (h == 0 || d == 0 || weight_bits == 0 || psum_bits == 0 || wrf_depth == 0)
        fail(Errc::ConfigInvalid, "tile parameters must be positive");
    // N == M (no pruning) is allowed here: the sparse tile degenerates to a
    // dense one plus the encoder/mux plumbing.
    if (pattern.n_keep == 0 || pattern.m_group < pattern.n_keep)
        fail(Errc::InvalidPattern, "need 0 < N <= M for tile resources");
    const uint64_t qd = uint64_t(pattern.n_keep) * d;
    if (qd % pattern.m_group != 0)
        fail(Errc::QNotIntegral, "Q = N/M * d is not integral for d=" + std::to_string(d));
    const double q = double(qd / pattern.m_group);
    const double pos_bits = double(bits_for_count(d));

    TileResources res;
    res.q = uint32_t(qd / pattern.m_group);
    res.dense.multipliers = double(h) * d;
    res.dense.adders = double(h) * d;
    res.dense.rf_bits = double(h) * d * wrf_depth * weight_bits;
    res.dense.parallelism = 2.0 * h * d;

    res.sparse.multipliers = double(h) * q;
    res.sparse.adders = double(h) * d;
    res.sparse.rf_bits = double(h) * q * wrf_depth * weight_bits + double(h) * q * wrf_depth * pos_bits;
    res.sparse.lzc = double(h) * q;
    res.sparse.demux = double(h) * q * psum_bits;
    res.sparse.mux = double(h) * q * weight_bits;
    res.sparse.parallelism = 2.0 * h * d;
    return res;
}

std::vector<uint32_t> lzc_encode_mask(std::span<const uint8_t> mask, uint32_t expected_q) {
    uint32_t ones = 0;
    for (uint8_t b : mask) ones += b ? 1 : 0;
    if (ones != expected_q)
        fail(Errc::WrongPopcount, "mask has " + std::to_string(ones) + " set bits, expected " +
                                      std::to_string(expected_q));

    // Each cascade stage finds the next set bit and XORs it away.
    std::vector<uint8_t> remaining(mask.begin(), mask.end());
    std::vector<uint32_t> codes;
    codes.reserve(expected_q);
    for (uint32_t stage = 0; stage < expected_q; ++stage) {
        uint32_t idx = 0;
        while (!remaining[idx]) ++idx;
        codes.push_back(idx);
        remaining[idx] = 0;
    }
    return codes;
}

namespace {

RooflineResult roofline_from_totals(double macs, double stream_bits, double weights,
                                    const AccelConfig& cfg) {
    RooflineResult res;
    res.bits_per_weight = stream_bits / weights;
    res.peak_macs_per_cycle = double(cfg.array_h) * cfg.array_l;
    res.compute_cycles = macs / res.peak_macs_per_cycle;
    res.load_cycles = stream_bits / cfg.dma_bits;
    res.cycles = std::max(res.compute_cycles, res.load_cycles);
    res.load_limited_macs_per_cycle = macs / res.load_cycles;
    res.attainable_macs_per_cycle =
        std::min(res.peak_macs_per_cycle, res.load_limited_macs_per_cycle);
    res.attainable_fraction = res.attainable_macs_per_cycle / res.peak_macs_per_cycle;
    res.bound = res.compute_cycles >= res.load_cycles ? RooflineBound::Compute
                                                      : RooflineBound::WeightLoad;
    return res;
}

} // namespace

RooflineResult roofline(const LayerSpec& layer, const AccelConfig& cfg) {
    validate_config(cfg);
    check_layer(layer);
    // Steady-state loading rate: the one-time codebook init is excluded.
    const WeightBits wb = weight_loading_bits(layer, cfg);
    return roofline_from_totals(layer.macs(), wb.stream, layer.weight_count(), cfg);
}

RooflineResult aggregate_roofline(std::span<const LayerSpec> layers, const AccelConfig& cfg) {
    validate_config(cfg);
    double macs = 0.0, stream_bits = 0.0, weights = 0.0;
    for (const auto& layer : layers) {
        check_layer(layer);
        macs += layer.macs();
        stream_bits += weight_loading_bits(layer, cfg).stream;
        weights += layer.weight_count();
    }
    if (weights == 0.0) return RooflineResult{};
    return roofline_from_totals(macs, stream_bits, weights, cfg);
}

double zero_gating_savings(double weight_zero_fraction, double act_zero_fraction) {
    if (weight_zero_fraction < 0.0 || weight_zero_fraction > 1.0 || act_zero_fraction < 0.0 ||
        act_zero_fraction > 1.0)
        fail(Errc::ConfigInvalid, "zero fractions must be in [0,1]");
    return 1.0 - (1.0 - weight_zero_fraction) * (1.0 - act_zero_fraction);
}

const char* setting_name(HwSetting s) {
    switch (s) {
        case HwSetting::Ws: return "ws";
        case HwSetting::WsCms: return "ws-cms";
        case HwSetting::Ews: return "ews";
        case HwSetting::EwsC: return "ews-c";
        case HwSetting::EwsCm: return "ews-cm";
        case HwSetting::EwsCms: return "ews-cms";
    }
    return "?";
}

AccelConfig make_setting_config(HwSetting setting, AccelConfig base) {
    switch (setting) {
        case HwSetting::Ws:
            base.dataflow = Dataflow::WS;
            base.ext_a = base.ext_b = base.ext_d = 1;
            base.compression = Compression::Base;
            break;
        case HwSetting::WsCms:
            base.dataflow = Dataflow::WS;
            base.ext_a = base.ext_b = base.ext_d = 1;
            base.compression = Compression::CMS;
            base.k = 512;
            base.subvec_d = 16;
            base.pattern = NmPattern{4, 16};
            break;
        case HwSetting::Ews:
            base.dataflow = Dataflow::EWS;
            base.compression = Compression::Base;
            break;
        case HwSetting::EwsC:
            base.dataflow = Dataflow::EWS;
            base.compression = Compression::C;
            base.k = 1024;
            base.subvec_d = 8;
            break;
        case HwSetting::EwsCm:
            base.dataflow = Dataflow::EWS;
            base.compression = Compression::CM;
            base.k = 512;
            base.subvec_d = 16;
            base.pattern = NmPattern{4, 16};
            break;
        case HwSetting::EwsCms:
            base.dataflow = Dataflow::EWS;
            base.compression = Compression::CMS;
            base.k = 512;
            base.subvec_d = 16;
            base.pattern = NmPattern{4, 16};
            break;
    }
    return base;
}

} // namespace mvq

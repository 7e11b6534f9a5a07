#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include "mvq/accel.hpp"
#include "mvq/codec.hpp"
#include "test_util.hpp"

using namespace mvq;

namespace {

const LayerSpec kConv{"conv", 64, 64, 3, 3, 56, 56};

AccelConfig ews_base() {
    AccelConfig cfg;
    cfg.array_h = 16;
    cfg.array_l = 16;
    cfg.dataflow = Dataflow::EWS;
    return cfg;
}

} // namespace

TEST_CASE("EWS extensions divide the L1 counts and leave the rest alone") {
    AccelConfig base = ews_base();
    AccelConfig ext = base;
    ext.ext_a = 4;
    ext.ext_b = 2;
    ext.ext_d = 2;

    const AccessCounts c0 = ews_access_counts(kConv, base);
    const AccessCounts c1 = ews_access_counts(kConv, ext);

    CHECK(c1.l1_ifmap_reads * 8.0 == c0.l1_ifmap_reads);
    CHECK(c1.l1_psum_accesses * 4.0 == c0.l1_psum_accesses);
    CHECK(c1.mac_ops == c0.mac_ops);
    CHECK(c1.dram() == c0.dram());
    CHECK(c1.l2() == c0.l2());
    CHECK(c1.wrf() == c0.wrf());
    CHECK(c1.prf() == c0.prf());
    CHECK(c1.crf() == c0.crf());
}

TEST_CASE("CM weight stream is 20 bits per 16-weight subvector") {
    AccelConfig cfg = ews_base();
    cfg.compression = Compression::CM;
    cfg.k = 512;
    cfg.subvec_d = 16;
    cfg.pattern = {4, 16};

    const AccessCounts cm = ews_access_counts(kConv, cfg);
    cfg.compression = Compression::Base;
    const AccessCounts base = ews_access_counts(kConv, cfg);

    const double ng = kConv.weight_count() / 16.0;
    CHECK(cm.weight_stream_bits == ng * (9 + 11));
    CHECK(base.weight_stream_bits == kConv.weight_count() * 8);
    CHECK(cm.weight_stream_bits / base.weight_stream_bits == doctest::Approx(20.0 / 128.0));
    CHECK(cm.codebook_bits == 512 * 16 * 8);
    CHECK(cm.mac_ops == base.mac_ops * 0.25);
}

TEST_CASE("degenerate 1x1 conv on a matched array") {
    const LayerSpec layer{"pw", 16, 16, 1, 1, 10, 10};
    AccelConfig cfg = ews_base();
    const AccessCounts c = ews_access_counts(layer, cfg);
    CHECK(c.l2_weight_reads == layer.weight_count()); // every weight loaded once
    CHECK(c.l1_ifmap_reads == 100.0 * 16);            // OH*OW*Cin
    CHECK(c.mac_ops == layer.macs());
}

TEST_CASE("energy report is the weighted sum of counts") {
    AccessCounts counts;
    counts.dram_weight_reads = 1;
    const SimReport rep = energy_report(counts);
    CHECK(rep.level_energy[kDram] == 200.0);
    CHECK(rep.total_energy == 200.0);

    const SimReport zero = energy_report(AccessCounts{});
    CHECK(zero.total_energy == 0.0);
}

TEST_CASE("energy is linear in counts and permutation invariant") {
    AccelConfig cfg = ews_base();
    const LayerSpec l1{"a", 64, 64, 3, 3, 28, 28};
    const LayerSpec l2{"b", 128, 64, 1, 1, 14, 14};
    AccessCounts sum12 = ews_access_counts(l1, cfg);
    sum12 += ews_access_counts(l2, cfg);
    AccessCounts sum21 = ews_access_counts(l2, cfg);
    sum21 += ews_access_counts(l1, cfg);

    const double split = energy_report(ews_access_counts(l1, cfg)).total_energy +
                         energy_report(ews_access_counts(l2, cfg)).total_energy;
    CHECK(energy_report(sum12).total_energy == doctest::Approx(split).epsilon(1e-12));
    CHECK(energy_report(sum12).total_energy == energy_report(sum21).total_energy);
}

TEST_CASE("EWS has strictly lower L1 energy than WS at the same config") {
    AccelConfig ws = ews_base();
    ws.dataflow = Dataflow::WS;
    AccelConfig ews = ews_base();
    ews.ext_a = ews.ext_b = ews.ext_d = 2;

    const SimReport rws = energy_report(ews_access_counts(kConv, ws));
    const SimReport rews = energy_report(ews_access_counts(kConv, ews));
    CHECK(rews.level_energy[kL1] < rws.level_energy[kL1]);
}

TEST_CASE("compressed weight traffic matches the codec accounting at b_f=8") {
    AccelConfig cfg = ews_base();
    cfg.compression = Compression::CM;
    cfg.k = 512;
    cfg.subvec_d = 16;
    cfg.pattern = {4, 16};
    const AccessCounts c = ews_access_counts(kConv, cfg);

    const uint64_t ng = uint64_t(kConv.weight_count()) / 16;
    const PayloadBits bits = payload_bits(ng, 16, 512, {4, 16}, 8);
    CHECK(c.weight_stream_bits == double(bits.b_a + bits.b_m));
    CHECK(c.codebook_bits == double(bits.b_c));
}

TEST_CASE("sparse tile resources reproduce the resource table") {
    const TileResources res = sparse_tile_resources(16, 16, {4, 16}, 8);
    CHECK(res.q == 4);
    CHECK(res.dense.multipliers == 256);
    CHECK(res.sparse.multipliers == 64); // 75% reduction
    CHECK(res.dense.adders == 256);
    CHECK(res.sparse.adders == 256);
    CHECK(res.dense.rf_bits == 32768);
    CHECK(res.sparse.rf_bits == 8192 + 4096);
    CHECK(res.sparse.lzc == 64);
    CHECK(res.sparse.demux == 64 * 24);
    CHECK(res.sparse.mux == 64 * 8);
    CHECK(res.dense.parallelism == 2 * 16 * 16);
    CHECK(res.sparse.parallelism == 2 * 16 * 16);
    CHECK(1.0 - res.sparse.multipliers / res.dense.multipliers == 0.75);
}

TEST_CASE("N=M tile keeps the dense datapath plus encoder plumbing") {
    const TileResources res = sparse_tile_resources(8, 8, {8, 8}, 8);
    CHECK(res.q == 8);
    CHECK(res.sparse.multipliers == res.dense.multipliers);
    CHECK(res.sparse.adders == res.dense.adders);
    CHECK(res.sparse.parallelism == res.dense.parallelism);
    CHECK(res.sparse.lzc > 0);
    CHECK(res.sparse.demux > 0);
    CHECK(res.sparse.mux > 0);
    CHECK(res.sparse.rf_bits == res.dense.rf_bits + 8 * 8 * 16 * 3);
}

TEST_CASE("2:4 on d=8 halves the multipliers") {
    const TileResources res = sparse_tile_resources(4, 8, {2, 4}, 8);
    CHECK(res.q == 4);
    CHECK(res.sparse.multipliers == res.dense.multipliers / 2);
}

TEST_CASE("tile resources reject non-integral Q") {
    expect_error(Errc::QNotIntegral, [] { (void)sparse_tile_resources(4, 6, {1, 4}, 8); });
}

TEST_CASE("LZC encoder emits ascending set-bit positions") {
    const std::vector<uint8_t> mask = {0, 1, 1, 0, 0, 1, 0, 0};
    CHECK(lzc_encode_mask(mask, 3) == std::vector<uint32_t>{1, 2, 5});

    const std::vector<uint8_t> leading = {1, 1, 1, 0, 0, 0, 0, 0};
    CHECK(lzc_encode_mask(leading, 3) == std::vector<uint32_t>{0, 1, 2});

    expect_error(Errc::WrongPopcount, [&] { (void)lzc_encode_mask(mask, 4); });
}

TEST_CASE("LZC equals the naive scan over every C(16,4) mask") {
    const MaskLut lut(NmPattern{4, 16});
    std::vector<uint8_t> bits(16);
    std::set<std::vector<uint32_t>> seen;
    for (uint32_t id = 0; id < lut.size(); ++id) {
        lut.decode(id, bits);
        // independent oracle: plain index scan
        std::vector<uint32_t> scan;
        for (uint32_t i = 0; i < 16; ++i)
            if (bits[i]) scan.push_back(i);
        const auto codes = lzc_encode_mask(bits, 4);
        CHECK(codes == scan);
        seen.insert(codes);
    }
    CHECK(seen.size() == lut.size()); // bijection onto sorted index tuples
}

TEST_CASE("roofline: big arrays are weight-load bound, small ones compute bound") {
    std::vector<LayerSpec> resnet_tail = {
        {"l4a", 512, 256, 3, 3, 7, 7},
        {"l4b", 512, 512, 3, 3, 7, 7},
        {"l4c", 512, 512, 3, 3, 7, 7},
    };
    AccelConfig big = ews_base();
    big.array_h = big.array_l = 64;
    const RooflineResult rb = aggregate_roofline(resnet_tail, big);
    CHECK(rb.bound == RooflineBound::WeightLoad);
    CHECK(rb.attainable_fraction < 1.0);

    AccelConfig small = big;
    small.array_h = small.array_l = 16;
    CHECK(aggregate_roofline(resnet_tail, small).bound == RooflineBound::Compute);

    AccelConfig small_cm = make_setting_config(HwSetting::EwsCm, small);
    CHECK(aggregate_roofline(resnet_tail, small_cm).bound == RooflineBound::Compute);
}

TEST_CASE("CM raises the load-limited throughput by exactly 6.4x") {
    AccelConfig base = ews_base();
    base.array_h = base.array_l = 64;
    AccelConfig cm = make_setting_config(HwSetting::EwsCm, base);

    const RooflineResult rb = roofline(kConv, base);
    const RooflineResult rc = roofline(kConv, cm);
    CHECK(rb.bits_per_weight == 8.0);
    CHECK(rc.bits_per_weight == 1.25);
    CHECK(rc.load_limited_macs_per_cycle ==
          doctest::Approx(rb.load_limited_macs_per_cycle * 6.4).epsilon(1e-12));
}

TEST_CASE("zero gating fractions") {
    CHECK(zero_gating_savings(0.0, 0.0) == 0.0);
    CHECK(zero_gating_savings(1.0, 0.3) == 1.0);
    CHECK(zero_gating_savings(0.25, 0.5) == 0.625);
    expect_error(Errc::ConfigInvalid, [] { (void)zero_gating_savings(-0.1, 0.0); });

    AccessCounts counts;
    counts.mac_ops = 100;
    counts.gated_mac_fraction = 0.625;
    CHECK(energy_report(counts).level_energy[kMac] == doctest::Approx(37.5));
}

TEST_CASE("config validation") {
    AccelConfig cfg = ews_base();
    cfg.dataflow = Dataflow::WS;
    cfg.ext_a = 2;
    expect_error(Errc::ConfigInvalid, [&] { (void)ews_access_counts(kConv, cfg); });

    AccelConfig bad_l = ews_base();
    bad_l.compression = Compression::CM;
    bad_l.array_l = 12; // not a multiple of d=16
    expect_error(Errc::ConfigInvalid, [&] { (void)ews_access_counts(kConv, bad_l); });
}

TEST_CASE("setting presets follow the evaluation configuration") {
    const AccelConfig base = ews_base();
    const AccelConfig c = make_setting_config(HwSetting::EwsC, base);
    CHECK(c.k == 1024);
    CHECK(c.subvec_d == 8);
    CHECK(c.compression == Compression::C);
    const AccelConfig cm = make_setting_config(HwSetting::EwsCm, base);
    CHECK(cm.k == 512);
    CHECK(cm.subvec_d == 16);
    const AccelConfig ws = make_setting_config(HwSetting::Ws, base);
    CHECK(ws.ext_a == 1);
    CHECK(ws.dataflow == Dataflow::WS);
}

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "mvq/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mvq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::ConfigInvalid:
        case Errc::InvalidPattern:
        case Errc::TooFewSubvectors:
        case Errc::QNotIntegral:
            return kExitConfig;
        case Errc::IoError:
        case Errc::ParseError:
        case Errc::BadMagic:
        case Errc::TruncatedStream:
        case Errc::CorruptLengths:
        case Errc::CoutNotMultipleOfD:
        case Errc::DNotMultipleOfM:
        case Errc::DimensionMismatch:
        case Errc::InvalidPopcount:
        case Errc::IdOutOfRange:
        case Errc::IndexOutOfRange:
        case Errc::WrongPopcount:
            return kExitData;
    }
    return kExitInternal;
}

NmPattern parse_nm_flag(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) fail(Errc::ConfigInvalid, "--nm expects N:M, got '" + s + "'");
    return make_pattern(uint32_t(std::stoul(s.substr(0, colon))),
                        uint32_t(std::stoul(s.substr(colon + 1))));
}

struct CompressArgs {
    std::string layers;
    std::string out = "model.mvq";
    uint32_t d = 16, k = 512, qc = 8, bf = 32;
    std::string nm = "4:16";
    uint64_t seed = 42;
    std::string mode = "masked";
    std::string scope = "layerwise";
    std::string scale = "absmax";
    std::size_t max_iters = 100;
    double threshold = 0.001;
};

int cmd_compress(const CompressArgs& args) {
    const NmPattern pattern = parse_nm_flag(args.nm);
    const auto jobs = read_compress_config(args.layers);

    std::vector<NamedTensor> tensors;
    std::vector<LayerSettings> settings;
    for (const auto& job : jobs) {
        if (!job.include) {
            std::cout << "skip     " << job.manifest.string() << " (excluded)\n";
            continue;
        }
        tensors.push_back(read_tensor_manifest(job.manifest));
        LayerSettings s;
        s.d = job.d.value_or(args.d);
        s.k = job.k.value_or(args.k);
        s.qc = job.qc.value_or(args.qc);
        s.pattern = job.nm ? make_pattern(job.nm->first, job.nm->second) : pattern;
        settings.push_back(s);
    }

    CompressOptions opts;
    opts.b_f = args.bf;
    opts.seed = args.seed;
    opts.mode = args.mode == "common" ? ClusterMode::Common : ClusterMode::Masked;
    opts.scope = args.scope == "crosslayer" ? CodebookScope::CrossLayer : CodebookScope::Layerwise;
    opts.scale_mode = args.scale == "grid" ? ScaleMode::GridSearch : ScaleMode::AbsMax;
    opts.kmeans.max_iters = args.max_iters;
    opts.kmeans.change_threshold_fraction = args.threshold;

    const ModelCompressionResult result = compress_model(tensors, settings, opts);

    std::vector<CompressedLayer> layers;
    std::cout << std::left << std::setw(16) << "layer" << std::right << std::setw(10) << "NG"
              << std::setw(6) << "iters" << std::setw(14) << "cluster-SSE" << std::setw(14)
              << "recon-SSE" << std::setw(9) << "CR" << std::setw(8) << "FLOPs" << "\n";
    for (const auto& lr : result.layers) {
        layers.push_back(lr.layer);
        std::cout << std::left << std::setw(16) << lr.name << std::right << std::setw(10)
                  << lr.layer.ng() << std::setw(6) << lr.stats.iterations << std::setw(14)
                  << std::setprecision(6) << lr.cluster_mask_sse << std::setw(14)
                  << lr.recon_sse.mask_sse << std::setw(9) << std::setprecision(4) << lr.report.cr
                  << std::setw(8) << lr.report.sparse_flops / lr.report.dense_flops << "\n";
    }
    std::cout << "aggregate CR " << std::setprecision(4) << result.aggregate_cr << " ("
              << result.total_raw_bits << " / " << result.total_payload_bits << " bits)\n";

    const auto bytes = serialize(layers);
    write_file_bytes(args.out, bytes);
    std::cout << "wrote " << args.out << " (" << bytes.size() << " bytes)\n";
    return kExitOk;
}

struct AblateArgs {
    std::string input;
    uint32_t ab_k = 1024, ab_d = 8, cd_k = 512, cd_d = 16;
    std::string nm = "4:16";
    uint64_t seed = 42;
};

int cmd_ablate(const AblateArgs& args) {
    AblationOptions opts;
    opts.ab_k = args.ab_k;
    opts.ab_d = args.ab_d;
    opts.cd_k = args.cd_k;
    opts.cd_d = args.cd_d;
    opts.pattern = parse_nm_flag(args.nm);
    opts.seed = args.seed;

    const NamedTensor t = read_tensor_manifest(args.input);
    const auto cases = run_ablation(t.tensor, opts);

    std::cout << "case  total-SSE      mask-SSE       FLOPs\n";
    for (const auto& c : cases)
        std::cout << std::left << std::setw(6) << c.label << std::right << std::setw(12)
                  << std::setprecision(6) << c.total_sse << "  " << std::setw(12) << c.mask_sse
                  << "  " << std::setw(6) << std::setprecision(3) << c.flops_ratio << "\n";
    return kExitOk;
}

struct SimArgs {
    std::string layers;
    std::string out = "simreport";
    std::string setting = "all";
    std::string array = "32x32";
    std::string ews = "2,2,2";
    std::string nm = "4:16";
    uint32_t k = 512, d = 16, qc = 8;
    uint32_t dma_bits = 64, weight_bits = 8, act_bits = 8;
    double l1_kb = 256.0, l2_kb = 2048.0;
    double wz = 0.0, az = 0.0;
};

AccelConfig base_config_from(const SimArgs& args) {
    AccelConfig cfg;
    const auto x = args.array.find('x');
    if (x == std::string::npos)
        fail(Errc::ConfigInvalid, "--array expects HxL, got '" + args.array + "'");
    cfg.array_h = uint32_t(std::stoul(args.array.substr(0, x)));
    cfg.array_l = uint32_t(std::stoul(args.array.substr(x + 1)));

    std::stringstream ss(args.ews);
    std::string part;
    uint32_t abd[3];
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ','))
            fail(Errc::ConfigInvalid, "--ews expects A,B,D, got '" + args.ews + "'");
        abd[i] = uint32_t(std::stoul(part));
    }
    cfg.ext_a = abd[0];
    cfg.ext_b = abd[1];
    cfg.ext_d = abd[2];
    cfg.k = args.k;
    cfg.subvec_d = args.d;
    cfg.qc = args.qc;
    cfg.pattern = parse_nm_flag(args.nm);
    cfg.dma_bits = args.dma_bits;
    cfg.weight_bits = args.weight_bits;
    cfg.act_bits = args.act_bits;
    cfg.l1_kb = args.l1_kb;
    cfg.l2_kb = args.l2_kb;
    cfg.weight_zero_frac = args.wz;
    cfg.act_zero_frac = args.az;
    return cfg;
}

int cmd_simulate(const SimArgs& args) {
    const AccelConfig base = base_config_from(args);
    std::vector<HwSetting> settings;
    if (args.setting == "all") {
        settings.assign(kAllSettings.begin(), kAllSettings.end());
    } else {
        bool found = false;
        for (HwSetting s : kAllSettings)
            if (args.setting == setting_name(s)) {
                settings.push_back(s);
                found = true;
            }
        if (!found) fail(Errc::ConfigInvalid, "unknown setting '" + args.setting + "'");
    }
    const auto layers = read_layer_table(args.layers);

    fs::create_directories(args.out);
    std::ofstream access(fs::path(args.out) / "access.csv");
    std::ofstream energy(fs::path(args.out) / "energy.csv");
    std::ofstream roof(fs::path(args.out) / "roofline.csv");
    std::ofstream report(fs::path(args.out) / "report.txt");
    access << "setting,layer";
    energy << "setting,layer";
    for (const char* name : kLevelNames) {
        access << "," << name;
        energy << "," << name;
    }
    access << "\n";
    energy << ",total,data_access\n";
    roof << "setting,layer,peak,load_limited,attainable,fraction,cycles,bound,bits_per_weight\n";

    for (HwSetting s : settings) {
        const AccelConfig cfg = make_setting_config(s, base);
        AccessCounts total;
        for (const auto& layer : layers) {
            const AccessCounts c = ews_access_counts(layer, cfg);
            const SimReport rep = energy_report(c);
            access << setting_name(s) << "," << layer.name;
            energy << setting_name(s) << "," << layer.name;
            for (int lv = 0; lv < kLevelCount; ++lv) {
                access << "," << rep.level_counts[lv];
                energy << "," << rep.level_energy[lv];
            }
            access << "\n";
            energy << "," << rep.total_energy << "," << rep.data_access_energy << "\n";

            const RooflineResult rl = roofline(layer, cfg);
            roof << setting_name(s) << "," << layer.name << "," << rl.peak_macs_per_cycle << ","
                 << rl.load_limited_macs_per_cycle << "," << rl.attainable_macs_per_cycle << ","
                 << rl.attainable_fraction << "," << rl.cycles << ","
                 << (rl.bound == RooflineBound::Compute ? "compute" : "weight-load") << ","
                 << rl.bits_per_weight << "\n";
            total += c;
        }

        const SimReport sum = energy_report(total);
        report << "setting " << setting_name(s) << "\n";
        report << "  total energy " << sum.total_energy << "  data-access "
               << sum.data_access_energy << "\n";
        for (int lv = 0; lv < kLevelCount; ++lv)
            report << "  " << std::left << std::setw(5) << kLevelNames[lv] << std::right
                   << std::setw(16) << sum.level_counts[lv] << " accesses  " << std::setw(16)
                   << sum.level_energy[lv] << " energy  " << std::setw(7) << std::setprecision(3)
                   << sum.level_percent[lv] << "%\n";
        if (!layers.empty()) {
            const RooflineResult rl = aggregate_roofline(layers, cfg);
            report << "  roofline: attainable " << rl.attainable_macs_per_cycle << "/"
                   << rl.peak_macs_per_cycle << " MACs/cycle, "
                   << (rl.bound == RooflineBound::Compute ? "compute" : "weight-load")
                   << " bound, " << rl.bits_per_weight << " bits/weight\n";
        }
        if (cfg.compression == Compression::CMS) {
            const TileResources res = sparse_tile_resources(cfg.array_h, cfg.subvec_d,
                                                            cfg.pattern, cfg.weight_bits);
            report << "  sparse tile (HxD " << cfg.array_h << "x" << cfg.subvec_d
                   << "): multipliers " << res.sparse.multipliers << " vs "
                   << res.dense.multipliers << ", RF bits " << res.sparse.rf_bits << " vs "
                   << res.dense.rf_bits << ", LZC " << res.sparse.lzc << "\n";
        }
        report << "\n";
        std::cout << "setting " << std::left << std::setw(8) << setting_name(s) << std::right
                  << " total energy " << std::setw(14) << sum.total_energy << "  data-access "
                  << std::setw(14) << sum.data_access_energy << "\n";
    }
    std::cout << "reports written to " << args.out << "\n";
    return kExitOk;
}

struct StatsArgs {
    std::string model;
    std::string ref;
};

int cmd_stats(const StatsArgs& args) {
    const auto bytes = read_file_bytes(args.model);
    const auto layers = deserialize(bytes);

    std::vector<NamedTensor> refs;
    if (!args.ref.empty()) {
        for (const auto& job : read_compress_config(args.ref)) {
            if (!job.include) continue;
            refs.push_back(read_tensor_manifest(job.manifest));
        }
        if (refs.size() != layers.size())
            fail(Errc::DimensionMismatch, "reference layer count does not match container");
    }

    uint64_t raw = 0, payload = 0;
    std::cout << "layer  shape              d    k    N:M   qc  sparsity  payload-bits   CR\n";
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const PayloadBits bits = payload_bits(l);
        const CompressionReport rep =
            compression_ratio(l.ng(), l.d, l.k, {l.n, l.m}, l.qc, 32);
        raw += uint64_t(l.ng()) * l.d * 32;
        payload += bits.total();
        std::cout << std::left << std::setw(7) << i << std::setw(19)
                  << (std::to_string(l.shape.cout) + "x" + std::to_string(l.shape.cin) + "x" +
                      std::to_string(l.shape.kh) + "x" + std::to_string(l.shape.kw))
                  << std::setw(5) << l.d << std::setw(5) << l.k << std::setw(6)
                  << (std::to_string(l.n) + ":" + std::to_string(l.m)) << std::setw(4)
                  << int(l.qc) << std::setw(10) << std::setprecision(3) << l.sparsity()
                  << std::setw(14) << bits.total() << std::setprecision(4) << rep.cr;
        if (!refs.empty()) {
            const SparseGroupedMatrix decoded = decompress_grouped(l);
            const GroupedMatrix ref = group_weights(refs[i].tensor, l.d);
            const SseReport s = sse(ref.values, decoded.grouped.values, &decoded.mask);
            std::cout << "  total-SSE " << std::setprecision(6) << s.total_sse << " mask-SSE "
                      << s.mask_sse;
        }
        std::cout << "\n";
    }
    if (payload)
        std::cout << "aggregate CR " << std::setprecision(4) << double(raw) / double(payload)
                  << "\n";
    return kExitOk;
}

struct ReconstructArgs {
    std::string model;
    std::string out = "reconstructed";
};

int cmd_reconstruct(const ReconstructArgs& args) {
    const auto layers = deserialize(read_file_bytes(args.model));
    fs::create_directories(args.out);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "layer%03zu", i);
        const WeightTensor w = decompress(layers[i]);
        write_tensor_manifest(fs::path(args.out) / (std::string(name) + ".tensor"),
                              NamedTensor{name, w});
    }
    std::cout << "wrote " << layers.size() << " tensors to " << args.out << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked vector quantization toolkit"};
    app.require_subcommand(1);

    CompressArgs cargs;
    auto* compress = app.add_subcommand("compress", "prune + cluster + quantize + pack weights");
    compress->add_option("--layers", cargs.layers, "layer config file")->required();
    compress->add_option("--out", cargs.out, "output container path");
    compress->add_option("--d", cargs.d, "subvector length");
    compress->add_option("--k", cargs.k, "codewords per codebook");
    compress->add_option("--nm", cargs.nm, "N:M sparsity pattern");
    compress->add_option("--qc", cargs.qc, "codebook bits");
    compress->add_option("--bf", cargs.bf, "uncompressed weight bits for CR");
    compress->add_option("--seed", cargs.seed, "clustering seed");
    compress->add_option("--mode", cargs.mode, "masked|common")
        ->check(CLI::IsMember({"masked", "common"}));
    compress->add_option("--scope", cargs.scope, "layerwise|crosslayer")
        ->check(CLI::IsMember({"layerwise", "crosslayer"}));
    compress->add_option("--scale", cargs.scale, "absmax|grid")
        ->check(CLI::IsMember({"absmax", "grid"}));
    compress->add_option("--max-iters", cargs.max_iters, "k-means iteration cap");
    compress->add_option("--threshold", cargs.threshold, "convergence fraction");

    AblateArgs aargs;
    auto* ablate = app.add_subcommand("ablate", "four-case clustering comparison");
    ablate->add_option("--input", aargs.input, "tensor manifest")->required();
    ablate->add_option("--ab-k", aargs.ab_k, "codewords for cases A/B");
    ablate->add_option("--ab-d", aargs.ab_d, "subvector length for cases A/B");
    ablate->add_option("--cd-k", aargs.cd_k, "codewords for cases C/D");
    ablate->add_option("--cd-d", aargs.cd_d, "subvector length for cases C/D");
    ablate->add_option("--nm", aargs.nm, "N:M sparsity pattern");
    ablate->add_option("--seed", aargs.seed, "clustering seed");

    SimArgs sargs;
    auto* simulate = app.add_subcommand("simulate", "analytical accelerator model");
    simulate->add_option("--layers", sargs.layers, "layer table")->required();
    simulate->add_option("--out", sargs.out, "report directory");
    simulate->add_option("--setting", sargs.setting,
                         "all|ws|ws-cms|ews|ews-c|ews-cm|ews-cms");
    simulate->add_option("--array", sargs.array, "array size HxL");
    simulate->add_option("--ews", sargs.ews, "EWS extensions A,B,D");
    simulate->add_option("--nm", sargs.nm, "N:M sparsity pattern");
    simulate->add_option("--k", sargs.k, "codebook entries");
    simulate->add_option("--d", sargs.d, "subvector length");
    simulate->add_option("--qc", sargs.qc, "codebook bits");
    simulate->add_option("--dma-bits", sargs.dma_bits, "DMA width (bits/cycle)");
    simulate->add_option("--weight-bits", sargs.weight_bits, "weight word width");
    simulate->add_option("--act-bits", sargs.act_bits, "activation word width");
    simulate->add_option("--l1-kb", sargs.l1_kb, "L1 capacity");
    simulate->add_option("--l2-kb", sargs.l2_kb, "L2 capacity");
    simulate->add_option("--wz", sargs.wz, "weight zero fraction for gating");
    simulate->add_option("--az", sargs.az, "activation zero fraction for gating");

    StatsArgs stargs;
    auto* stats = app.add_subcommand("stats", "inspect a container");
    stats->add_option("--model", stargs.model, "container path")->required();
    stats->add_option("--ref", stargs.ref, "layer config with reference tensors");

    ReconstructArgs rargs;
    auto* reconstruct = app.add_subcommand("reconstruct", "decode a container to tensors");
    reconstruct->add_option("--model", rargs.model, "container path")->required();
    reconstruct->add_option("--out", rargs.out, "output directory");

    try {
        app.parse(argc, argv);
        if (*compress) return cmd_compress(cargs);
        if (*ablate) return cmd_ablate(aargs);
        if (*simulate) return cmd_simulate(sargs);
        if (*stats) return cmd_stats(stargs);
        if (*reconstruct) return cmd_reconstruct(rargs);
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

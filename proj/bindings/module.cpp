#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mvq/accel.hpp"
#include "mvq/finetune.hpp"
#include "mvq/pipeline.hpp"

namespace py = pybind11;
using namespace mvq;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-D array");
    Matrix m(std::size_t(arr.shape(0)), std::size_t(arr.shape(1)));
    std::copy_n(arr.data(), m.data.size(), m.data.begin());
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> arr({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

BitmaskMatrix to_mask(const MaskArray& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-D mask");
    BitmaskMatrix m(std::size_t(arr.shape(0)), std::size_t(arr.shape(1)));
    std::copy_n(arr.data(), m.bits.size(), m.bits.begin());
    return m;
}

py::array_t<uint8_t> from_mask(const BitmaskMatrix& m) {
    py::array_t<uint8_t> arr({m.rows, m.cols});
    std::copy(m.bits.begin(), m.bits.end(), arr.mutable_data());
    return arr;
}

WeightTensor to_tensor(const DoubleArray& arr) {
    if (arr.ndim() != 4) throw py::value_error("expected a 4-D weight array");
    TensorShape shape{uint32_t(arr.shape(0)), uint32_t(arr.shape(1)), uint32_t(arr.shape(2)),
                      uint32_t(arr.shape(3))};
    std::vector<double> data(arr.data(), arr.data() + shape.count());
    return make_weight_tensor(shape, std::move(data));
}

py::array_t<double> from_tensor(const WeightTensor& w) {
    py::array_t<double> arr({std::size_t(w.shape.cout), std::size_t(w.shape.cin),
                             std::size_t(w.shape.kh), std::size_t(w.shape.kw)});
    std::copy(w.data.begin(), w.data.end(), arr.mutable_data());
    return arr;
}

Codebook to_codebook(const DoubleArray& arr) {
    const Matrix m = to_matrix(arr);
    Codebook cb(m.rows, m.cols);
    cb.data = m.data;
    return cb;
}

py::array_t<double> from_codebook(const Codebook& cb) {
    py::array_t<double> arr({cb.k, cb.d});
    std::copy(cb.data.begin(), cb.data.end(), arr.mutable_data());
    return arr;
}

py::dict stats_dict(const ClusterRunStats& stats) {
    py::dict d;
    d["iterations"] = stats.iterations;
    d["masked_sse"] = stats.masked_sse;
    d["changed"] = stats.changed;
    d["seed"] = stats.seed;
    return d;
}

py::dict report_dict(const SimReport& rep) {
    py::dict levels;
    for (int lv = 0; lv < kLevelCount; ++lv) {
        py::dict entry;
        entry["count"] = rep.level_counts[lv];
        entry["energy"] = rep.level_energy[lv];
        entry["percent"] = rep.level_percent[lv];
        levels[kLevelNames[lv]] = entry;
    }
    py::dict d;
    d["levels"] = levels;
    d["total_energy"] = rep.total_energy;
    d["data_access_energy"] = rep.data_access_energy;
    return d;
}

NmPattern pattern_from(uint32_t n, uint32_t m) { return make_pattern(n, m); }

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "masked vector quantization toolkit";
    m.attr("__version__") = "0.1.0";

    py::register_exception<Error>(m, "MvqError");

    // --- tensor grouping -------------------------------------------------
    m.def(
        "group_weights",
        [](const DoubleArray& w, uint32_t d) { return from_matrix(group_weights(to_tensor(w), d).values); },
        py::arg("weights"), py::arg("d"),
        "Reshape 4-D weights to the (Cout/d * Cin * Kh * Kw) x d subvector matrix.");
    m.def(
        "ungroup_weights",
        [](const DoubleArray& rows, std::array<uint32_t, 4> shape, uint32_t d) {
            GroupedMatrix g;
            g.values = to_matrix(rows);
            g.layout = GroupLayout{TensorShape{shape[0], shape[1], shape[2], shape[3]}, d};
            return from_tensor(ungroup_weights(g));
        },
        py::arg("rows"), py::arg("shape"), py::arg("d"));
    m.def(
        "sse",
        [](const DoubleArray& a, const DoubleArray& b, py::object mask) {
            const Matrix ma = to_matrix(a), mb = to_matrix(b);
            if (mask.is_none()) {
                const SseReport rep = sse(ma, mb);
                return py::make_tuple(rep.total_sse, rep.mask_sse);
            }
            const BitmaskMatrix bm = to_mask(mask.cast<MaskArray>());
            const SseReport rep = sse(ma, mb, &bm);
            return py::make_tuple(rep.total_sse, rep.mask_sse);
        },
        py::arg("original"), py::arg("reconstructed"), py::arg("mask") = py::none());

    // --- sparsity ----------------------------------------------------------
    m.def(
        "prune_nm",
        [](const DoubleArray& rows, uint32_t n, uint32_t m_group) {
            GroupedMatrix g;
            g.values = to_matrix(rows);
            g.layout = GroupLayout{{uint32_t(g.values.cols), uint32_t(g.values.rows), 1, 1},
                                   uint32_t(g.values.cols)};
            const SparseGroupedMatrix s = prune_nm(g, pattern_from(n, m_group));
            return py::make_tuple(from_matrix(s.grouped.values), from_mask(s.mask));
        },
        py::arg("rows"), py::arg("n"), py::arg("m"),
        "Keep the N largest magnitudes per aligned M-chunk; returns (values, mask).");
    m.def(
        "mask_to_lut_ids",
        [](const MaskArray& mask, uint32_t n, uint32_t m_group) {
            if (mask.ndim() != 1 && mask.ndim() != 2)
                throw py::value_error("expected a 1-D or 2-D mask");
            const std::size_t rows = mask.ndim() == 2 ? std::size_t(mask.shape(0)) : 1;
            const std::size_t cols = std::size_t(mask.shape(mask.ndim() - 1));
            std::vector<std::vector<uint32_t>> out;
            out.reserve(rows);
            for (std::size_t r = 0; r < rows; ++r)
                out.push_back(mask_to_lut_ids({mask.data() + r * cols, cols},
                                              pattern_from(n, m_group)));
            return out;
        },
        py::arg("mask"), py::arg("n"), py::arg("m"));
    m.def(
        "lut_ids_to_mask",
        [](const std::vector<uint32_t>& ids, uint32_t n, uint32_t m_group, uint32_t d) {
            return lut_ids_to_mask(ids, pattern_from(n, m_group), d);
        },
        py::arg("ids"), py::arg("n"), py::arg("m"), py::arg("d"));

    // --- clustering ----------------------------------------------------------
    m.def(
        "kmeans_init",
        [](const DoubleArray& rows, std::size_t k, uint64_t seed) {
            return from_codebook(kmeans_init(to_matrix(rows), k, seed));
        },
        py::arg("rows"), py::arg("k"), py::arg("seed") = 42);
    m.def(
        "masked_assign",
        [](const DoubleArray& rows, const MaskArray& mask, const DoubleArray& codebook) {
            return masked_assign(to_matrix(rows), to_mask(mask), to_codebook(codebook));
        },
        py::arg("rows"), py::arg("mask"), py::arg("codebook"));
    m.def(
        "masked_update",
        [](const DoubleArray& rows, const MaskArray& mask, const Assignments& assign,
           const DoubleArray& previous) {
            return from_codebook(
                masked_update(to_matrix(rows), to_mask(mask), assign, to_codebook(previous)));
        },
        py::arg("rows"), py::arg("mask"), py::arg("assignments"), py::arg("previous"));
    m.def(
        "run_masked_kmeans",
        [](const DoubleArray& rows, const MaskArray& mask, std::size_t k, uint64_t seed,
           std::size_t max_iters, double threshold) {
            KMeansOptions opts{max_iters, threshold};
            const KMeansResult res = run_masked_kmeans(to_matrix(rows), to_mask(mask), k, seed, opts);
            return py::make_tuple(from_codebook(res.codebook), res.assignments,
                                  stats_dict(res.stats));
        },
        py::arg("rows"), py::arg("mask"), py::arg("k"), py::arg("seed") = 42,
        py::arg("max_iters") = 100, py::arg("threshold") = 0.001,
        "Masked k-means; returns (codebook, assignments, stats).");
    m.def(
        "run_common_kmeans",
        [](const DoubleArray& rows, std::size_t k, uint64_t seed, std::size_t max_iters,
           double threshold) {
            KMeansOptions opts{max_iters, threshold};
            const KMeansResult res = run_common_kmeans(to_matrix(rows), k, seed, opts);
            return py::make_tuple(from_codebook(res.codebook), res.assignments,
                                  stats_dict(res.stats));
        },
        py::arg("rows"), py::arg("k"), py::arg("seed") = 42, py::arg("max_iters") = 100,
        py::arg("threshold") = 0.001);

    // --- quantization -----------------------------------------------------------
    m.def(
        "quantize_codebook",
        [](const DoubleArray& cb, uint32_t qb, const std::string& mode) {
            const QuantizedCodebook qc = quantize_codebook(
                to_codebook(cb), qb, mode == "grid" ? ScaleMode::GridSearch : ScaleMode::AbsMax);
            py::array_t<int32_t> q({qc.k, qc.d});
            std::copy(qc.q.begin(), qc.q.end(), q.mutable_data());
            py::dict d;
            d["q"] = q;
            d["scale"] = qc.scale;
            d["qb"] = qc.qb;
            return d;
        },
        py::arg("codebook"), py::arg("qb") = 8, py::arg("mode") = "absmax");

    // --- fine-tuning ---------------------------------------------------------------
    m.def(
        "reconstruct",
        [](const DoubleArray& codebook, const Assignments& assign, const MaskArray& mask) {
            return from_matrix(reconstruct_for_forward(to_codebook(codebook), assign, to_mask(mask)));
        },
        py::arg("codebook"), py::arg("assignments"), py::arg("mask"));
    m.def(
        "aggregate_codeword_grads",
        [](const DoubleArray& grads, const Assignments& assign, const MaskArray& mask,
           std::size_t k) {
            return from_matrix(aggregate_codeword_grads(to_matrix(grads), assign, to_mask(mask), k));
        },
        py::arg("weight_grads"), py::arg("assignments"), py::arg("mask"), py::arg("k"));

    // --- codec -------------------------------------------------------------------------
    m.def(
        "compression_ratio",
        [](uint64_t ng, uint32_t d, uint32_t k, uint32_t n, uint32_t m_group, uint32_t qc,
           uint32_t b_f) {
            const CompressionReport rep = compression_ratio(ng, d, k, {n, m_group}, qc, b_f);
            py::dict out;
            out["b_a"] = rep.bits.b_a;
            out["b_m"] = rep.bits.b_m;
            out["b_c"] = rep.bits.b_c;
            out["cr"] = rep.cr;
            out["dense_flops"] = rep.dense_flops;
            out["sparse_flops"] = rep.sparse_flops;
            return out;
        },
        py::arg("ng"), py::arg("d"), py::arg("k"), py::arg("n"), py::arg("m"), py::arg("qc") = 8,
        py::arg("b_f") = 32);
    m.def(
        "compress_tensor",
        [](const DoubleArray& w, uint32_t d, uint32_t k, uint32_t n, uint32_t m_group, uint32_t qc,
           uint64_t seed, const std::string& mode) {
            const NamedTensor tensor{"w", to_tensor(w)};
            LayerSettings settings;
            settings.d = d;
            settings.k = k;
            settings.pattern = pattern_from(n, m_group);
            settings.qc = qc;
            CompressOptions opts;
            opts.seed = seed;
            opts.mode = mode == "common" ? ClusterMode::Common : ClusterMode::Masked;
            const ModelCompressionResult res =
                compress_model({&tensor, 1}, {&settings, 1}, opts);
            const auto bytes = serialize(std::vector<CompressedLayer>{res.layers[0].layer});
            py::dict rep;
            rep["cr"] = res.layers[0].report.cr;
            rep["cluster_sse"] = res.layers[0].cluster_mask_sse;
            rep["recon_sse"] = res.layers[0].recon_sse.mask_sse;
            rep["iterations"] = res.layers[0].stats.iterations;
            rep["payload_bits"] = res.layers[0].report.bits.total();
            return py::make_tuple(py::bytes(reinterpret_cast<const char*>(bytes.data()),
                                            py::ssize_t(bytes.size())),
                                  rep);
        },
        py::arg("weights"), py::arg("d") = 16, py::arg("k") = 512, py::arg("n") = 4,
        py::arg("m") = 16, py::arg("qc") = 8, py::arg("seed") = 42, py::arg("mode") = "masked",
        "Full pipeline on one tensor; returns (container bytes, report dict).");
    m.def(
        "decompress_model",
        [](const py::bytes& blob) {
            const std::string_view view = blob;
            const std::vector<CompressedLayer> layers = deserialize(
                {reinterpret_cast<const uint8_t*>(view.data()), view.size()});
            std::vector<py::array_t<double>> out;
            out.reserve(layers.size());
            for (const auto& l : layers) out.push_back(from_tensor(decompress(l)));
            return out;
        },
        py::arg("container"));

    // --- accelerator model ------------------------------------------------------------------
    py::enum_<Dataflow>(m, "Dataflow").value("WS", Dataflow::WS).value("EWS", Dataflow::EWS);
    py::enum_<Compression>(m, "Compression")
        .value("BASE", Compression::Base)
        .value("C", Compression::C)
        .value("CM", Compression::CM)
        .value("CMS", Compression::CMS);

    py::class_<LayerSpec>(m, "LayerSpec")
        .def(py::init([](std::string name, uint32_t cout, uint32_t cin, uint32_t kh, uint32_t kw,
                         uint32_t oh, uint32_t ow) {
                 return LayerSpec{std::move(name), cout, cin, kh, kw, oh, ow};
             }),
             py::arg("name"), py::arg("cout"), py::arg("cin"), py::arg("kh"), py::arg("kw"),
             py::arg("oh"), py::arg("ow"))
        .def_readwrite("name", &LayerSpec::name)
        .def("macs", &LayerSpec::macs)
        .def("weight_count", &LayerSpec::weight_count);

    py::class_<AccelConfig>(m, "AccelConfig")
        .def(py::init<>())
        .def_readwrite("array_h", &AccelConfig::array_h)
        .def_readwrite("array_l", &AccelConfig::array_l)
        .def_readwrite("ext_a", &AccelConfig::ext_a)
        .def_readwrite("ext_b", &AccelConfig::ext_b)
        .def_readwrite("ext_d", &AccelConfig::ext_d)
        .def_readwrite("dataflow", &AccelConfig::dataflow)
        .def_readwrite("compression", &AccelConfig::compression)
        .def_readwrite("subvec_d", &AccelConfig::subvec_d)
        .def_readwrite("k", &AccelConfig::k)
        .def_readwrite("qc", &AccelConfig::qc)
        .def_readwrite("weight_bits", &AccelConfig::weight_bits)
        .def_readwrite("act_bits", &AccelConfig::act_bits)
        .def_readwrite("dma_bits", &AccelConfig::dma_bits)
        .def_readwrite("l1_kb", &AccelConfig::l1_kb)
        .def_readwrite("l2_kb", &AccelConfig::l2_kb)
        .def_readwrite("weight_zero_frac", &AccelConfig::weight_zero_frac)
        .def_readwrite("act_zero_frac", &AccelConfig::act_zero_frac)
        .def_property(
            "pattern",
            [](const AccelConfig& c) { return py::make_tuple(c.pattern.n_keep, c.pattern.m_group); },
            [](AccelConfig& c, std::pair<uint32_t, uint32_t> nm) {
                c.pattern = NmPattern{nm.first, nm.second};
            });

    m.def("make_setting_config",
          [](const std::string& name, const AccelConfig& base) {
              for (HwSetting s : kAllSettings)
                  if (name == setting_name(s)) return make_setting_config(s, base);
              throw py::value_error("unknown setting '" + name + "'");
          },
          py::arg("setting"), py::arg("base") = AccelConfig{});
    m.def(
        "simulate_layer",
        [](const LayerSpec& layer, const AccelConfig& cfg) {
            const AccessCounts counts = ews_access_counts(layer, cfg);
            py::dict d = report_dict(energy_report(counts));
            d["weight_stream_bits"] = counts.weight_stream_bits;
            d["codebook_bits"] = counts.codebook_bits;
            d["l1_ifmap_reads"] = counts.l1_ifmap_reads;
            d["l1_psum_accesses"] = counts.l1_psum_accesses;
            d["mac_ops"] = counts.mac_ops;
            return d;
        },
        py::arg("layer"), py::arg("config"));
    m.def(
        "roofline",
        [](const LayerSpec& layer, const AccelConfig& cfg) {
            const RooflineResult r = roofline(layer, cfg);
            py::dict d;
            d["peak_macs_per_cycle"] = r.peak_macs_per_cycle;
            d["load_limited_macs_per_cycle"] = r.load_limited_macs_per_cycle;
            d["attainable_macs_per_cycle"] = r.attainable_macs_per_cycle;
            d["attainable_fraction"] = r.attainable_fraction;
            d["cycles"] = r.cycles;
            d["bits_per_weight"] = r.bits_per_weight;
            d["bound"] = r.bound == RooflineBound::Compute ? "compute" : "weight-load";
            return d;
        },
        py::arg("layer"), py::arg("config"));
    m.def(
        "sparse_tile_resources",
        [](uint32_t h, uint32_t d, uint32_t n, uint32_t m_group, uint32_t weight_bits,
           uint32_t psum_bits, uint32_t wrf_depth) {
            const TileResources res =
                sparse_tile_resources(h, d, {n, m_group}, weight_bits, psum_bits, wrf_depth);
            auto column = [](const TileResourceColumn& c) {
                py::dict d;
                d["multipliers"] = c.multipliers;
                d["adders"] = c.adders;
                d["rf_bits"] = c.rf_bits;
                d["lzc"] = c.lzc;
                d["demux"] = c.demux;
                d["mux"] = c.mux;
                d["parallelism"] = c.parallelism;
                return d;
            };
            py::dict out;
            out["dense"] = column(res.dense);
            out["sparse"] = column(res.sparse);
            out["q"] = res.q;
            return out;
        },
        py::arg("h"), py::arg("d"), py::arg("n"), py::arg("m"), py::arg("weight_bits") = 8,
        py::arg("psum_bits") = 24, py::arg("wrf_depth") = 16);
    m.def(
        "lzc_encode_mask",
        [](const std::vector<uint8_t>& mask, uint32_t q) { return lzc_encode_mask(mask, q); },
        py::arg("mask"), py::arg("q"));
    m.def("zero_gating_savings", &zero_gating_savings, py::arg("weight_zero_fraction"),
          py::arg("act_zero_fraction"));
}

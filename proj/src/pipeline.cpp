#include "mvq/pipeline.hpp"

#include <algorithm>
#include <string>

#include "mvq/finetune.hpp"

namespace mvq {

namespace {

CompressedLayer build_layer(const TensorShape& shape, const LayerSettings& s,
                            const QuantizedCodebook& qcb, const Assignments& assign,
                            const BitmaskMatrix& mask) {
    if (s.k > 0xFFFF || s.d > 0xFFFF)
        fail(Errc::ConfigInvalid, "d and k must fit in 16 bits for the container");
    CompressedLayer layer;
    layer.shape = shape;
    layer.d = uint16_t(s.d);
    layer.k = uint16_t(s.k);
    layer.n = uint16_t(s.pattern.n_keep);
    layer.m = uint16_t(s.pattern.m_group);
    layer.qc = uint8_t(s.qc);
    layer.scale = float(qcb.scale);
    layer.codebook = qcb.q;
    layer.assignments = assign;

    const MaskLut lut(s.pattern);
    layer.mask_ids.reserve(mask.rows * (s.d / s.pattern.m_group));
    for (std::size_t j = 0; j < mask.rows; ++j) {
        auto row = mask.row(j);
        for (uint32_t c = 0; c < s.d / s.pattern.m_group; ++c)
            layer.mask_ids.push_back(lut.encode(row.subspan(c * s.pattern.m_group, s.pattern.m_group)));
    }
    return layer;
}

LayerCompressionResult finish_layer(const std::string& name, const LayerSettings& s,
                                    const SparseGroupedMatrix& sparse,
                                    const QuantizedCodebook& qcb, const Assignments& assign,
                                    ClusterRunStats stats, double cluster_sse, uint32_t b_f) {
    LayerCompressionResult res;
    res.name = name;
    res.layer = build_layer(sparse.grouped.layout.shape, s, qcb, assign, sparse.mask);
    res.stats = std::move(stats);
    res.cluster_mask_sse = cluster_sse;

    const SparseGroupedMatrix decoded = decompress_grouped(res.layer);
    res.recon_sse = sse(sparse.grouped.values, decoded.grouped.values, &sparse.mask);
    res.report = compression_ratio(sparse.grouped.values.rows, s.d, s.k, s.pattern, s.qc, b_f);
    return res;
}

} // namespace

ModelCompressionResult compress_model(std::span<const NamedTensor> tensors,
                                      std::span<const LayerSettings> settings,
                                      const CompressOptions& opts) {
    if (tensors.size() != settings.size())
        fail(Errc::ConfigInvalid, "one LayerSettings per tensor required");

    ModelCompressionResult model;
    if (tensors.empty()) return model;

    if (opts.scope == CodebookScope::CrossLayer) {
        for (const auto& s : settings)
            if (s.d != settings[0].d || s.k != settings[0].k || s.qc != settings[0].qc ||
                !(s.pattern == settings[0].pattern))
                fail(Errc::ConfigInvalid, "cross-layer codebooks require uniform layer settings");
    }

    std::vector<SparseGroupedMatrix> sparse;
    sparse.reserve(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto& s = settings[i];
        GroupedMatrix grouped = group_weights(tensors[i].tensor, s.d);
        sparse.push_back(prune_nm(grouped, s.pattern));
    }

    if (opts.scope == CodebookScope::Layerwise) {
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            const auto& s = settings[i];
            const uint64_t seed = opts.seed + i;
            KMeansResult km =
                opts.mode == ClusterMode::Masked
                    ? run_masked_kmeans(sparse[i], s.k, seed, opts.kmeans)
                    : run_common_kmeans(sparse[i].grouped.values, s.k, seed, opts.kmeans);
            const double cluster_sse = masked_sse(sparse[i].grouped.values, &sparse[i].mask,
                                                  km.codebook, km.assignments);
            const QuantizedCodebook qcb = quantize_codebook(km.codebook, s.qc, opts.scale_mode);
            model.layers.push_back(finish_layer(tensors[i].name, s, sparse[i], qcb,
                                                km.assignments, std::move(km.stats), cluster_sse,
                                                opts.b_f));
        }
    } else {
        const auto& s = settings[0];
        Matrix all(0, s.d);
        BitmaskMatrix all_mask(0, s.d);
        std::vector<std::size_t> offsets;
        for (const auto& sp : sparse) {
            offsets.push_back(all.rows);
            all.data.insert(all.data.end(), sp.grouped.values.data.begin(),
                            sp.grouped.values.data.end());
            all_mask.bits.insert(all_mask.bits.end(), sp.mask.bits.begin(), sp.mask.bits.end());
            all.rows += sp.grouped.values.rows;
            all_mask.rows += sp.mask.rows;
        }
        all_mask.cols = s.d;

        KMeansResult km = opts.mode == ClusterMode::Masked
                              ? run_masked_kmeans(all, all_mask, s.k, opts.seed, opts.kmeans)
                              : run_common_kmeans(all, s.k, opts.seed, opts.kmeans);
        const QuantizedCodebook qcb = quantize_codebook(km.codebook, s.qc, opts.scale_mode);

        for (std::size_t i = 0; i < tensors.size(); ++i) {
            const std::size_t begin = offsets[i];
            const std::size_t rows = sparse[i].grouped.values.rows;
            Assignments assign(km.assignments.begin() + begin,
                               km.assignments.begin() + begin + rows);
            const double cluster_sse =
                masked_sse(sparse[i].grouped.values, &sparse[i].mask, km.codebook, assign);
            ClusterRunStats stats = km.stats; // the single shared run
            model.layers.push_back(finish_layer(tensors[i].name, s, sparse[i], qcb, assign,
                                                std::move(stats), cluster_sse, opts.b_f));
        }
    }

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& r = model.layers[i];
        model.total_raw_bits += uint64_t(r.layer.ng()) * r.layer.d * opts.b_f;
        model.total_payload_bits += r.report.bits.b_a + r.report.bits.b_m;
        if (opts.scope == CodebookScope::Layerwise || i == 0)
            model.total_payload_bits += r.report.bits.b_c;
    }
    model.aggregate_cr =
        model.total_payload_bits ? double(model.total_raw_bits) / model.total_payload_bits : 0.0;
    return model;
}

BitmaskMatrix regroup_mask(const BitmaskMatrix& mask, const GroupLayout& from, uint32_t to_d) {
    GroupedMatrix as_values;
    as_values.layout = from;
    as_values.values = Matrix(mask.rows, mask.cols);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        as_values.values.data[i] = mask.bits[i] ? 1.0 : 0.0;

    const GroupedMatrix regrouped = group_weights(ungroup_weights(as_values), to_d);
    BitmaskMatrix out(regrouped.values.rows, regrouped.values.cols);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = regrouped.values.data[i] > 0.5 ? 1 : 0;
    return out;
}

std::array<AblationCase, 4> run_ablation(const WeightTensor& w, const AblationOptions& opts) {
    // Prune once at the C/D grouping, then view the sparse tensor in the A/B
    // grouping too.
    const GroupedMatrix dense_cd = group_weights(w, opts.cd_d);
    const SparseGroupedMatrix pruned = prune_nm(dense_cd, opts.pattern);
    const WeightTensor sparse_tensor = ungroup_weights(pruned.grouped);

    const GroupedMatrix dense_ab = group_weights(w, opts.ab_d);
    const GroupedMatrix sparse_ab = group_weights(sparse_tensor, opts.ab_d);
    const BitmaskMatrix mask_ab = regroup_mask(pruned.mask, pruned.grouped.layout, opts.ab_d);

    const double flops_sparse = double(opts.pattern.n_keep) / opts.pattern.m_group;
    std::array<AblationCase, 4> cases;

    // A: dense weights, common k-means, dense reconstruction.
    {
        const KMeansResult km = run_common_kmeans(dense_ab.values, opts.ab_k, opts.seed, opts.kmeans);
        const Matrix recon = reconstruct_for_forward(
            km.codebook, km.assignments, BitmaskMatrix(dense_ab.values.rows, opts.ab_d, 1));
        const SseReport rep = sse(dense_ab.values, recon, &mask_ab);
        cases[0] = AblationCase{"A", rep.total_sse, rep.mask_sse, 1.0};
    }
    // B: sparse weights, common k-means, dense reconstruction.
    {
        const KMeansResult km = run_common_kmeans(sparse_ab.values, opts.ab_k, opts.seed, opts.kmeans);
        const Matrix recon = reconstruct_for_forward(
            km.codebook, km.assignments, BitmaskMatrix(sparse_ab.values.rows, opts.ab_d, 1));
        const SseReport rep = sse(sparse_ab.values, recon, &mask_ab);
        cases[1] = AblationCase{"B", rep.total_sse, rep.mask_sse, 1.0};
    }
    // C: sparse weights, common k-means, sparse reconstruction.
    {
        const KMeansResult km =
            run_common_kmeans(pruned.grouped.values, opts.cd_k, opts.seed, opts.kmeans);
        const Matrix recon = reconstruct_for_forward(km.codebook, km.assignments, pruned.mask);
        const SseReport rep = sse(pruned.grouped.values, recon, &pruned.mask);
        cases[2] = AblationCase{"C", rep.total_sse, rep.mask_sse, flops_sparse};
    }
    // D: sparse weights, masked k-means, sparse reconstruction (ours).
    {
        const KMeansResult km = run_masked_kmeans(pruned, opts.cd_k, opts.seed, opts.kmeans);
        const Matrix recon = reconstruct_for_forward(km.codebook, km.assignments, pruned.mask);
        const SseReport rep = sse(pruned.grouped.values, recon, &pruned.mask);
        cases[3] = AblationCase{"D", rep.total_sse, rep.mask_sse, flops_sparse};
    }
    return cases;
}

} // namespace mvq

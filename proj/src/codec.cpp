#include "mvq/codec.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "mvq/bitstream.hpp"
#include "mvq/finetune.hpp"

namespace mvq {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'Q', '1'};
constexpr uint8_t kVersion = 1;

class ByteWriter {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(uint8_t(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(uint8_t(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void raw(std::span<const uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
    std::vector<uint8_t> take() { return std::move(out_); }

private:
    std::vector<uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        auto b = take(2);
        return uint16_t(b[0]) | uint16_t(b[1]) << 8;
    }
    uint32_t u32() {
        auto b = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        auto b = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
        return v;
    }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::span<const uint8_t> take(std::size_t n) {
        if (pos_ + n > bytes_.size()) fail(Errc::TruncatedStream, "container ends prematurely");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void validate_layer(const CompressedLayer& l) {
    if (l.shape.cout == 0 || l.shape.cin == 0 || l.shape.kh == 0 || l.shape.kw == 0)
        fail(Errc::CorruptLengths, "layer shape has a zero dimension");
    if (l.d == 0 || l.k == 0) fail(Errc::CorruptLengths, "layer d/k must be positive");
    if (l.shape.cout % l.d != 0) fail(Errc::CorruptLengths, "Cout not a multiple of d");
    if (l.n == 0 || l.m <= l.n || l.d % l.m != 0)
        fail(Errc::CorruptLengths, "invalid N:M pattern in layer header");
    if (l.qc < 2 || l.qc > 16) fail(Errc::CorruptLengths, "invalid codebook bit width");
    if (l.codebook.size() != std::size_t(l.k) * l.d)
        fail(Errc::CorruptLengths, "codebook entry count mismatch");
    if (l.assignments.size() != l.ng()) fail(Errc::CorruptLengths, "assignment count mismatch");
    if (l.mask_ids.size() != l.ng() * l.chunks_per_row())
        fail(Errc::CorruptLengths, "mask id count mismatch");
}

} // namespace

PayloadBits payload_bits(uint64_t ng, uint32_t d, uint32_t k, NmPattern pattern, uint32_t qc) {
    PayloadBits bits;
    bits.b_a = uint64_t(bits_for_count(k)) * ng;
    bits.b_m = uint64_t(bits_for_count(binomial(pattern.m_group, pattern.n_keep))) *
               (ng * d / pattern.m_group);
    bits.b_c = uint64_t(k) * d * qc;
    return bits;
}

PayloadBits payload_bits(const CompressedLayer& layer) {
    return payload_bits(layer.ng(), layer.d, layer.k, NmPattern{layer.n, layer.m}, layer.qc);
}

CompressionReport compression_ratio(uint64_t ng, uint32_t d, uint32_t k, NmPattern pattern,
                                    uint32_t qc, uint32_t b_f) {
    if (ng == 0 || d == 0 || k == 0 || qc == 0 || b_f == 0)
        fail(Errc::ConfigInvalid, "compression_ratio: all parameters must be positive");
    CompressionReport rep;
    rep.bits = payload_bits(ng, d, k, pattern, qc);
    rep.cr = double(ng) * d * b_f / double(rep.bits.total());
    rep.dense_flops = 2.0 * double(ng) * d;
    rep.sparse_flops = rep.dense_flops * double(pattern.n_keep) / pattern.m_group;
    return rep;
}

std::vector<uint8_t> serialize(std::span<const CompressedLayer> layers) {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kMagic), 4));
    w.u8(kVersion);
    w.u32(uint32_t(layers.size()));

    for (const auto& l : layers) {
        validate_layer(l);
        w.u32(l.shape.cout);
        w.u32(l.shape.cin);
        w.u32(l.shape.kh);
        w.u32(l.shape.kw);
        w.u16(l.d);
        w.u16(l.k);
        w.u16(l.n);
        w.u16(l.m);
        w.u8(l.qc);
        w.f32(l.scale);

        const PayloadBits bits = payload_bits(l);

        BitWriter cbw;
        const uint32_t mask = (1u << l.qc) - 1u;
        for (int32_t v : l.codebook) cbw.write(uint64_t(uint32_t(v) & mask), l.qc);
        w.u64(bits.b_c);
        w.raw(cbw.bytes());

        BitWriter aw;
        const uint32_t abits = bits_for_count(l.k);
        for (uint32_t a : l.assignments) {
            if (a >= l.k) fail(Errc::IndexOutOfRange, "assignment index out of range");
            aw.write(a, abits);
        }
        w.u64(bits.b_a);
        w.raw(aw.bytes());

        const uint64_t lut_size = binomial(l.m, l.n);
        BitWriter mw;
        const uint32_t mbits = bits_for_count(lut_size);
        for (uint32_t id : l.mask_ids) {
            if (id >= lut_size) fail(Errc::IdOutOfRange, "mask id out of range");
            mw.write(id, mbits);
        }
        w.u64(bits.b_m);
        w.raw(mw.bytes());
    }
    return w.take();
}

std::vector<CompressedLayer> deserialize(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) fail(Errc::BadMagic, "not an MVQ1 container");
    if (r.u8() != kVersion) fail(Errc::BadMagic, "unsupported container version");

    const uint32_t count = r.u32();
    std::vector<CompressedLayer> layers;
    layers.reserve(count);
    for (uint32_t li = 0; li < count; ++li) {
        CompressedLayer l;
        l.shape.cout = r.u32();
        l.shape.cin = r.u32();
        l.shape.kh = r.u32();
        l.shape.kw = r.u32();
        l.d = r.u16();
        l.k = r.u16();
        l.n = r.u16();
        l.m = r.u16();
        l.qc = r.u8();
        l.scale = r.f32();

        if (l.shape.cout == 0 || l.shape.cin == 0 || l.shape.kh == 0 || l.shape.kw == 0 ||
            l.d == 0 || l.k == 0 || l.n == 0 || l.m <= l.n || l.d % l.m != 0 ||
            l.shape.cout % l.d != 0 || l.qc < 2 || l.qc > 16)
            fail(Errc::CorruptLengths, "invalid layer header");

        const PayloadBits expect = payload_bits(l.ng(), l.d, l.k, NmPattern{l.n, l.m}, l.qc);

        const uint64_t cb_bits = r.u64();
        if (cb_bits != expect.b_c) fail(Errc::CorruptLengths, "codebook bit length mismatch");
        {
            BitReader br(r.take((cb_bits + 7) / 8), cb_bits);
            l.codebook.resize(std::size_t(l.k) * l.d);
            for (auto& v : l.codebook) {
                uint32_t raw = uint32_t(br.read(l.qc));
                // sign-extend qc-bit two's complement
                if (raw & (1u << (l.qc - 1))) raw |= ~((1u << l.qc) - 1u);
                v = int32_t(raw);
            }
        }

        const uint64_t a_bits = r.u64();
        if (a_bits != expect.b_a) fail(Errc::CorruptLengths, "assignment bit length mismatch");
        {
            BitReader br(r.take((a_bits + 7) / 8), a_bits);
            const uint32_t abits = bits_for_count(l.k);
            l.assignments.resize(l.ng());
            for (auto& a : l.assignments) {
                a = uint32_t(br.read(abits));
                if (a >= l.k) fail(Errc::CorruptLengths, "assignment index exceeds k");
            }
        }

        const uint64_t m_bits = r.u64();
        if (m_bits != expect.b_m) fail(Errc::CorruptLengths, "mask bit length mismatch");
        {
            BitReader br(r.take((m_bits + 7) / 8), m_bits);
            const uint64_t lut_size = binomial(l.m, l.n);
            const uint32_t mbits = bits_for_count(lut_size);
            l.mask_ids.resize(l.ng() * l.chunks_per_row());
            for (auto& id : l.mask_ids) {
                id = uint32_t(br.read(mbits));
                if (id >= lut_size) fail(Errc::CorruptLengths, "mask id exceeds LUT size");
            }
        }
        layers.push_back(std::move(l));
    }
    if (!r.done()) fail(Errc::CorruptLengths, "trailing bytes after last layer");
    return layers;
}

SparseGroupedMatrix decompress_grouped(const CompressedLayer& layer) {
    validate_layer(layer);
    const NmPattern pattern{layer.n, layer.m};
    const MaskLut lut(pattern);

    const std::size_t ng = layer.ng();
    BitmaskMatrix mask(ng, layer.d);
    const std::size_t chunks = layer.chunks_per_row();
    for (std::size_t j = 0; j < ng; ++j) {
        auto row = mask.row(j);
        for (std::size_t c = 0; c < chunks; ++c)
            lut.decode(layer.mask_ids[j * chunks + c], row.subspan(c * layer.m, layer.m));
    }

    QuantizedCodebook qc;
    qc.k = layer.k;
    qc.d = layer.d;
    qc.qb = layer.qc;
    qc.scale = double(layer.scale);
    qc.q = layer.codebook;
    const Codebook cb = dequantize_codebook(qc);

    GroupedMatrix grouped;
    grouped.values = reconstruct_for_forward(cb, layer.assignments, mask);
    grouped.layout = GroupLayout{layer.shape, layer.d};
    return SparseGroupedMatrix{std::move(grouped), std::move(mask), pattern};
}

WeightTensor decompress(const CompressedLayer& layer) {
    return ungroup_weights(decompress_grouped(layer).grouped);
}

} // namespace mvq

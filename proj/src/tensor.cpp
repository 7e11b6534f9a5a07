#include "mvq/tensor.hpp"

#include <cmath>
#include <string>

namespace mvq {

WeightTensor make_weight_tensor(TensorShape shape, std::vector<double> data) {
    if (shape.cout == 0 || shape.cin == 0 || shape.kh == 0 || shape.kw == 0)
        fail(Errc::DimensionMismatch, "tensor shape must be positive");
    if (data.size() != shape.count())
        fail(Errc::DimensionMismatch,
             "data length " + std::to_string(data.size()) + " does not match shape count " +
                 std::to_string(shape.count()));
    for (double v : data)
        if (!std::isfinite(v)) fail(Errc::DimensionMismatch, "tensor contains non-finite value");
    return WeightTensor{shape, std::move(data)};
}

GroupedMatrix group_weights(const WeightTensor& w, uint32_t d) {
    if (d == 0) fail(Errc::CoutNotMultipleOfD, "d must be positive");
    if (w.shape.cout % d != 0)
        fail(Errc::CoutNotMultipleOfD, "Cout=" + std::to_string(w.shape.cout) +
                                           " is not a multiple of d=" + std::to_string(d));

    const auto& s = w.shape;
    GroupLayout layout{s, d};
    Matrix m(layout.num_rows(), d);

    const std::size_t plane = std::size_t(s.kh) * s.kw;
    const std::size_t per_channel = std::size_t(s.cin) * plane;
    std::size_t row = 0;
    for (uint32_t block = 0; block < s.cout / d; ++block) {
        for (std::size_t inner = 0; inner < per_channel; ++inner, ++row) {
            for (uint32_t t = 0; t < d; ++t) {
                const std::size_t channel = std::size_t(block) * d + t;
                m.at(row, t) = w.data[channel * per_channel + inner];
            }
        }
    }
    return GroupedMatrix{std::move(m), layout};
}

WeightTensor ungroup_weights(const GroupedMatrix& g) {
    const auto& s = g.layout.shape;
    const uint32_t d = g.layout.d;
    if (d == 0 || g.values.rows != g.layout.num_rows() || g.values.cols != d)
        fail(Errc::DimensionMismatch, "grouped matrix does not match its layout");

    WeightTensor w;
    w.shape = s;
    w.data.assign(s.count(), 0.0);

    const std::size_t per_channel = std::size_t(s.cin) * s.kh * s.kw;
    std::size_t row = 0;
    for (uint32_t block = 0; block < s.cout / d; ++block) {
        for (std::size_t inner = 0; inner < per_channel; ++inner, ++row) {
            for (uint32_t t = 0; t < d; ++t) {
                const std::size_t channel = std::size_t(block) * d + t;
                w.data[channel * per_channel + inner] = g.values.at(row, t);
            }
        }
    }
    return w;
}

SseReport sse(const Matrix& original, const Matrix& reconstructed, const BitmaskMatrix* mask) {
    if (original.rows != reconstructed.rows || original.cols != reconstructed.cols)
        fail(Errc::DimensionMismatch, "sse: matrix dimensions differ");
    if (mask && (mask->rows != original.rows || mask->cols != original.cols))
        fail(Errc::DimensionMismatch, "sse: mask dimensions differ");

    long double total = 0.0L;
    long double masked = 0.0L;
    const std::size_t n = original.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const long double diff = (long double)original.data[i] - reconstructed.data[i];
        const long double sq = diff * diff;
        total += sq;
        if (!mask || mask->bits[i]) masked += sq;
    }
    return SseReport{double(total), double(masked)};
}

} // namespace mvq

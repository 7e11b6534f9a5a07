#include "mvq/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mvq {

namespace {

void check_qb(uint32_t qb) {
    if (qb < 2 || qb > 16)
        fail(Errc::ConfigInvalid, "quantization bits must be in [2,16], got " + std::to_string(qb));
}

int32_t quantize_value(double v, double scale, int32_t lo, int32_t hi) {
    const double scaled = std::nearbyint(v / scale); // FE_TONEAREST: ties to even
    return int32_t(std::clamp(scaled, double(lo), double(hi)));
}

long double codebook_mse(const Codebook& cb, uint32_t qb, double scale) {
    const int32_t lo = -(int32_t(1) << (qb - 1));
    const int32_t hi = (int32_t(1) << (qb - 1)) - 1;
    long double acc = 0.0L;
    for (double v : cb.data) {
        const long double err = (long double)v - (long double)quantize_value(v, scale, lo, hi) * scale;
        acc += err * err;
    }
    return acc;
}

} // namespace

QuantizedCodebook quantize_codebook_with_scale(const Codebook& cb, uint32_t qb, double scale) {
    check_qb(qb);
    if (cb.k == 0 || cb.d == 0) fail(Errc::ConfigInvalid, "codebook is empty");
    if (!(scale > 0.0)) fail(Errc::ConfigInvalid, "scale must be positive");

    QuantizedCodebook out;
    out.k = cb.k;
    out.d = cb.d;
    out.qb = qb;
    out.scale = scale;
    out.q.resize(cb.data.size());
    const int32_t lo = out.min_code();
    const int32_t hi = out.max_code();
    for (std::size_t i = 0; i < cb.data.size(); ++i)
        out.q[i] = quantize_value(cb.data[i], scale, lo, hi);
    return out;
}

QuantizedCodebook quantize_codebook(const Codebook& cb, uint32_t qb, ScaleMode mode) {
    check_qb(qb);
    if (cb.k == 0 || cb.d == 0) fail(Errc::ConfigInvalid, "codebook is empty");

    double absmax = 0.0;
    for (double v : cb.data) absmax = std::max(absmax, std::fabs(v));
    if (absmax == 0.0) return quantize_codebook_with_scale(cb, qb, 1.0);

    const double absmax_scale = absmax / double((int32_t(1) << (qb - 1)) - 1);
    if (mode == ScaleMode::AbsMax) return quantize_codebook_with_scale(cb, qb, absmax_scale);

    // Grid search over fractions of the absmax scale; ties keep the larger
    // scale (less clamping).
    double best_scale = absmax_scale;
    long double best_mse = codebook_mse(cb, qb, absmax_scale);
    for (int i = 1; i < 128; ++i) {
        const double s = absmax_scale * double(i) / 128.0;
        const long double mse = codebook_mse(cb, qb, s);
        if (mse < best_mse) {
            best_mse = mse;
            best_scale = s;
        }
    }
    return quantize_codebook_with_scale(cb, qb, best_scale);
}

Codebook dequantize_codebook(const QuantizedCodebook& qc) {
    Codebook cb(qc.k, qc.d);
    for (std::size_t i = 0; i < qc.q.size(); ++i) cb.data[i] = double(qc.q[i]) * qc.scale;
    return cb;
}

} // namespace mvq

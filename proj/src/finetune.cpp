#include "mvq/finetune.hpp"

#include <string>

namespace mvq {

Matrix reconstruct_for_forward(const Codebook& cb, const Assignments& assign,
                               const BitmaskMatrix& mask) {
    if (cb.d != mask.cols) fail(Errc::DimensionMismatch, "codeword length != mask columns");
    if (assign.size() != mask.rows) fail(Errc::DimensionMismatch, "assignment count != mask rows");

    Matrix out(mask.rows, mask.cols);
    for (std::size_t j = 0; j < mask.rows; ++j) {
        const uint32_t i = assign[j];
        if (i >= cb.k)
            fail(Errc::IndexOutOfRange,
                 "assignment " + std::to_string(i) + " >= k=" + std::to_string(cb.k));
        const double* c = cb.data.data() + std::size_t(i) * cb.d;
        const uint8_t* bm = mask.bits.data() + j * mask.cols;
        double* o = out.data.data() + j * mask.cols;
        for (std::size_t t = 0; t < mask.cols; ++t) o[t] = bm[t] ? c[t] : 0.0;
    }
    return out;
}

Matrix aggregate_codeword_grads(const Matrix& weight_grads, const Assignments& assign,
                                const BitmaskMatrix& mask, std::size_t k) {
    if (weight_grads.rows != mask.rows || weight_grads.cols != mask.cols)
        fail(Errc::DimensionMismatch, "gradient geometry does not match mask");
    if (assign.size() != weight_grads.rows)
        fail(Errc::DimensionMismatch, "assignment count != gradient rows");

    const std::size_t d = weight_grads.cols;
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k * d, 0);
    for (std::size_t j = 0; j < weight_grads.rows; ++j) {
        const uint32_t i = assign[j];
        if (i >= k) fail(Errc::IndexOutOfRange, "assignment index out of range");
        const double* g = weight_grads.data.data() + j * d;
        const uint8_t* bm = mask.bits.data() + j * d;
        for (std::size_t t = 0; t < d; ++t) {
            if (!bm[t]) continue;
            sums.data[std::size_t(i) * d + t] += g[t];
            counts[std::size_t(i) * d + t] += 1;
        }
    }
    for (std::size_t p = 0; p < sums.data.size(); ++p)
        sums.data[p] = counts[p] ? sums.data[p] / double(counts[p]) : 0.0;
    return sums;
}

Codebook sgd_step(const Codebook& cb, const Matrix& grad, double lr, SgdState* state) {
    if (!(lr > 0.0)) fail(Errc::ConfigInvalid, "learning rate must be positive");
    if (grad.rows != cb.k || grad.cols != cb.d)
        fail(Errc::DimensionMismatch, "gradient geometry does not match codebook");

    Codebook out = cb;
    if (state && state->momentum != 0.0) {
        if (state->velocity.data.empty()) state->velocity = Matrix(cb.k, cb.d);
        if (state->velocity.rows != cb.k || state->velocity.cols != cb.d)
            fail(Errc::DimensionMismatch, "momentum state geometry does not match codebook");
        for (std::size_t p = 0; p < out.data.size(); ++p) {
            state->velocity.data[p] = state->momentum * state->velocity.data[p] + grad.data[p];
            out.data[p] -= lr * state->velocity.data[p];
        }
    } else {
        for (std::size_t p = 0; p < out.data.size(); ++p) out.data[p] -= lr * grad.data[p];
    }
    return out;
}

} // namespace mvq

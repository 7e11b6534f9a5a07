#pragma once

#include "mvq/clustering.hpp"

namespace mvq {

// Row j of the forward reconstruction: c[a_j] o bm_j.
Matrix reconstruct_for_forward(const Codebook& cb, const Assignments& assign,
                               const BitmaskMatrix& mask);

// Fold per-weight gradients into per-codeword gradients: the masked average
// of the gradients of the subvectors assigned to each codeword, coordinate
// by coordinate. Zero-coverage coordinates (and unassigned codewords) get 0.
Matrix aggregate_codeword_grads(const Matrix& weight_grads, const Assignments& assign,
                                const BitmaskMatrix& mask, std::size_t k);

struct SgdState {
    double momentum = 0.0;
    Matrix velocity; // lazily sized to k x d on first step
};

// c <- c - lr * v where v = momentum * v + grad (plain SGD when state is
// null or momentum is 0).
Codebook sgd_step(const Codebook& cb, const Matrix& grad, double lr, SgdState* state = nullptr);

} // namespace mvq

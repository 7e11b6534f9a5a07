#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mvq/finetune.hpp"
#include "test_util.hpp"

using namespace mvq;

namespace {

struct Instance {
    Matrix target;  // T: what the reconstruction should approach
    BitmaskMatrix mask;
    Assignments assign;
    Codebook cb;
};

Instance random_instance(std::size_t ng, std::size_t d, std::size_t k, uint32_t n, uint32_t m,
                         uint64_t seed) {
    Instance inst;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    inst.target = Matrix(ng, d);
    for (auto& v : inst.target.data) v = dist(rng);
    inst.mask = BitmaskMatrix(ng, d);
    std::vector<uint32_t> idx(m);
    for (std::size_t r = 0; r < ng; ++r)
        for (std::size_t chunk = 0; chunk < d / m; ++chunk) {
            std::iota(idx.begin(), idx.end(), 0u);
            std::shuffle(idx.begin(), idx.end(), rng);
            for (uint32_t i = 0; i < n; ++i) inst.mask.at(r, chunk * m + idx[i]) = 1;
        }
    inst.assign.resize(ng);
    for (auto& a : inst.assign) a = uint32_t(rng() % k);
    inst.cb = Codebook(k, d);
    for (auto& v : inst.cb.data) v = dist(rng);
    return inst;
}

// Coverage of codeword i, coordinate t: number of assigned rows whose mask
// is set at t.
std::vector<std::size_t> coverage_of(const Instance& inst) {
    std::vector<std::size_t> cov(inst.cb.k * inst.cb.d, 0);
    for (std::size_t j = 0; j < inst.assign.size(); ++j)
        for (std::size_t t = 0; t < inst.cb.d; ++t)
            if (inst.mask.at(j, t)) ++cov[inst.assign[j] * inst.cb.d + t];
    return cov;
}

// The normalized quadratic objective whose exact gradient is the masked
// average of per-weight gradients: sum over covered (i,t) of
// sum_p n_p[t] (c_i[t]-T_p[t])^2 / (2*coverage(i,t)).
long double normalized_loss(const Instance& inst, const Codebook& cb) {
    const std::size_t d = cb.d;
    std::vector<long double> num(cb.k * d, 0.0L);
    std::vector<std::size_t> cov(cb.k * d, 0);
    for (std::size_t j = 0; j < inst.assign.size(); ++j) {
        const uint32_t i = inst.assign[j];
        for (std::size_t t = 0; t < d; ++t) {
            if (!inst.mask.at(j, t)) continue;
            const long double diff = cb.row(i)[t] - inst.target.at(j, t);
            num[i * d + t] += diff * diff;
            cov[i * d + t] += 1;
        }
    }
    long double loss = 0.0L;
    for (std::size_t p = 0; p < num.size(); ++p)
        if (cov[p]) loss += num[p] / (2.0L * cov[p]);
    return loss;
}

// Per-weight gradients of L = 1/2 ||recon - T||^2.
Matrix quadratic_weight_grads(const Instance& inst, const Codebook& cb) {
    const Matrix recon = reconstruct_for_forward(cb, inst.assign, inst.mask);
    Matrix grads(recon.rows, recon.cols);
    for (std::size_t p = 0; p < grads.data.size(); ++p)
        grads.data[p] = recon.data[p] - inst.target.data[p];
    return grads;
}

} // namespace

TEST_CASE("reconstruction applies the mask to the assigned codeword") {
    Codebook cb(1, 2);
    cb.data = {3, 7};
    BitmaskMatrix mask(1, 2);
    mask.at(0, 0) = 1;
    const Matrix recon = reconstruct_for_forward(cb, {0}, mask);
    CHECK(recon.data == std::vector<double>{3, 0});
}

TEST_CASE("full masks reproduce codewords verbatim") {
    Codebook cb(2, 3);
    cb.data = {1, 2, 3, 4, 5, 6};
    const Matrix recon = reconstruct_for_forward(cb, {1, 0}, BitmaskMatrix(2, 3, 1));
    CHECK(recon.data == std::vector<double>{4, 5, 6, 1, 2, 3});
}

TEST_CASE("reconstruction rejects out-of-range assignments") {
    Codebook cb(1, 2);
    BitmaskMatrix mask(1, 2, 1);
    expect_error(Errc::IndexOutOfRange, [&] { (void)reconstruct_for_forward(cb, {3}, mask); });
}

TEST_CASE("gradient aggregation is the masked average") {
    Matrix grads(2, 2);
    grads.data = {2, 6, 4, 0};
    BitmaskMatrix mask(2, 2);
    mask.at(0, 0) = mask.at(0, 1) = 1; // n1 = [1,1]
    mask.at(1, 0) = 1;                 // n2 = [1,0]
    const Matrix agg = aggregate_codeword_grads(grads, {0, 0}, mask, 2);
    CHECK(agg.at(0, 0) == 3.0);
    CHECK(agg.at(0, 1) == 6.0);
    // codeword 1 has no assigned subvectors
    CHECK(agg.at(1, 0) == 0.0);
    CHECK(agg.at(1, 1) == 0.0);
}

TEST_CASE("aggregated gradients match central finite differences") {
    const Instance inst = random_instance(32, 8, 4, 2, 4, 2024);
    const Matrix agg =
        aggregate_codeword_grads(quadratic_weight_grads(inst, inst.cb), inst.assign, inst.mask, 4);
    const auto cov = coverage_of(inst);

    const double eps = 1e-5;
    for (std::size_t i = 0; i < inst.cb.k; ++i)
        for (std::size_t t = 0; t < inst.cb.d; ++t) {
            Codebook plus = inst.cb, minus = inst.cb;
            plus.row(i)[t] += eps;
            minus.row(i)[t] -= eps;
            const double fd =
                double((normalized_loss(inst, plus) - normalized_loss(inst, minus)) / (2 * eps));
            const double got = agg.at(i, t);
            if (cov[i * inst.cb.d + t] == 0) {
                CHECK(got == 0.0);
                CHECK(std::fabs(fd) < 1e-12);
            } else {
                CHECK(std::fabs(fd - got) <= 1e-4 * std::max(1.0, std::fabs(got)));
            }
        }
}

TEST_CASE("sgd_step basics") {
    Codebook cb(1, 2);
    cb.data = {3, -4};
    Matrix zero(1, 2);
    CHECK(sgd_step(cb, zero, 0.5).data == cb.data);

    Matrix grad(1, 2);
    grad.data = cb.data;
    CHECK(sgd_step(cb, grad, 1.0).data == std::vector<double>{0, 0});

    expect_error(Errc::ConfigInvalid, [&] { (void)sgd_step(cb, grad, 0.0); });
}

TEST_CASE("momentum accumulates velocity") {
    Codebook cb(1, 1);
    cb.data = {0};
    Matrix grad(1, 1);
    grad.data = {1};
    SgdState state;
    state.momentum = 0.5;
    Codebook c1 = sgd_step(cb, grad, 1.0, &state); // v=1, c=-1
    Codebook c2 = sgd_step(c1, grad, 1.0, &state); // v=1.5, c=-2.5
    CHECK(c1.data[0] == -1.0);
    CHECK(c2.data[0] == -2.5);
}

TEST_CASE("descent: repeated steps strictly decrease the quadratic loss") {
    const Instance inst = random_instance(32, 8, 4, 2, 4, 77);
    Codebook cb = inst.cb;
    long double prev = normalized_loss(inst, cb);
    for (int step = 0; step < 25; ++step) {
        const Matrix agg =
            aggregate_codeword_grads(quadratic_weight_grads(inst, cb), inst.assign, inst.mask, 4);
        double gnorm = 0;
        for (double g : agg.data) gnorm = std::max(gnorm, std::fabs(g));
        if (gnorm < 1e-12) break;
        cb = sgd_step(cb, agg, 0.5);
        const long double now = normalized_loss(inst, cb);
        CHECK(now < prev);
        prev = now;
    }
    CHECK(double(prev) < double(normalized_loss(inst, inst.cb)));
}

TEST_CASE("pruned positions never receive gradient flow") {
    const Instance inst = random_instance(16, 8, 4, 2, 4, 5);
    Codebook cb = inst.cb;
    for (int step = 0; step < 5; ++step) {
        const Matrix agg =
            aggregate_codeword_grads(quadratic_weight_grads(inst, cb), inst.assign, inst.mask, 4);
        cb = sgd_step(cb, agg, 0.3);
        const Matrix recon = reconstruct_for_forward(cb, inst.assign, inst.mask);
        for (std::size_t p = 0; p < recon.data.size(); ++p)
            if (!inst.mask.bits[p]) CHECK(recon.data[p] == 0.0);
    }
}

#include "mvq/clustering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>

namespace mvq {

namespace {

constexpr std::size_t kRowBlock = 64;

// Runs fn over [0,n) in fixed-size blocks. The block partition is independent
// of the thread count, so per-block reductions are reproducible everywhere.
void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t nblocks = (n + kRowBlock - 1) / kRowBlock;
    std::size_t nthreads = std::thread::hardware_concurrency();
    nthreads = std::min<std::size_t>(std::max<std::size_t>(nthreads, 1), nblocks);
    if (nthreads <= 1 || n < 4 * kRowBlock) {
        fn(0, n);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nblocks) break;
            const std::size_t begin = b * kRowBlock;
            fn(begin, std::min(begin + kRowBlock, n));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads - 1);
    for (std::size_t t = 0; t + 1 < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

uint64_t draw_below(std::mt19937_64& rng, uint64_t bound) {
    // rejection sampling: unbiased and portable
    const uint64_t max = std::numeric_limits<uint64_t>::max();
    const uint64_t limit = max - max % bound;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

void check_geometry(const Matrix& values, const BitmaskMatrix* mask, const Codebook& cb) {
    if (cb.k == 0) fail(Errc::ConfigInvalid, "codebook is empty");
    if (cb.d != values.cols)
        fail(Errc::DimensionMismatch, "codeword length " + std::to_string(cb.d) +
                                          " != subvector length " + std::to_string(values.cols));
    if (mask && (mask->rows != values.rows || mask->cols != values.cols))
        fail(Errc::DimensionMismatch, "mask geometry does not match values");
}

// Assignment pass that also returns the Eq. 1 SSE of the chosen codewords.
// Per-block partial sums are combined in block order for determinism.
Assignments assign_with_sse(const Matrix& values, const BitmaskMatrix* mask, const Codebook& cb,
                            double* out_sse) {
    check_geometry(values, mask, cb);
    const std::size_t ng = values.rows;
    const std::size_t d = values.cols;
    const std::size_t k = cb.k;
    Assignments assign(ng, 0);
    const std::size_t nblocks = (ng + kRowBlock - 1) / kRowBlock;
    std::vector<long double> block_sse(out_sse ? nblocks : 0, 0.0L);

    parallel_blocks(ng, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const double* w = values.data.data() + j * d;
            const uint8_t* bm = mask ? mask->bits.data() + j * d : nullptr;
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const double* c = cb.data.data() + i * d;
                double acc = 0.0;
                if (bm) {
                    for (std::size_t t = 0; t < d; ++t) {
                        const double diff = w[t] - (bm[t] ? c[t] : 0.0);
                        acc += diff * diff;
                    }
                } else {
                    for (std::size_t t = 0; t < d; ++t) {
                        const double diff = w[t] - c[t];
                        acc += diff * diff;
                    }
                }
                if (acc < best) {
                    best = acc;
                    best_i = i;
                }
            }
            assign[j] = uint32_t(best_i);
            if (out_sse) block_sse[j / kRowBlock] += (long double)best;
        }
    });

    if (out_sse) {
        long double total = 0.0L;
        for (long double s : block_sse) total += s;
        *out_sse = double(total);
    }
    return assign;
}

Codebook masked_update_impl(const Matrix& values, const BitmaskMatrix* mask,
                            const Assignments& assign, const Codebook& previous) {
    check_geometry(values, mask, previous);
    if (assign.size() != values.rows) fail(Errc::DimensionMismatch, "assignment count != NG");
    const std::size_t d = values.cols;
    std::vector<double> sums(previous.k * d, 0.0);
    std::vector<std::size_t> counts(previous.k * d, 0);
    for (std::size_t j = 0; j < values.rows; ++j) {
        const uint32_t i = assign[j];
        if (i >= previous.k) fail(Errc::IndexOutOfRange, "assignment index out of range");
        const double* w = values.data.data() + j * d;
        const uint8_t* bm = mask ? mask->bits.data() + j * d : nullptr;
        for (std::size_t t = 0; t < d; ++t) {
            if (bm && !bm[t]) continue;
            sums[std::size_t(i) * d + t] += w[t];
            counts[std::size_t(i) * d + t] += 1;
        }
    }
    Codebook out(previous.k, d);
    for (std::size_t i = 0; i < previous.k; ++i) {
        for (std::size_t t = 0; t < d; ++t) {
            const std::size_t p = i * d + t;
            out.data[p] = counts[p] ? sums[p] / double(counts[p]) : previous.data[p];
        }
    }
    return out;
}

void relabel_first_use(Codebook& cb, Assignments& assign) {
    const uint32_t unset = std::numeric_limits<uint32_t>::max();
    std::vector<uint32_t> remap(cb.k, unset);
    uint32_t next = 0;
    for (uint32_t a : assign)
        if (remap[a] == unset) remap[a] = next++;
    for (std::size_t i = 0; i < cb.k; ++i)
        if (remap[i] == unset) remap[i] = next++;

    Codebook reordered(cb.k, cb.d);
    for (std::size_t i = 0; i < cb.k; ++i) {
        auto src = cb.row(i);
        auto dst = reordered.row(remap[i]);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    cb = std::move(reordered);
    for (auto& a : assign) a = remap[a];
}

// Re-seed codewords that lost every row from the rows that currently fit
// worst (largest mask-restricted distance), skipping rows whose departure
// would empty their own cluster and rows that already fit exactly.
void repair_empty_clusters(const Matrix& values, const BitmaskMatrix* mask,
                           const Assignments& assign, Codebook& cb) {
    std::vector<std::size_t> counts(cb.k, 0);
    for (uint32_t a : assign) ++counts[a];
    std::vector<std::size_t> empties;
    for (std::size_t i = 0; i < cb.k; ++i)
        if (counts[i] == 0) empties.push_back(i);
    if (empties.empty()) return;

    const std::size_t ng = values.rows;
    const std::size_t d = values.cols;
    std::vector<double> dist(ng, 0.0);
    parallel_blocks(ng, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const double* w = values.data.data() + j * d;
            const uint8_t* bm = mask ? mask->bits.data() + j * d : nullptr;
            const double* c = cb.data.data() + std::size_t(assign[j]) * d;
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                if (bm && !bm[t]) continue;
                const double diff = w[t] - c[t];
                acc += diff * diff;
            }
            dist[j] = acc;
        }
    });

    std::vector<uint8_t> taken(ng, 0);
    for (std::size_t e : empties) {
        std::size_t best = ng;
        for (std::size_t j = 0; j < ng; ++j) {
            if (taken[j] || counts[assign[j]] < 2 || dist[j] <= 0.0) continue;
            if (best == ng || dist[j] > dist[best]) best = j;
        }
        if (best == ng) break; // nothing left worth splitting
        auto src = values.row(best);
        auto dst = cb.row(e);
        std::copy(src.begin(), src.end(), dst.begin());
        taken[best] = 1;
        --counts[assign[best]];
        ++counts[e];
    }
}

KMeansResult run_kmeans_impl(const Matrix& values, const BitmaskMatrix* mask, std::size_t k,
                             uint64_t seed, const KMeansOptions& opts) {
    KMeansResult res;
    res.codebook = kmeans_init(values, k, seed);
    res.stats.seed = seed;
    res.assignments = assign_with_sse(values, mask, res.codebook, nullptr);

    const double threshold = opts.change_threshold_fraction * double(values.rows);
    for (std::size_t iter = 1; iter <= opts.max_iters; ++iter) {
        res.codebook = masked_update_impl(values, mask, res.assignments, res.codebook);
        repair_empty_clusters(values, mask, res.assignments, res.codebook);

        double sse_now = 0.0;
        Assignments next = assign_with_sse(values, mask, res.codebook, &sse_now);
        std::size_t changed = 0;
        for (std::size_t j = 0; j < next.size(); ++j)
            if (next[j] != res.assignments[j]) ++changed;
        res.assignments = std::move(next);

        res.stats.iterations = iter;
        res.stats.masked_sse.push_back(sse_now);
        res.stats.changed.push_back(changed);
        if (double(changed) < threshold) break;
    }

    relabel_first_use(res.codebook, res.assignments);
    return res;
}

} // namespace

Codebook kmeans_init(const Matrix& rows, std::size_t k, uint64_t seed) {
    if (k == 0) fail(Errc::ConfigInvalid, "k must be at least 1");
    if (rows.rows < k)
        fail(Errc::TooFewSubvectors, "NG=" + std::to_string(rows.rows) +
                                         " < k=" + std::to_string(k));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(rows.rows);
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + std::size_t(draw_below(rng, rows.rows - i));
        std::swap(idx[i], idx[j]);
    }
    Codebook cb(k, rows.cols);
    for (std::size_t i = 0; i < k; ++i) {
        auto src = rows.row(idx[i]);
        std::copy(src.begin(), src.end(), cb.row(i).begin());
    }
    return cb;
}

double masked_distance(std::span<const double> row, std::span<const uint8_t> mask,
                       std::span<const double> codeword) {
    double acc = 0.0;
    for (std::size_t t = 0; t < row.size(); ++t) {
        const double c = (mask.empty() || mask[t]) ? codeword[t] : 0.0;
        const double diff = row[t] - c;
        acc += diff * diff;
    }
    return acc;
}

Assignments masked_assign(const Matrix& values, const BitmaskMatrix& mask, const Codebook& cb) {
    return assign_with_sse(values, &mask, cb, nullptr);
}

Codebook masked_update(const Matrix& values, const BitmaskMatrix& mask, const Assignments& assign,
                       const Codebook& previous) {
    return masked_update_impl(values, &mask, assign, previous);
}

double masked_sse(const Matrix& values, const BitmaskMatrix* mask, const Codebook& cb,
                  const Assignments& assign) {
    check_geometry(values, mask, cb);
    if (assign.size() != values.rows) fail(Errc::DimensionMismatch, "assignment count != NG");
    long double total = 0.0L;
    for (std::size_t j = 0; j < values.rows; ++j) {
        if (assign[j] >= cb.k) fail(Errc::IndexOutOfRange, "assignment index out of range");
        auto m = mask ? mask->row(j) : std::span<const uint8_t>{};
        total += (long double)masked_distance(values.row(j), m, cb.row(assign[j]));
    }
    return double(total);
}

KMeansResult run_masked_kmeans(const Matrix& values, const BitmaskMatrix& mask, std::size_t k,
                               uint64_t seed, const KMeansOptions& opts) {
    return run_kmeans_impl(values, &mask, k, seed, opts);
}

KMeansResult run_common_kmeans(const Matrix& values, std::size_t k, uint64_t seed,
                               const KMeansOptions& opts) {
    return run_kmeans_impl(values, nullptr, k, seed, opts);
}

} // namespace mvq

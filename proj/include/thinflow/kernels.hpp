#pragma once

// Execution policy and deterministic reductions shared by all kernels.
//
// Determinism contract: every reduction is computed from a fixed slab
// decomposition (z-planes in 3D, rows in 2D). Each slab partial is a serial
// sum; partials are combined by pairwise summation in slab order. OpenMP only
// distributes slab evaluation, so results are bitwise identical for any
// thread count, including the serial reference path.

#include <cstddef>
#include <vector>

namespace thinflow {

struct Exec {
    bool parallel = true;
};

// Process-wide default used by high-level operations. Kernel-level entry
// points take an explicit Exec so the serial reference path stays testable.
Exec exec_default();
void set_default_parallel(bool on);

// Pairwise (binary tree) summation. Adjacent pairing keeps sums of 2^m equal
// values exact, which the averaging operators rely on.
inline double pairwise_sum(const double* a, std::size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return a[0];
    if (n == 2) return a[0] + a[1];
    const std::size_t h = n / 2;
    return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& a) {
    return pairwise_sum(a.data(), a.size());
}

// Evaluates slab_sum(s) for s in [0, n_slabs) and combines the partials in
// slab order. slab_sum must be pure.
template <class F>
double reduce_slabs(int n_slabs, const Exec& ex, F&& slab_sum) {
    std::vector<double> partial(static_cast<std::size_t>(n_slabs > 0 ? n_slabs : 0));
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < n_slabs; ++s) partial[static_cast<std::size_t>(s)] = slab_sum(s);
    } else {
        for (int s = 0; s < n_slabs; ++s) partial[static_cast<std::size_t>(s)] = slab_sum(s);
    }
    return pairwise_sum(partial);
}

} // namespace thinflow

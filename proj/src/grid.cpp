#include "thinflow/grid.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "thinflow/rng.hpp"

namespace thinflow {

static_assert(std::endian::native == std::endian::little,
              "field dumps are little-endian");

namespace {
bool g_default_parallel = true;
}

Exec exec_default() { return Exec{g_default_parallel}; }
void set_default_parallel(bool on) { g_default_parallel = on; }

// ============================================================================
// Grids
// ============================================================================

Grid3D make_grid3d(int nx, int ny, int nz, double lx, double ly, double eps) {
    if (nx < 2 || ny < 2 || nz < 2)
        throw grid_error("make_grid3d: cell counts must be at least 2");
    if (!(lx > 0.0) || !(ly > 0.0))
        throw grid_error("make_grid3d: extents must be positive");
    if (!(eps > 0.0) || eps >= 0.5)
        throw grid_error("make_grid3d: thickness must satisfy 0 < eps < 1/2");
    Grid3D g;
    g.nx = nx; g.ny = ny; g.nz = nz;
    g.lx = lx; g.ly = ly; g.eps = eps;
    g.dx = lx / nx; g.dy = ly / ny; g.dz = eps / nz;
    return g;
}

Grid2D make_grid2d(int nx, int ny, double lx, double ly) {
    if (nx < 2 || ny < 2)
        throw grid_error("make_grid2d: cell counts must be at least 2");
    if (!(lx > 0.0) || !(ly > 0.0))
        throw grid_error("make_grid2d: extents must be positive");
    Grid2D g;
    g.nx = nx; g.ny = ny; g.lx = lx; g.ly = ly;
    g.dx = lx / nx; g.dy = ly / ny;
    return g;
}

// ============================================================================
// Ghost filling and pinning
// ============================================================================

namespace {

// Ghost value just outside index 0 / index n-1 for one axis class.
// pin: odd about the wall face itself.
// odd: odd about the wall plane half a cell outside the outermost dof.
// even: mirror.
inline void ghost_pair(AxisBC b, double f_first_in, double f_first, double f_last,
                       double f_last_in, double& glo, double& ghi) {
    switch (b) {
        case AxisBC::pin:
            glo = -f_first_in;
            ghi = -f_last_in;
            break;
        case AxisBC::odd:
            glo = -f_first;
            ghi = -f_last;
            break;
        case AxisBC::even:
            glo = f_first;
            ghi = f_last;
            break;
    }
}

} // namespace

void fill_ghosts(Array3& f, CompSpec s) {
    const int n0 = f.n0, n1 = f.n1, n2 = f.n2;
    for (int k = 0; k < n2; ++k)
        for (int j = 0; j < n1; ++j) {
            double glo = 0.0, ghi = 0.0;
            ghost_pair(s.bx, f(1, j, k), f(0, j, k), f(n0 - 1, j, k), f(n0 - 2, j, k),
                       glo, ghi);
            f(-1, j, k) = glo;
            f(n0, j, k) = ghi;
        }
    for (int k = 0; k < n2; ++k)
        for (int i = 0; i < n0; ++i) {
            double glo = 0.0, ghi = 0.0;
            ghost_pair(s.by, f(i, 1, k), f(i, 0, k), f(i, n1 - 1, k), f(i, n1 - 2, k),
                       glo, ghi);
            f(i, -1, k) = glo;
            f(i, n1, k) = ghi;
        }
    for (int j = 0; j < n1; ++j)
        for (int i = 0; i < n0; ++i) {
            double glo = 0.0, ghi = 0.0;
            ghost_pair(s.bz, f(i, j, 1), f(i, j, 0), f(i, j, n2 - 1), f(i, j, n2 - 2),
                       glo, ghi);
            f(i, j, -1) = glo;
            f(i, j, n2) = ghi;
        }
}

void fill_ghosts(Array2& f, CompSpec2 s) {
    const int n0 = f.n0, n1 = f.n1;
    for (int j = 0; j < n1; ++j) {
        double glo = 0.0, ghi = 0.0;
        ghost_pair(s.bx, f(1, j), f(0, j), f(n0 - 1, j), f(n0 - 2, j), glo, ghi);
        f(-1, j) = glo;
        f(n0, j) = ghi;
    }
    for (int i = 0; i < n0; ++i) {
        double glo = 0.0, ghi = 0.0;
        ghost_pair(s.by, f(i, 1), f(i, 0), f(i, n1 - 1), f(i, n1 - 2), glo, ghi);
        f(i, -1) = glo;
        f(i, n1) = ghi;
    }
}

void pin_walls(Array3& f, CompSpec s) {
    const int n0 = f.n0, n1 = f.n1, n2 = f.n2;
    if (s.bx == AxisBC::pin)
        for (int k = 0; k < n2; ++k)
            for (int j = 0; j < n1; ++j) f(0, j, k) = f(n0 - 1, j, k) = 0.0;
    if (s.by == AxisBC::pin)
        for (int k = 0; k < n2; ++k)
            for (int i = 0; i < n0; ++i) f(i, 0, k) = f(i, n1 - 1, k) = 0.0;
    if (s.bz == AxisBC::pin)
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < n0; ++i) f(i, j, 0) = f(i, j, n2 - 1) = 0.0;
}

void pin_walls(Array2& f, CompSpec2 s) {
    const int n0 = f.n0, n1 = f.n1;
    if (s.bx == AxisBC::pin)
        for (int j = 0; j < n1; ++j) f(0, j) = f(n0 - 1, j) = 0.0;
    if (s.by == AxisBC::pin)
        for (int i = 0; i < n0; ++i) f(i, 0) = f(i, n1 - 1) = 0.0;
}

// ============================================================================
// Field construction
// ============================================================================

SField3D make_sfield3(const Grid3D& g) {
    SField3D f;
    f.g = g;
    f.c.resize(g.nx, g.ny, g.nz);
    return f;
}

VField3D make_vfield3(const Grid3D& g) {
    VField3D f;
    f.g = g;
    f.u.resize(g.nx + 1, g.ny, g.nz);
    f.v.resize(g.nx, g.ny + 1, g.nz);
    f.w.resize(g.nx, g.ny, g.nz + 1);
    return f;
}

SField2D make_sfield2(const Grid2D& g) {
    SField2D f;
    f.g = g;
    f.c.resize(g.nx, g.ny);
    return f;
}

VField2D make_vfield2(const Grid2D& g) {
    VField2D f;
    f.g = g;
    f.u.resize(g.nx + 1, g.ny);
    f.v.resize(g.nx, g.ny + 1);
    return f;
}

void apply_bc(VField3D& f) {
    pin_walls(f.u, spec_u1);
    pin_walls(f.v, spec_u2);
    pin_walls(f.w, spec_u3);
    fill_ghosts(f.u, spec_u1);
    fill_ghosts(f.v, spec_u2);
    fill_ghosts(f.w, spec_u3);
}

void apply_bc(VField2D& f) {
    pin_walls(f.u, spec2_u1);
    pin_walls(f.v, spec2_u2);
    fill_ghosts(f.u, spec2_u1);
    fill_ghosts(f.v, spec2_u2);
}

void apply_bc(SField3D& f) { fill_ghosts(f.c, spec_scal3); }
void apply_bc(SField2D& f) { fill_ghosts(f.c, spec2_scal); }

void fill_random(Array3& f, std::uint64_t seed, std::uint64_t tag) {
    for (int k = 0; k < f.n2; ++k)
        for (int j = 0; j < f.n1; ++j)
            for (int i = 0; i < f.n0; ++i) {
                const std::uint64_t idx =
                    static_cast<std::uint64_t>(i) +
                    static_cast<std::uint64_t>(f.n0) *
                        (static_cast<std::uint64_t>(j) +
                         static_cast<std::uint64_t>(f.n1) * static_cast<std::uint64_t>(k));
                f(i, j, k) = uniform_sym(key_mix(seed, tag, idx, 0x5eedULL));
            }
}

void fill_random(Array2& f, std::uint64_t seed, std::uint64_t tag) {
    for (int j = 0; j < f.n1; ++j)
        for (int i = 0; i < f.n0; ++i) {
            const std::uint64_t idx = static_cast<std::uint64_t>(i) +
                                      static_cast<std::uint64_t>(f.n0) *
                                          static_cast<std::uint64_t>(j);
            f(i, j) = uniform_sym(key_mix(seed, tag, idx, 0x5eedULL));
        }
}

VField3D random_vfield3(const Grid3D& g, std::uint64_t seed) {
    VField3D f = make_vfield3(g);
    fill_random(f.u, seed, 1);
    fill_random(f.v, seed, 2);
    fill_random(f.w, seed, 3);
    apply_bc(f);
    return f;
}

VField2D random_vfield2(const Grid2D& g, std::uint64_t seed) {
    VField2D f = make_vfield2(g);
    fill_random(f.u, seed, 1);
    fill_random(f.v, seed, 2);
    apply_bc(f);
    return f;
}

SField3D random_sfield3(const Grid3D& g, std::uint64_t seed) {
    SField3D f = make_sfield3(g);
    fill_random(f.c, seed, 4);
    apply_bc(f);
    return f;
}

namespace {

void axpy_arr(Array3& y, double a, const Array3& x) {
    for (int k = 0; k < y.n2; ++k)
        for (int j = 0; j < y.n1; ++j)
            for (int i = 0; i < y.n0; ++i) y(i, j, k) += a * x(i, j, k);
}
void axpy_arr(Array2& y, double a, const Array2& x) {
    for (int j = 0; j < y.n1; ++j)
        for (int i = 0; i < y.n0; ++i) y(i, j) += a * x(i, j);
}
void scale_arr(Array3& f, double a) {
    for (double& x : f.a) x *= a;
}
void scale_arr(Array2& f, double a) {
    for (double& x : f.a) x *= a;
}

} // namespace

void axpy(VField3D& y, double a, const VField3D& x) {
    axpy_arr(y.u, a, x.u);
    axpy_arr(y.v, a, x.v);
    axpy_arr(y.w, a, x.w);
}
void axpy(VField2D& y, double a, const VField2D& x) {
    axpy_arr(y.u, a, x.u);
    axpy_arr(y.v, a, x.v);
}
void scale(VField3D& f, double a) {
    scale_arr(f.u, a);
    scale_arr(f.v, a);
    scale_arr(f.w, a);
}
void scale(VField2D& f, double a) {
    scale_arr(f.u, a);
    scale_arr(f.v, a);
}

// ============================================================================
// Inner products
// ============================================================================

namespace {

inline double waxis(AxisBC b, int i, int n) {
    return (b == AxisBC::pin && (i == 0 || i == n - 1)) ? 0.5 : 1.0;
}

double inner_comp(const Array3& A, const Array3& B, CompSpec s, Exec ex) {
    return reduce_slabs(A.n2, ex, [&](int k) {
        const double wz = waxis(s.bz, k, A.n2);
        double acc = 0.0;
        for (int j = 0; j < A.n1; ++j) {
            double row = 0.0;
            int i0 = 0, i1 = A.n0;
            if (s.bx == AxisBC::pin) {
                row += 0.5 * (A(0, j, k) * B(0, j, k) +
                              A(A.n0 - 1, j, k) * B(A.n0 - 1, j, k));
                i0 = 1;
                i1 = A.n0 - 1;
            }
            for (int i = i0; i < i1; ++i) row += A(i, j, k) * B(i, j, k);
            acc += waxis(s.by, j, A.n1) * row;
        }
        return wz * acc;
    });
}

double inner_comp(const Array2& A, const Array2& B, CompSpec2 s, Exec ex) {
    return reduce_slabs(A.n1, ex, [&](int j) {
        double row = 0.0;
        int i0 = 0, i1 = A.n0;
        if (s.bx == AxisBC::pin) {
            row += 0.5 * (A(0, j) * B(0, j) + A(A.n0 - 1, j) * B(A.n0 - 1, j));
            i0 = 1;
            i1 = A.n0 - 1;
        }
        for (int i = i0; i < i1; ++i) row += A(i, j) * B(i, j);
        return waxis(s.by, j, A.n1) * row;
    });
}

} // namespace

double inner_l2(const SField3D& a, const SField3D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("inner_l2: grid mismatch");
    return a.g.dx * a.g.dy * a.g.dz * inner_comp(a.c, b.c, spec_scal3, ex);
}

double inner_l2(const VField3D& a, const VField3D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("inner_l2: grid mismatch");
    const double vol = a.g.dx * a.g.dy * a.g.dz;
    return vol * (inner_comp(a.u, b.u, spec_u1, ex) + inner_comp(a.v, b.v, spec_u2, ex) +
                  inner_comp(a.w, b.w, spec_u3, ex));
}

double inner_l2(const SField2D& a, const SField2D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("inner_l2: grid mismatch");
    return a.g.dx * a.g.dy * inner_comp(a.c, b.c, spec2_scal, ex);
}

double inner_l2(const VField2D& a, const VField2D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("inner_l2: grid mismatch");
    const double vol = a.g.dx * a.g.dy;
    return vol * (inner_comp(a.u, b.u, spec2_u1, ex) + inner_comp(a.v, b.v, spec2_u2, ex));
}

double norm_l2(const VField3D& a, Exec ex) { return std::sqrt(inner_l2(a, a, ex)); }
double norm_l2(const VField2D& a, Exec ex) { return std::sqrt(inner_l2(a, a, ex)); }
double norm_l2(const SField3D& a, Exec ex) { return std::sqrt(inner_l2(a, a, ex)); }
double norm_l2(const SField2D& a, Exec ex) { return std::sqrt(inner_l2(a, a, ex)); }

// ============================================================================
// Dirichlet forms
// ============================================================================

namespace {

// Difference pairing along the x axis of one component. The closure at each
// wall matches the ghost convention:
//   pin:  n0-1 inter-dof gaps, full weight, pinned end values participate
//   odd:  wall planes at both ends, difference 2*f/h, half weight
//   even: wall differences vanish and are skipped
double dform_dx(const Array3& A, const Array3& B, CompSpec s, double hx, Exec ex) {
    const double ih = 1.0 / hx;
    return reduce_slabs(A.n2, ex, [&](int k) {
        const double wz = waxis(s.bz, k, A.n2);
        double acc = 0.0;
        for (int j = 0; j < A.n1; ++j) {
            double row = 0.0;
            if (s.bx == AxisBC::pin) {
                for (int i = 0; i + 1 < A.n0; ++i)
                    row += (A(i + 1, j, k) - A(i, j, k)) * (B(i + 1, j, k) - B(i, j, k));
            } else {
                for (int i = 1; i < A.n0; ++i)
                    row += (A(i, j, k) - A(i - 1, j, k)) * (B(i, j, k) - B(i - 1, j, k));
                if (s.bx == AxisBC::odd)
                    row += 0.5 * (4.0 * A(0, j, k) * B(0, j, k) +
                                  4.0 * A(A.n0 - 1, j, k) * B(A.n0 - 1, j, k));
            }
            acc += waxis(s.by, j, A.n1) * row;
        }
        return wz * acc * ih * ih;
    });
}

double dform_dy(const Array3& A, const Array3& B, CompSpec s, double hy, Exec ex) {
    const double ih = 1.0 / hy;
    return reduce_slabs(A.n2, ex, [&](int k) {
        const double wz = waxis(s.bz, k, A.n2);
        double acc = 0.0;
        if (s.by == AxisBC::pin) {
            for (int j = 0; j + 1 < A.n1; ++j)
                for (int i = 0; i < A.n0; ++i)
                    acc += waxis(s.bx, i, A.n0) * (A(i, j + 1, k) - A(i, j, k)) *
                           (B(i, j + 1, k) - B(i, j, k));
        } else {
            for (int j = 1; j < A.n1; ++j)
                for (int i = 0; i < A.n0; ++i)
                    acc += waxis(s.bx, i, A.n0) * (A(i, j, k) - A(i, j - 1, k)) *
                           (B(i, j, k) - B(i, j - 1, k));
            if (s.by == AxisBC::odd)
                for (int i = 0; i < A.n0; ++i)
                    acc += waxis(s.bx, i, A.n0) * 0.5 *
                           (4.0 * A(i, 0, k) * B(i, 0, k) +
                            4.0 * A(i, A.n1 - 1, k) * B(i, A.n1 - 1, k));
        }
        return wz * acc * ih * ih;
    });
}

double dform_dz(const Array3& A, const Array3& B, CompSpec s, double hz, Exec ex) {
    const double ih = 1.0 / hz;
    // Slabs are difference locations along z here.
    if (s.bz == AxisBC::pin) {
        return ih * ih * reduce_slabs(A.n2 - 1, ex, [&](int k) {
            double acc = 0.0;
            for (int j = 0; j < A.n1; ++j)
                for (int i = 0; i < A.n0; ++i)
                    acc += waxis(s.bx, i, A.n0) * waxis(s.by, j, A.n1) *
                           (A(i, j, k + 1) - A(i, j, k)) * (B(i, j, k + 1) - B(i, j, k));
            return acc;
        });
    }
    double sum = ih * ih * reduce_slabs(A.n2 - 1, ex, [&](int kk) {
        const int k = kk + 1;
        double acc = 0.0;
        for (int j = 0; j < A.n1; ++j)
            for (int i = 0; i < A.n0; ++i)
                acc += waxis(s.bx, i, A.n0) * waxis(s.by, j, A.n1) *
                       (A(i, j, k) - A(i, j, k - 1)) * (B(i, j, k) - B(i, j, k - 1));
        return acc;
    });
    if (s.bz == AxisBC::odd) {
        double acc = 0.0;
        for (int j = 0; j < A.n1; ++j)
            for (int i = 0; i < A.n0; ++i)
                acc += waxis(s.bx, i, A.n0) * waxis(s.by, j, A.n1) * 0.5 *
                       (4.0 * A(i, j, 0) * B(i, j, 0) +
                        4.0 * A(i, j, A.n2 - 1) * B(i, j, A.n2 - 1));
        sum += ih * ih * acc;
    }
    return sum;
}

double dform_comp(const Array3& A, const Array3& B, CompSpec s, Spacing h, Exec ex) {
    return dform_dx(A, B, s, h.hx, ex) + dform_dy(A, B, s, h.hy, ex) +
           dform_dz(A, B, s, h.hz, ex);
}

double dform_dx(const Array2& A, const Array2& B, CompSpec2 s, double hx, Exec ex) {
    const double ih = 1.0 / hx;
    return ih * ih * reduce_slabs(A.n1, ex, [&](int j) {
        double row = 0.0;
        if (s.bx == AxisBC::pin) {
            for (int i = 0; i + 1 < A.n0; ++i)
                row += (A(i + 1, j) - A(i, j)) * (B(i + 1, j) - B(i, j));
        } else {
            for (int i = 1; i < A.n0; ++i)
                row += (A(i, j) - A(i - 1, j)) * (B(i, j) - B(i - 1, j));
            if (s.bx == AxisBC::odd)
                row += 0.5 * (4.0 * A(0, j) * B(0, j) +
                              4.0 * A(A.n0 - 1, j) * B(A.n0 - 1, j));
        }
        return waxis(s.by, j, A.n1) * row;
    });
}

double dform_dy(const Array2& A, const Array2& B, CompSpec2 s, double hy, Exec ex) {
    const double ih = 1.0 / hy;
    if (s.by == AxisBC::pin) {
        return ih * ih * reduce_slabs(A.n1 - 1, ex, [&](int j) {
            double acc = 0.0;
            for (int i = 0; i < A.n0; ++i)
                acc += waxis(s.bx, i, A.n0) * (A(i, j + 1) - A(i, j)) *
                       (B(i, j + 1) - B(i, j));
            return acc;
        });
    }
    double sum = ih * ih * reduce_slabs(A.n1 - 1, ex, [&](int jj) {
        const int j = jj + 1;
        double acc = 0.0;
        for (int i = 0; i < A.n0; ++i)
            acc += waxis(s.bx, i, A.n0) * (A(i, j) - A(i, j - 1)) *
                   (B(i, j) - B(i, j - 1));
        return acc;
    });
    if (s.by == AxisBC::odd) {
        double acc = 0.0;
        for (int i = 0; i < A.n0; ++i)
            acc += waxis(s.bx, i, A.n0) * 0.5 *
                   (4.0 * A(i, 0) * B(i, 0) + 4.0 * A(i, A.n1 - 1) * B(i, A.n1 - 1));
        sum += ih * ih * acc;
    }
    return sum;
}

double dform_comp(const Array2& A, const Array2& B, CompSpec2 s, double hx, double hy,
                  Exec ex) {
    return dform_dx(A, B, s, hx, ex) + dform_dy(A, B, s, hy, ex);
}

} // namespace

double dirichlet_form(const VField3D& a, const VField3D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("dirichlet_form: grid mismatch");
    const Spacing h{a.g.dx, a.g.dy, a.g.dz};
    const double vol = a.g.dx * a.g.dy * a.g.dz;
    return vol * (dform_comp(a.u, b.u, spec_u1, h, ex) +
                  dform_comp(a.v, b.v, spec_u2, h, ex) +
                  dform_comp(a.w, b.w, spec_u3, h, ex));
}

double dirichlet_form(const VField2D& a, const VField2D& b, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("dirichlet_form: grid mismatch");
    const double vol = a.g.dx * a.g.dy;
    return vol * (dform_comp(a.u, b.u, spec2_u1, a.g.dx, a.g.dy, ex) +
                  dform_comp(a.v, b.v, spec2_u2, a.g.dx, a.g.dy, ex));
}

double norm_lp_centers(const VField3D& a, int p, Exec ex) {
    if (p != 2 && p != 3 && p != 6) throw grid_error("norm_lp_centers: p must be 2, 3 or 6");
    const Grid3D& g = a.g;
    const double vol = g.dx * g.dy * g.dz;
    const double s = vol * reduce_slabs(g.nz, ex, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double uc = 0.5 * (a.u(i, j, k) + a.u(i + 1, j, k));
                const double vc = 0.5 * (a.v(i, j, k) + a.v(i, j + 1, k));
                const double wc = 0.5 * (a.w(i, j, k) + a.w(i, j, k + 1));
                const double q = uc * uc + vc * vc + wc * wc;
                if (p == 2)
                    acc += q;
                else if (p == 3)
                    acc += q * std::sqrt(q);
                else
                    acc += q * q * q;
            }
        return acc;
    });
    return std::pow(s, 1.0 / p);
}

double dirichlet_form_dir(const VField3D& a, const VField3D& b, int dir, Exec ex) {
    if (!same_grid(a.g, b.g)) throw grid_error("dirichlet_form_dir: grid mismatch");
    const double vol = a.g.dx * a.g.dy * a.g.dz;
    switch (dir) {
        case 0:
            return vol * (dform_dx(a.u, b.u, spec_u1, a.g.dx, ex) +
                          dform_dx(a.v, b.v, spec_u2, a.g.dx, ex) +
                          dform_dx(a.w, b.w, spec_u3, a.g.dx, ex));
        case 1:
            return vol * (dform_dy(a.u, b.u, spec_u1, a.g.dy, ex) +
                          dform_dy(a.v, b.v, spec_u2, a.g.dy, ex) +
                          dform_dy(a.w, b.w, spec_u3, a.g.dy, ex));
        case 2:
            return vol * (dform_dz(a.u, b.u, spec_u1, a.g.dz, ex) +
                          dform_dz(a.v, b.v, spec_u2, a.g.dz, ex) +
                          dform_dz(a.w, b.w, spec_u3, a.g.dz, ex));
        default:
            throw grid_error("dirichlet_form_dir: dir must be 0, 1 or 2");
    }
}

double norm_dz(const VField3D& a, Exec ex) {
    return std::sqrt(dirichlet_form_dir(a, a, 2, ex));
}

// ============================================================================
// Differential operators
// ============================================================================

SField3D divergence3d(const VField3D& f, Exec ex) {
    const Grid3D& g = f.g;
    SField3D d = make_sfield3(g);
    const double ix = 1.0 / g.dx, iy = 1.0 / g.dy, iz = 1.0 / g.dz;
    auto body = [&](int k) {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                d.c(i, j, k) = (f.u(i + 1, j, k) - f.u(i, j, k)) * ix +
                               (f.v(i, j + 1, k) - f.v(i, j, k)) * iy +
                               (f.w(i, j, k + 1) - f.w(i, j, k)) * iz;
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < g.nz; ++k) body(k);
    } else {
        for (int k = 0; k < g.nz; ++k) body(k);
    }
    return d;
}

VField3D gradient3d(const SField3D& p, Exec ex) {
    const Grid3D& g = p.g;
    VField3D f = make_vfield3(g);
    const double ix = 1.0 / g.dx, iy = 1.0 / g.dy, iz = 1.0 / g.dz;
    auto body = [&](int k) {
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 1; i < g.nx; ++i)
                f.u(i, j, k) = (p.c(i, j, k) - p.c(i - 1, j, k)) * ix;
            for (int i = 0; i < g.nx; ++i) {
                if (j >= 1) f.v(i, j, k) = (p.c(i, j, k) - p.c(i, j - 1, k)) * iy;
                if (k >= 1) f.w(i, j, k) = (p.c(i, j, k) - p.c(i, j, k - 1)) * iz;
            }
        }
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < g.nz; ++k) body(k);
    } else {
        for (int k = 0; k < g.nz; ++k) body(k);
    }
    return f;
}

SField2D divergence2d(const VField2D& f, Exec ex) {
    const Grid2D& g = f.g;
    SField2D d = make_sfield2(g);
    const double ix = 1.0 / g.dx, iy = 1.0 / g.dy;
    auto body = [&](int j) {
        for (int i = 0; i < g.nx; ++i)
            d.c(i, j) = (f.u(i + 1, j) - f.u(i, j)) * ix + (f.v(i, j + 1) - f.v(i, j)) * iy;
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < g.ny; ++j) body(j);
    } else {
        for (int j = 0; j < g.ny; ++j) body(j);
    }
    return d;
}

VField2D gradient2d(const SField2D& p, Exec ex) {
    const Grid2D& g = p.g;
    VField2D f = make_vfield2(g);
    const double ix = 1.0 / g.dx, iy = 1.0 / g.dy;
    auto body = [&](int j) {
        for (int i = 1; i < g.nx; ++i) f.u(i, j) = (p.c(i, j) - p.c(i - 1, j)) * ix;
        if (j >= 1)
            for (int i = 0; i < g.nx; ++i) f.v(i, j) = (p.c(i, j) - p.c(i, j - 1)) * iy;
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < g.ny; ++j) body(j);
    } else {
        for (int j = 0; j < g.ny; ++j) body(j);
    }
    return f;
}

namespace {

// Stencil bounds along one axis: pinned dofs are skipped.
inline void axis_range(AxisBC b, int n, int& lo, int& hi) {
    lo = (b == AxisBC::pin) ? 1 : 0;
    hi = (b == AxisBC::pin) ? n - 1 : n;
}

void lap_comp(const Array3& in, Array3& out, CompSpec s, Spacing h, Exec ex) {
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy),
                 iz2 = 1.0 / (h.hz * h.hz);
    int i0, i1, j0, j1, k0, k1;
    axis_range(s.bx, in.n0, i0, i1);
    axis_range(s.by, in.n1, j0, j1);
    axis_range(s.bz, in.n2, k0, k1);
    auto body = [&](int k) {
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i)
                out(i, j, k) =
                    (in(i + 1, j, k) - 2.0 * in(i, j, k) + in(i - 1, j, k)) * ix2 +
                    (in(i, j + 1, k) - 2.0 * in(i, j, k) + in(i, j - 1, k)) * iy2 +
                    (in(i, j, k + 1) - 2.0 * in(i, j, k) + in(i, j, k - 1)) * iz2;
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int k = k0; k < k1; ++k) body(k);
    } else {
        for (int k = k0; k < k1; ++k) body(k);
    }
}

void lap_comp(const Array2& in, Array2& out, CompSpec2 s, Spacing h, Exec ex) {
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy);
    int i0, i1, j0, j1;
    axis_range(s.bx, in.n0, i0, i1);
    axis_range(s.by, in.n1, j0, j1);
    auto body = [&](int j) {
        for (int i = i0; i < i1; ++i)
            out(i, j) = (in(i + 1, j) - 2.0 * in(i, j) + in(i - 1, j)) * ix2 +
                        (in(i, j + 1) - 2.0 * in(i, j) + in(i, j - 1)) * iy2;
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int j = j0; j < j1; ++j) body(j);
    } else {
        for (int j = j0; j < j1; ++j) body(j);
    }
}

} // namespace

VField3D laplacian3d(const VField3D& f, Exec ex) {
    VField3D out = make_vfield3(f.g);
    const Spacing h{f.g.dx, f.g.dy, f.g.dz};
    lap_comp(f.u, out.u, spec_u1, h, ex);
    lap_comp(f.v, out.v, spec_u2, h, ex);
    lap_comp(f.w, out.w, spec_u3, h, ex);
    return out;
}

VField2D laplacian2d(const VField2D& f, Exec ex) {
    VField2D out = make_vfield2(f.g);
    const Spacing h{f.g.dx, f.g.dy, 1.0};
    lap_comp(f.u, out.u, spec2_u1, h, ex);
    lap_comp(f.v, out.v, spec2_u2, h, ex);
    return out;
}

double max_abs_div(const VField3D& f) {
    SField3D d = divergence3d(f, Exec{false});
    double m = 0.0;
    for (int k = 0; k < d.g.nz; ++k)
        for (int j = 0; j < d.g.ny; ++j)
            for (int i = 0; i < d.g.nx; ++i) m = std::max(m, std::fabs(d.c(i, j, k)));
    return m;
}

double max_abs_div(const VField2D& f) {
    SField2D d = divergence2d(f, Exec{false});
    double m = 0.0;
    for (int j = 0; j < d.g.ny; ++j)
        for (int i = 0; i < d.g.nx; ++i) m = std::max(m, std::fabs(d.c(i, j)));
    return m;
}

// ============================================================================
// Helmholtz operator and conjugate gradients
// ============================================================================

void helmholtz_apply(Array3& in, Array3& out, CompSpec s, Spacing h, double alpha,
                     double beta, Exec ex) {
    fill_ghosts(in, s);
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy),
                 iz2 = 1.0 / (h.hz * h.hz);
    int i0, i1, j0, j1, k0, k1;
    axis_range(s.bx, in.n0, i0, i1);
    axis_range(s.by, in.n1, j0, j1);
    axis_range(s.bz, in.n2, k0, k1);
    auto body = [&](int k) {
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i) {
                const double lap =
                    (in(i + 1, j, k) - 2.0 * in(i, j, k) + in(i - 1, j, k)) * ix2 +
                    (in(i, j + 1, k) - 2.0 * in(i, j, k) + in(i, j - 1, k)) * iy2 +
                    (in(i, j, k + 1) - 2.0 * in(i, j, k) + in(i, j, k - 1)) * iz2;
                out(i, j, k) = alpha * in(i, j, k) - beta * lap;
            }
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int k = k0; k < k1; ++k) body(k);
    } else {
        for (int k = k0; k < k1; ++k) body(k);
    }
    pin_walls(out, s);
}

void helmholtz_apply(Array2& in, Array2& out, CompSpec2 s, Spacing h, double alpha,
                     double beta, Exec ex) {
    fill_ghosts(in, s);
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy);
    int i0, i1, j0, j1;
    axis_range(s.bx, in.n0, i0, i1);
    axis_range(s.by, in.n1, j0, j1);
    auto body = [&](int j) {
        for (int i = i0; i < i1; ++i) {
            const double lap = (in(i + 1, j) - 2.0 * in(i, j) + in(i - 1, j)) * ix2 +
                               (in(i, j + 1) - 2.0 * in(i, j) + in(i, j - 1)) * iy2;
            out(i, j) = alpha * in(i, j) - beta * lap;
        }
    };
    if (ex.parallel) {
#pragma omp parallel for schedule(static)
        for (int j = j0; j < j1; ++j) body(j);
    } else {
        for (int j = j0; j < j1; ++j) body(j);
    }
    pin_walls(out, s);
}

namespace {

// Diagonal coefficient of -Lap along one axis given the ghost closure.
inline double diag_axis(AxisBC b, int i, int n, double ih2) {
    switch (b) {
        case AxisBC::pin:
            return 2.0 * ih2;
        case AxisBC::odd:
            return (i == 0 || i == n - 1) ? 3.0 * ih2 : 2.0 * ih2;
        case AxisBC::even:
            return (i == 0 || i == n - 1) ? 1.0 * ih2 : 2.0 * ih2;
    }
    return 0.0;
}

} // namespace

void helmholtz_diag(Array3& out, CompSpec s, Spacing h, double alpha, double beta) {
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy),
                 iz2 = 1.0 / (h.hz * h.hz);
    int i0, i1, j0, j1, k0, k1;
    axis_range(s.bx, out.n0, i0, i1);
    axis_range(s.by, out.n1, j0, j1);
    axis_range(s.bz, out.n2, k0, k1);
    for (int k = k0; k < k1; ++k)
        for (int j = j0; j < j1; ++j)
            for (int i = i0; i < i1; ++i)
                out(i, j, k) = alpha + beta * (diag_axis(s.bx, i, out.n0, ix2) +
                                               diag_axis(s.by, j, out.n1, iy2) +
                                               diag_axis(s.bz, k, out.n2, iz2));
}

void helmholtz_diag(Array2& out, CompSpec2 s, Spacing h, double alpha, double beta) {
    const double ix2 = 1.0 / (h.hx * h.hx), iy2 = 1.0 / (h.hy * h.hy);
    int i0, i1, j0, j1;
    axis_range(s.bx, out.n0, i0, i1);
    axis_range(s.by, out.n1, j0, j1);
    for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i)
            out(i, j) = alpha + beta * (diag_axis(s.bx, i, out.n0, ix2) +
                                        diag_axis(s.by, j, out.n1, iy2));
}

namespace {

double dot_logical(const Array3& A, const Array3& B, Exec ex) {
    return reduce_slabs(A.n2, ex, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < A.n1; ++j)
            for (int i = 0; i < A.n0; ++i) acc += A(i, j, k) * B(i, j, k);
        return acc;
    });
}

double dot_logical(const Array2& A, const Array2& B, Exec ex) {
    return reduce_slabs(A.n1, ex, [&](int j) {
        double acc = 0.0;
        for (int i = 0; i < A.n0; ++i) acc += A(i, j) * B(i, j);
        return acc;
    });
}

template <class ArrT, class SpecT>
CGResult cg_impl(ArrT& x, const ArrT& b, SpecT s, Spacing h, double alpha, double beta,
                 double tol, int max_iter, Exec ex) {
    ArrT r = b, z = b, p = b, Ap = b;
    pin_walls(x, s);
    pin_walls(r, s);

    ArrT diag = b;
    helmholtz_diag(diag, s, h, alpha, beta);

    const double bnorm = std::sqrt(dot_logical(r, r, ex));
    CGResult res;
    if (bnorm == 0.0) {
        for (double& v : x.a) v = 0.0;
        res.converged = true;
        return res;
    }

    // r = b - A x
    helmholtz_apply(x, Ap, s, h, alpha, beta, ex);
    for (std::size_t q = 0; q < r.a.size(); ++q) r.a[q] = b.a[q] - Ap.a[q];
    pin_walls(r, s);

    auto precond = [&](const ArrT& rr, ArrT& zz) {
        for (std::size_t q = 0; q < rr.a.size(); ++q)
            zz.a[q] = (diag.a[q] != 0.0) ? rr.a[q] / diag.a[q] : 0.0;
    };

    precond(r, z);
    p = z;
    double rz = dot_logical(r, z, ex);
    double rnorm = std::sqrt(dot_logical(r, r, ex));

    for (int it = 0; it < max_iter; ++it) {
        if (rnorm <= tol * bnorm) {
            res.converged = true;
            res.iters = it;
            res.rel_residual = rnorm / bnorm;
            return res;
        }
        helmholtz_apply(p, Ap, s, h, alpha, beta, ex);
        const double pAp = dot_logical(p, Ap, ex);
        if (pAp <= 0.0) break; // operator not positive on this vector
        const double step = rz / pAp;
        for (std::size_t q = 0; q < x.a.size(); ++q) x.a[q] += step * p.a[q];
        for (std::size_t q = 0; q < r.a.size(); ++q) r.a[q] -= step * Ap.a[q];
        precond(r, z);
        const double rz2 = dot_logical(r, z, ex);
        const double dir = rz2 / rz;
        rz = rz2;
        for (std::size_t q = 0; q < p.a.size(); ++q) p.a[q] = z.a[q] + dir * p.a[q];
        rnorm = std::sqrt(dot_logical(r, r, ex));
    }
    res.converged = rnorm <= tol * bnorm;
    res.iters = max_iter;
    res.rel_residual = rnorm / bnorm;
    return res;
}

} // namespace

CGResult cg_helmholtz(Array3& x, const Array3& b, CompSpec s, Spacing h, double alpha,
                      double beta, double tol, int max_iter, Exec ex) {
    return cg_impl(x, b, s, h, alpha, beta, tol, max_iter, ex);
}

CGResult cg_helmholtz(Array2& x, const Array2& b, CompSpec2 s, Spacing h, double alpha,
                      double beta, double tol, int max_iter, Exec ex) {
    return cg_impl(x, b, s, h, alpha, beta, tol, max_iter, ex);
}

// ============================================================================
// Field dumps
// ============================================================================

namespace {

void write_binary(const std::string& path, const std::vector<double>& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw grid_error("cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!os) throw grid_error("write failed: " + path);
}

std::vector<double> logical_copy(const Array3& f) {
    std::vector<double> out;
    out.reserve(f.count());
    for (int k = 0; k < f.n2; ++k)
        for (int j = 0; j < f.n1; ++j)
            for (int i = 0; i < f.n0; ++i) out.push_back(f(i, j, k));
    return out;
}

std::vector<double> logical_copy(const Array2& f) {
    std::vector<double> out;
    out.reserve(f.count());
    for (int j = 0; j < f.n1; ++j)
        for (int i = 0; i < f.n0; ++i) out.push_back(f(i, j));
    return out;
}

} // namespace

void dump_component(const std::string& path_base, const Array3& f, const Grid3D& g,
                    const std::string& component) {
    write_binary(path_base + ".bin", logical_copy(f));
    nlohmann::json j;
    j["schema_version"] = 1;
    j["component"] = component;
    j["shape"] = {f.n0, f.n1, f.n2};
    j["spacings"] = {g.dx, g.dy, g.dz};
    j["eps"] = g.eps;
    std::ofstream os(path_base + ".json");
    if (!os) throw grid_error("cannot open for writing: " + path_base + ".json");
    os << j.dump(2) << "\n";
}

void dump_component(const std::string& path_base, const Array2& f, const Grid2D& g,
                    const std::string& component) {
    write_binary(path_base + ".bin", logical_copy(f));
    nlohmann::json j;
    j["schema_version"] = 1;
    j["component"] = component;
    j["shape"] = {f.n0, f.n1};
    j["spacings"] = {g.dx, g.dy};
    std::ofstream os(path_base + ".json");
    if (!os) throw grid_error("cannot open for writing: " + path_base + ".json");
    os << j.dump(2) << "\n";
}

void dump_vfield(const std::string& dir, const std::string& name, const VField3D& f) {
    std::filesystem::create_directories(dir);
    dump_component(dir + "/" + name + ".u1", f.u, f.g, "u1");
    dump_component(dir + "/" + name + ".u2", f.v, f.g, "u2");
    dump_component(dir + "/" + name + ".u3", f.w, f.g, "u3");
}

void dump_vfield(const std::string& dir, const std::string& name, const VField2D& f) {
    std::filesystem::create_directories(dir);
    dump_component(dir + "/" + name + ".u1", f.u, f.g, "u1");
    dump_component(dir + "/" + name + ".u2", f.v, f.g, "u2");
}

std::vector<double> load_component(const std::string& path_base, std::vector<int>& shape) {
    std::ifstream js(path_base + ".json");
    if (!js) throw grid_error("cannot open: " + path_base + ".json");
    nlohmann::json j;
    js >> j;
    shape = j.at("shape").get<std::vector<int>>();
    std::size_t n = 1;
    for (int s : shape) n *= static_cast<std::size_t>(s);
    std::ifstream is(path_base + ".bin", std::ios::binary);
    if (!is) throw grid_error("cannot open: " + path_base + ".bin");
    std::vector<double> data(n);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != n * sizeof(double))
        throw grid_error("truncated dump: " + path_base + ".bin");
    return data;
}

} // namespace thinflow

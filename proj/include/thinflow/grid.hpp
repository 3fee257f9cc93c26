#pragma once

// Staggered (MAC) geometry of the thin box Q_eps = (0,lx) x (0,ly) x (0,eps)
// and of its 2D base Q, with the discrete calculus used everywhere else:
// inner products, Dirichlet forms, divergence, gradient, vector Laplacian.
//
// Layout. Velocity components live on faces, scalars on cell centers:
//   u1(i, j+1/2, k+1/2), i = 0..nx   u2(i+1/2, j, k+1/2), j = 0..ny
//   u3(i+1/2, j+1/2, k), k = 0..nz   p (i+1/2, j+1/2, k+1/2)
// Every array carries one ghost layer per side.
//
// Boundary conditions.
//   Lateral walls (x = 0,lx and y = 0,ly): no slip. Normal components are
//   pinned to zero on their wall faces; tangential components use odd ghost
//   reflection about the wall plane.
//   Top/bottom (z = 0,eps): free slip. u3 is pinned to zero on the z faces;
//   u1, u2 use even ghost reflection (zero vertical shear); u3 ghosts are odd
//   about the face. Scalars use even (Neumann) ghosts on all sides.
//
// Quadrature: midpoint rule. A dof on its own wall face carries half weight;
// all other dofs carry the full cell volume. Pinned dofs are exactly the
// half-weight ones, so on admissible fields plain sums times the cell volume
// equal the weighted inner product.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinflow/kernels.hpp"

namespace thinflow {

// ============================================================================
// Grids
// ============================================================================

struct Grid2D {
    int nx = 0, ny = 0;
    double lx = 0, ly = 0;
    double dx = 0, dy = 0;
};

struct Grid3D {
    int nx = 0, ny = 0, nz = 0;
    double lx = 0, ly = 0;
    double eps = 0; // thickness, 0 < eps < 1/2
    double dx = 0, dy = 0, dz = 0;

    Grid2D base() const { return Grid2D{nx, ny, lx, ly, dx, dy}; }
};

Grid3D make_grid3d(int nx, int ny, int nz, double lx, double ly, double eps);
Grid2D make_grid2d(int nx, int ny, double lx, double ly);

inline bool same_grid(const Grid3D& a, const Grid3D& b) {
    return a.nx == b.nx && a.ny == b.ny && a.nz == b.nz && a.lx == b.lx &&
           a.ly == b.ly && a.eps == b.eps;
}
inline bool same_grid(const Grid2D& a, const Grid2D& b) {
    return a.nx == b.nx && a.ny == b.ny && a.lx == b.lx && a.ly == b.ly;
}
// The 3D grid whose horizontal section matches the 2D grid.
inline bool paired(const Grid3D& g3, const Grid2D& g2) {
    return g3.nx == g2.nx && g3.ny == g2.ny && g3.lx == g2.lx && g3.ly == g2.ly;
}

// ============================================================================
// Arrays with one ghost layer per side; x fastest
// ============================================================================

struct Array3 {
    int n0 = 0, n1 = 0, n2 = 0; // logical extents
    int s1 = 0, s2 = 0;
    std::vector<double> a;

    void resize(int m0, int m1, int m2) {
        n0 = m0; n1 = m1; n2 = m2;
        s1 = n0 + 2;
        s2 = s1 * (n1 + 2);
        a.assign(static_cast<std::size_t>(s2) * (n2 + 2), 0.0);
    }
    std::size_t idx(int i, int j, int k) const {
        return static_cast<std::size_t>(i + 1) + static_cast<std::size_t>(s1) * (j + 1) +
               static_cast<std::size_t>(s2) * (k + 1);
    }
    double& operator()(int i, int j, int k) { return a[idx(i, j, k)]; }
    double operator()(int i, int j, int k) const { return a[idx(i, j, k)]; }
    std::size_t count() const {
        return static_cast<std::size_t>(n0) * n1 * n2;
    }
};

struct Array2 {
    int n0 = 0, n1 = 0;
    int s1 = 0;
    std::vector<double> a;

    void resize(int m0, int m1) {
        n0 = m0; n1 = m1;
        s1 = n0 + 2;
        a.assign(static_cast<std::size_t>(s1) * (n1 + 2), 0.0);
    }
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i + 1) + static_cast<std::size_t>(s1) * (j + 1);
    }
    double& operator()(int i, int j) { return a[idx(i, j)]; }
    double operator()(int i, int j) const { return a[idx(i, j)]; }
    std::size_t count() const { return static_cast<std::size_t>(n0) * n1; }
};

// ============================================================================
// Component boundary classes
// ============================================================================

// pin:  dofs at index 0 and n-1 sit on the wall and are held at zero; ghosts
//       are odd about the wall face.
// odd:  the wall lies half a cell beyond the outermost dof; ghost = -mirror.
// even: ghost = +mirror (zero normal derivative).
enum class AxisBC : std::uint8_t { pin, odd, even };

struct CompSpec {
    AxisBC bx, by, bz;
};
struct CompSpec2 {
    AxisBC bx, by;
};

inline constexpr CompSpec spec_u1{AxisBC::pin, AxisBC::odd, AxisBC::even};
inline constexpr CompSpec spec_u2{AxisBC::odd, AxisBC::pin, AxisBC::even};
inline constexpr CompSpec spec_u3{AxisBC::odd, AxisBC::odd, AxisBC::pin};
inline constexpr CompSpec spec_scal3{AxisBC::even, AxisBC::even, AxisBC::even};
inline constexpr CompSpec2 spec2_u1{AxisBC::pin, AxisBC::odd};
inline constexpr CompSpec2 spec2_u2{AxisBC::odd, AxisBC::pin};
inline constexpr CompSpec2 spec2_scal{AxisBC::even, AxisBC::even};

void fill_ghosts(Array3& f, CompSpec s);
void fill_ghosts(Array2& f, CompSpec2 s);
void pin_walls(Array3& f, CompSpec s);  // zeroes wall-face dofs on pin axes
void pin_walls(Array2& f, CompSpec2 s);

// ============================================================================
// Fields
// ============================================================================

struct SField3D {
    Grid3D g;
    Array3 c; // nx * ny * nz cell centers
};

struct VField3D {
    Grid3D g;
    Array3 u; // (nx+1) * ny * nz
    Array3 v; // nx * (ny+1) * nz
    Array3 w; // nx * ny * (nz+1)
};

struct SField2D {
    Grid2D g;
    Array2 c;
};

struct VField2D {
    Grid2D g;
    Array2 u; // (nx+1) * ny
    Array2 v; // nx * (ny+1)
};

SField3D make_sfield3(const Grid3D& g);
VField3D make_vfield3(const Grid3D& g);
SField2D make_sfield2(const Grid2D& g);
VField2D make_vfield2(const Grid2D& g);

// Enforces the boundary conditions: pins wall faces and refreshes ghosts.
void apply_bc(VField3D& f);
void apply_bc(VField2D& f);
void apply_bc(SField3D& f);
void apply_bc(SField2D& f);

// Deterministic pseudo-random fill of logical entries, uniform in [-1,1],
// keyed by (seed, tag, linear index). Ghosts untouched.
void fill_random(Array3& f, std::uint64_t seed, std::uint64_t tag);
void fill_random(Array2& f, std::uint64_t seed, std::uint64_t tag);
// Random field with boundary conditions applied (pins zeroed, ghosts filled).
VField3D random_vfield3(const Grid3D& g, std::uint64_t seed);
VField2D random_vfield2(const Grid2D& g, std::uint64_t seed);
SField3D random_sfield3(const Grid3D& g, std::uint64_t seed);

// Linear algebra on whole fields.
void axpy(VField3D& y, double a, const VField3D& x); // y += a*x, logical entries
void axpy(VField2D& y, double a, const VField2D& x);
void scale(VField3D& f, double a);
void scale(VField2D& f, double a);

// ============================================================================
// Inner products and norms (midpoint quadrature)
// ============================================================================

double inner_l2(const SField3D& a, const SField3D& b, Exec ex = exec_default());
double inner_l2(const VField3D& a, const VField3D& b, Exec ex = exec_default());
double inner_l2(const SField2D& a, const SField2D& b, Exec ex = exec_default());
double inner_l2(const VField2D& a, const VField2D& b, Exec ex = exec_default());
double norm_l2(const VField3D& a, Exec ex = exec_default());
double norm_l2(const VField2D& a, Exec ex = exec_default());
double norm_l2(const SField3D& a, Exec ex = exec_default());
double norm_l2(const SField2D& a, Exec ex = exec_default());

// Dirichlet form sum_{c,d} <D_d a_c, D_d b_c> with the ghost-consistent
// one-sided closures at walls; equals <(-Lap)a, b> on admissible fields.
// Ghost values are not read; wall differences use their closed forms.
double dirichlet_form(const VField3D& a, const VField3D& b, Exec ex = exec_default());
double dirichlet_form(const VField2D& a, const VField2D& b, Exec ex = exec_default());

// Lp norm of the pointwise speed |u| sampled at cell centers, p in {2,3,6}.
double norm_lp_centers(const VField3D& a, int p, Exec ex = exec_default());

// One direction of the Dirichlet form (0 = x, 1 = y, 2 = z).
double dirichlet_form_dir(const VField3D& a, const VField3D& b, int dir,
                          Exec ex = exec_default());

// L2 norm of the vertical derivative of each component (staggered d/dz).
double norm_dz(const VField3D& a, Exec ex = exec_default());

// ============================================================================
// Differential operators
// ============================================================================

SField3D divergence3d(const VField3D& u, Exec ex = exec_default());
VField3D gradient3d(const SField3D& p, Exec ex = exec_default());
// Componentwise vector Laplacian with the ghost boundary closures; output is
// zero on pinned dofs. Input ghosts must be current.
VField3D laplacian3d(const VField3D& u, Exec ex = exec_default());

SField2D divergence2d(const VField2D& u, Exec ex = exec_default());
VField2D gradient2d(const SField2D& p, Exec ex = exec_default());
VField2D laplacian2d(const VField2D& u, Exec ex = exec_default());

double max_abs_div(const VField3D& u);
double max_abs_div(const VField2D& u);

// ============================================================================
// Component kernels (shared by the solvers; serial reference via Exec)
// ============================================================================

struct Spacing {
    double hx, hy, hz;
};

// out = alpha*in - beta*Lap(in) at unpinned dofs; pinned dofs get 0.
// Fills the input's ghosts first (in is mutated only in its ghost shell).
void helmholtz_apply(Array3& in, Array3& out, CompSpec s, Spacing h, double alpha,
                     double beta, Exec ex);
void helmholtz_apply(Array2& in, Array2& out, CompSpec2 s, Spacing h, double alpha,
                     double beta, Exec ex);
// Diagonal of the operator above (for Jacobi preconditioning).
void helmholtz_diag(Array3& out, CompSpec s, Spacing h, double alpha, double beta);
void helmholtz_diag(Array2& out, CompSpec2 s, Spacing h, double alpha, double beta);

struct CGResult {
    int iters = 0;
    double rel_residual = 0;
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradients on the unpinned dofs, matrix-free.
// x is the initial guess on entry and the solution on exit.
CGResult cg_helmholtz(Array3& x, const Array3& b, CompSpec s, Spacing h, double alpha,
                      double beta, double tol, int max_iter, Exec ex);
CGResult cg_helmholtz(Array2& x, const Array2& b, CompSpec2 s, Spacing h, double alpha,
                      double beta, double tol, int max_iter, Exec ex);

// ============================================================================
// Field dumps: flat little-endian binary plus JSON sidecar
// ============================================================================

void dump_component(const std::string& path_base, const Array3& f, const Grid3D& g,
                    const std::string& component);
void dump_component(const std::string& path_base, const Array2& f, const Grid2D& g,
                    const std::string& component);
void dump_vfield(const std::string& dir, const std::string& name, const VField3D& f);
void dump_vfield(const std::string& dir, const std::string& name, const VField2D& f);
// Reads back a dump written by dump_component; validates sidecar shape.
std::vector<double> load_component(const std::string& path_base, std::vector<int>& shape);

struct grid_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace thinflow

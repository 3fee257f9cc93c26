#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "thinflow/grid.hpp"
#include "thinflow/rng.hpp"

using namespace thinflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Direct transcription of the quadrature rule, summed in plain loop order.
// Independent of the slab-reduced production path.
double naive_weight(AxisBC b, int i, int n) {
    return (b == AxisBC::pin && (i == 0 || i == n - 1)) ? 0.5 : 1.0;
}

double naive_inner_comp(const Array3& A, const Array3& B, CompSpec s, double vol) {
    double acc = 0.0;
    for (int k = 0; k < A.n2; ++k)
        for (int j = 0; j < A.n1; ++j)
            for (int i = 0; i < A.n0; ++i)
                acc += naive_weight(s.bx, i, A.n0) * naive_weight(s.by, j, A.n1) *
                       naive_weight(s.bz, k, A.n2) * A(i, j, k) * B(i, j, k);
    return vol * acc;
}

double naive_inner_comp(const Array2& A, const Array2& B, CompSpec2 s, double vol) {
    double acc = 0.0;
    for (int j = 0; j < A.n1; ++j)
        for (int i = 0; i < A.n0; ++i)
            acc += naive_weight(s.bx, i, A.n0) * naive_weight(s.by, j, A.n1) *
                   A(i, j) * B(i, j);
    return vol * acc;
}

double rel_err(double got, double want) {
    const double scale = std::max(std::fabs(want), 1e-30);
    return std::fabs(got - want) / scale;
}

} // namespace

TEST_CASE("grid construction and validation") {
    Grid3D g = make_grid3d(8, 8, 4, 1.0, 1.0, 0.25);
    CHECK(g.dx == 0.125);
    CHECK(g.dy == 0.125);
    CHECK(g.dz == 0.0625);
    CHECK(g.dz * g.nz == g.eps);

    Grid2D b = g.base();
    CHECK(b.nx == 8);
    CHECK(b.dx == 0.125);
    CHECK(paired(g, b));
    CHECK(same_grid(g, make_grid3d(8, 8, 4, 1.0, 1.0, 0.25)));
    CHECK(!same_grid(g, make_grid3d(8, 8, 5, 1.0, 1.0, 0.25)));

    CHECK_THROWS_AS(make_grid3d(8, 8, 4, 1.0, 1.0, 0.5), grid_error);
    CHECK_THROWS_AS(make_grid3d(8, 8, 4, 1.0, 1.0, 0.7), grid_error);
    CHECK_THROWS_AS(make_grid3d(8, 8, 4, 1.0, 1.0, 0.0), grid_error);
    CHECK_THROWS_AS(make_grid3d(8, 8, 4, 1.0, 1.0, -0.1), grid_error);
    CHECK_THROWS_AS(make_grid3d(1, 8, 4, 1.0, 1.0, 0.25), grid_error);
    CHECK_THROWS_AS(make_grid3d(8, 8, 1, 1.0, 1.0, 0.25), grid_error);
    CHECK_THROWS_AS(make_grid3d(8, 8, 4, 0.0, 1.0, 0.25), grid_error);
    CHECK_THROWS_AS(make_grid2d(8, 1, 1.0, 1.0), grid_error);
    CHECK_NOTHROW(make_grid3d(2, 2, 2, 1.0, 1.0, 0.25));
    CHECK_NOTHROW(make_grid3d(8, 8, 4, 1.0, 1.0, 0.49));
}

TEST_CASE("ghost reflection per axis class") {
    Grid3D g = make_grid3d(4, 3, 2, 1.0, 1.0, 0.25);
    VField3D f = make_vfield3(g);
    fill_random(f.u, 7, 1);
    fill_random(f.v, 7, 2);
    fill_random(f.w, 7, 3);
    apply_bc(f);

    // u1: x pinned (wall dofs zero, ghosts odd about the face)
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j) {
            CHECK(f.u(0, j, k) == 0.0);
            CHECK(f.u(g.nx, j, k) == 0.0);
            CHECK(f.u(-1, j, k) == -f.u(1, j, k));
            CHECK(f.u(g.nx + 1, j, k) == -f.u(g.nx - 1, j, k));
        }
    // u1: y odd (wall half a cell out), z even
    for (int k = 0; k < g.nz; ++k)
        for (int i = 0; i <= g.nx; ++i) {
            CHECK(f.u(i, -1, k) == -f.u(i, 0, k));
            CHECK(f.u(i, g.ny, k) == -f.u(i, g.ny - 1, k));
        }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            CHECK(f.u(i, j, -1) == f.u(i, j, 0));
            CHECK(f.u(i, j, g.nz) == f.u(i, j, g.nz - 1));
        }
    // u3: z pinned
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            CHECK(f.w(i, j, 0) == 0.0);
            CHECK(f.w(i, j, g.nz) == 0.0);
            CHECK(f.w(i, j, -1) == -f.w(i, j, 1));
        }

    SField3D p = random_sfield3(g, 11);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j) {
            CHECK(p.c(-1, j, k) == p.c(0, j, k));
            CHECK(p.c(g.nx, j, k) == p.c(g.nx - 1, j, k));
        }
}

TEST_CASE("inner product: reference values") {
    Grid3D g = make_grid3d(8, 8, 4, 1.0, 1.0, 0.25);

    VField3D z = make_vfield3(g);
    CHECK(inner_l2(z, z) == 0.0);
    CHECK(norm_l2(z) == 0.0);

    // Constant horizontal field (1,0,0): the half weights on the pinned wall
    // faces make the squared norm exactly lx*ly*eps.
    VField3D c = make_vfield3(g);
    for (double& x : c.u.a) x = 1.0;
    CHECK(rel_err(inner_l2(c, c), 0.25) <= 1e-15);

    SField3D one = make_sfield3(g);
    for (double& x : one.c.a) x = 1.0;
    CHECK(rel_err(inner_l2(one, one), 0.25) <= 1e-15);

    Grid2D g2 = make_grid2d(8, 8, 1.0, 1.0);
    VField2D c2 = make_vfield2(g2);
    for (double& x : c2.u.a) x = 1.0;
    CHECK(rel_err(inner_l2(c2, c2), 1.0) <= 1e-15);
}

TEST_CASE("inner product matches direct-summation oracle") {
    Grid3D g = make_grid3d(12, 10, 6, 1.3, 0.9, 0.25);
    const double vol = g.dx * g.dy * g.dz;
    VField3D a = random_vfield3(g, 101);
    VField3D b = random_vfield3(g, 202);
    const double want = naive_inner_comp(a.u, b.u, spec_u1, vol) +
                        naive_inner_comp(a.v, b.v, spec_u2, vol) +
                        naive_inner_comp(a.w, b.w, spec_u3, vol);
    CHECK(rel_err(inner_l2(a, b), want) <= 1e-13);

    SField3D p = random_sfield3(g, 303);
    SField3D q = random_sfield3(g, 404);
    CHECK(rel_err(inner_l2(p, q), naive_inner_comp(p.c, q.c, spec_scal3, vol)) <= 1e-13);

    Grid2D g2 = make_grid2d(12, 10, 1.3, 0.9);
    const double vol2 = g2.dx * g2.dy;
    VField2D a2 = random_vfield2(g2, 505);
    VField2D b2 = random_vfield2(g2, 606);
    const double want2 = naive_inner_comp(a2.u, b2.u, spec2_u1, vol2) +
                         naive_inner_comp(a2.v, b2.v, spec2_u2, vol2);
    CHECK(rel_err(inner_l2(a2, b2), want2) <= 1e-13);
}

TEST_CASE("gradient and divergence are adjoint") {
    Grid3D g = make_grid3d(12, 10, 6, 1.3, 0.9, 0.25);
    VField3D u = random_vfield3(g, 21);
    SField3D p = random_sfield3(g, 22);
    const double lhs = inner_l2(gradient3d(p), u);
    const double rhs = -inner_l2(p, divergence3d(u));
    CHECK(rel_err(lhs, rhs) <= 1e-12);

    Grid2D g2 = make_grid2d(12, 10, 1.3, 0.9);
    VField2D u2 = random_vfield2(g2, 23);
    SField2D p2 = make_sfield2(g2);
    fill_random(p2.c, 24, 4);
    const double lhs2 = inner_l2(gradient2d(p2), u2);
    const double rhs2 = -inner_l2(p2, divergence2d(u2));
    CHECK(rel_err(lhs2, rhs2) <= 1e-12);
}

TEST_CASE("divergence and gradient: pointwise checks") {
    Grid3D g = make_grid3d(8, 8, 4, 1.0, 1.0, 0.25);

    // Shear flow u1 = f(y,z): exactly divergence free.
    VField3D s = make_vfield3(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i)
                s.u(i, j, k) = std::sin(2.0 * j + 0.3 * k);
    CHECK(max_abs_div(s) == 0.0);

    // p = x at cell centers: unit x-gradient on interior faces, zero on walls.
    SField3D p = make_sfield3(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) p.c(i, j, k) = (i + 0.5) * g.dx;
    VField3D gp = gradient3d(p);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) {
                const double want = (i == 0 || i == g.nx) ? 0.0 : 1.0;
                CHECK(rel_err(gp.u(i, j, k), want) <= 1e-13);
            }
    for (int k = 1; k < g.nz; ++k) CHECK(gp.w(3, 3, k) == 0.0);
}

TEST_CASE("norm of vertical derivative") {
    Grid3D g = make_grid3d(8, 6, 4, 1.0, 1.0, 0.25);
    VField3D f = make_vfield3(g);
    // u1 linear in z: unit slope at every interior z-face.
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) f.u(i, j, k) = (k + 0.5) * g.dz;
    const double vol = g.dx * g.dy * g.dz;
    const double want = std::sqrt(vol * g.nx * g.ny * (g.nz - 1));
    CHECK(rel_err(norm_dz(f), want) <= 1e-13);

    // z-independent field has zero vertical derivative.
    VField3D h = make_vfield3(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) h.u(i, j, k) = std::sin(1.0 + i + 2.0 * j);
    CHECK(norm_dz(h) == 0.0);
}

TEST_CASE("Lp norms at cell centers") {
    Grid3D g = make_grid3d(8, 8, 4, 1.0, 1.0, 0.25);
    VField3D c = make_vfield3(g);
    for (double& x : c.u.a) x = 1.0;
    CHECK(rel_err(norm_lp_centers(c, 2), std::sqrt(0.25)) <= 1e-14);
    CHECK(rel_err(norm_lp_centers(c, 3), std::cbrt(0.25)) <= 1e-14);
    CHECK(rel_err(norm_lp_centers(c, 6), std::pow(0.25, 1.0 / 6.0)) <= 1e-14);

    VField3D r = random_vfield3(g, 77);
    VField3D r2 = r;
    scale(r2, 2.0);
    for (int p : {2, 3, 6})
        CHECK(rel_err(norm_lp_centers(r2, p), 2.0 * norm_lp_centers(r, p)) <= 1e-13);
    CHECK_THROWS_AS(norm_lp_centers(r, 4), grid_error);
}

TEST_CASE("summation by parts: <-Lap v, v> equals the Dirichlet form") {
    Grid3D g = make_grid3d(12, 10, 6, 1.3, 0.9, 0.25);
    VField3D v = random_vfield3(g, 31);
    VField3D lap = laplacian3d(v);
    scale(lap, -1.0);
    CHECK(rel_err(inner_l2(lap, v), dirichlet_form(v, v)) <= 1e-13);

    VField3D u = random_vfield3(g, 32);
    // Symmetry of the form.
    CHECK(rel_err(dirichlet_form(u, v), dirichlet_form(v, u)) <= 1e-13);
    // And agreement with <-Lap u, v>.
    VField3D lu = laplacian3d(u);
    scale(lu, -1.0);
    CHECK(rel_err(inner_l2(lu, v), dirichlet_form(u, v)) <= 1e-12);

    Grid2D g2 = make_grid2d(12, 10, 1.3, 0.9);
    VField2D v2 = random_vfield2(g2, 33);
    VField2D lap2 = laplacian2d(v2);
    scale(lap2, -1.0);
    CHECK(rel_err(inner_l2(lap2, v2), dirichlet_form(v2, v2)) <= 1e-13);
}

TEST_CASE("dirichlet form of constants and replicated fields") {
    Grid3D g = make_grid3d(8, 6, 4, 1.0, 1.0, 0.25);
    // A z-independent tangential field with even vertical ghosts has zero
    // vertical energy; its 3D form is eps times the 2D form of its section.
    Grid2D g2 = g.base();
    VField2D f2 = random_vfield2(g2, 51);
    VField3D f3 = make_vfield3(g);
    for (int k = 0; k < g.nz; ++k) {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) f3.u(i, j, k) = f2.u(i, j);
        for (int j = 0; j <= g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) f3.v(i, j, k) = f2.v(i, j);
    }
    apply_bc(f3);
    CHECK(rel_err(dirichlet_form(f3, f3), g.eps * dirichlet_form(f2, f2)) <= 1e-13);
    CHECK(rel_err(inner_l2(f3, f3), g.eps * inner_l2(f2, f2)) <= 1e-13);
}

TEST_CASE("helmholtz apply reproduces separable eigenmodes") {
    Grid3D g = make_grid3d(8, 6, 4, 1.3, 0.9, 0.25);
    const int a = 2, b = 1, m = 1;
    Array3 mode, out;
    mode.resize(g.nx + 1, g.ny, g.nz);
    out.resize(g.nx + 1, g.ny, g.nz);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i)
                mode(i, j, k) = std::sin(a * kPi * i / g.nx) *
                                std::sin(b * kPi * (j + 0.5) / g.ny) *
                                std::cos(m * kPi * (k + 0.5) / g.nz);
    const double lam = (2.0 - 2.0 * std::cos(a * kPi / g.nx)) / (g.dx * g.dx) +
                       (2.0 - 2.0 * std::cos(b * kPi / g.ny)) / (g.dy * g.dy) +
                       (2.0 - 2.0 * std::cos(m * kPi / g.nz)) / (g.dz * g.dz);
    helmholtz_apply(mode, out, spec_u1, Spacing{g.dx, g.dy, g.dz}, 0.0, 1.0, Exec{false});
    double worst = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 1; i < g.nx; ++i)
                worst = std::max(worst, std::fabs(out(i, j, k) - lam * mode(i, j, k)));
    CHECK(worst <= 1e-10 * lam);

    // Neumann operator annihilates constants.
    Array3 cst, cout;
    cst.resize(g.nx, g.ny, g.nz);
    cout.resize(g.nx, g.ny, g.nz);
    for (double& x : cst.a) x = 3.7;
    helmholtz_apply(cst, cout, spec_scal3, Spacing{g.dx, g.dy, g.dz}, 0.0, 1.0,
                    Exec{false});
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) CHECK(cout(i, j, k) == 0.0);
}

TEST_CASE("conjugate gradients: implicit viscous solve") {
    Grid3D g = make_grid3d(16, 12, 6, 1.0, 0.8, 0.25);
    const Spacing h{g.dx, g.dy, g.dz};
    const double alpha = 1.0, beta = 0.05 * 0.1;

    Array3 b, x, res;
    b.resize(g.nx + 1, g.ny, g.nz);
    x.resize(g.nx + 1, g.ny, g.nz);
    res.resize(g.nx + 1, g.ny, g.nz);
    fill_random(b, 61, 1);
    pin_walls(b, spec_u1);

    CGResult r = cg_helmholtz(x, b, spec_u1, h, alpha, beta, 1e-12, 500, Exec{false});
    CHECK(r.converged);

    helmholtz_apply(x, res, spec_u1, h, alpha, beta, Exec{false});
    double rn = 0.0, bn = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) {
                const double d = res(i, j, k) - b(i, j, k);
                rn += d * d;
                bn += b(i, j, k) * b(i, j, k);
            }
    CHECK(std::sqrt(rn / bn) <= 1e-11);

    // Warm start from the previous solution must not be slower.
    Array3 b2 = b;
    for (double& v : b2.a) v *= 1.01;
    Array3 x_cold;
    x_cold.resize(g.nx + 1, g.ny, g.nz);
    Array3 x_warm = x;
    CGResult rc = cg_helmholtz(x_cold, b2, spec_u1, h, alpha, beta, 1e-12, 500, Exec{false});
    CGResult rw = cg_helmholtz(x_warm, b2, spec_u1, h, alpha, beta, 1e-12, 500, Exec{false});
    CHECK(rc.converged);
    CHECK(rw.converged);
    CHECK(rw.iters <= rc.iters);

    // Zero right-hand side gives the zero solution immediately.
    Array3 z0, bz;
    z0.resize(g.nx + 1, g.ny, g.nz);
    bz.resize(g.nx + 1, g.ny, g.nz);
    fill_random(z0, 62, 1);
    CGResult rz = cg_helmholtz(z0, bz, spec_u1, h, alpha, beta, 1e-12, 500, Exec{false});
    CHECK(rz.converged);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) CHECK(z0(i, j, k) == 0.0);
}

TEST_CASE("conjugate gradients: singular Neumann solve with compatible data") {
    Grid3D g = make_grid3d(12, 12, 4, 1.0, 1.0, 0.25);
    const Spacing h{g.dx, g.dy, g.dz};
    Array3 b, x, res;
    b.resize(g.nx, g.ny, g.nz);
    x.resize(g.nx, g.ny, g.nz);
    res.resize(g.nx, g.ny, g.nz);
    fill_random(b, 63, 1);
    double mean = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) mean += b(i, j, k);
    mean /= b.count();
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) b(i, j, k) -= mean;

    CGResult r = cg_helmholtz(x, b, spec_scal3, h, 0.0, 1.0, 1e-10, 2000, Exec{false});
    CHECK(r.converged);
    helmholtz_apply(x, res, spec_scal3, h, 0.0, 1.0, Exec{false});
    double rn = 0.0, bn = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double d = res(i, j, k) - b(i, j, k);
                rn += d * d;
                bn += b(i, j, k) * b(i, j, k);
            }
    CHECK(std::sqrt(rn / bn) <= 1e-9);
}

TEST_CASE("parallel and serial reductions agree bitwise") {
    Grid3D g = make_grid3d(16, 12, 8, 1.0, 0.8, 0.25);
    VField3D a = random_vfield3(g, 71);
    VField3D b = random_vfield3(g, 72);
    CHECK(inner_l2(a, b, Exec{true}) == inner_l2(a, b, Exec{false}));
    CHECK(dirichlet_form(a, b, Exec{true}) == dirichlet_form(a, b, Exec{false}));
    CHECK(norm_lp_centers(a, 6, Exec{true}) == norm_lp_centers(a, 6, Exec{false}));

    set_default_parallel(false);
    const double s = inner_l2(a, b);
    set_default_parallel(true);
    CHECK(s == inner_l2(a, b));
}

TEST_CASE("pairwise summation is exact on power-of-two blocks of equal values") {
    std::vector<double> v(16, 0.1);
    CHECK(pairwise_sum(v) / 16 == 0.1);
    std::vector<double> w(8, 1.0 / 3.0);
    CHECK(pairwise_sum(w) / 8 == 1.0 / 3.0);
}

TEST_CASE("field dumps round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "thinflow_test_grid";
    fs::create_directories(dir);

    Grid3D g = make_grid3d(6, 5, 4, 1.0, 1.0, 0.25);
    VField3D f = random_vfield3(g, 81);
    dump_vfield(dir.string(), "state", f);

    std::vector<int> shape;
    std::vector<double> u = load_component((dir / "state.u1").string(), shape);
    REQUIRE(shape == std::vector<int>{g.nx + 1, g.ny, g.nz});
    std::size_t q = 0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) CHECK(u[q++] == f.u(i, j, k));

    std::vector<double> w = load_component((dir / "state.u3").string(), shape);
    REQUIRE(shape == std::vector<int>{g.nx, g.ny, g.nz + 1});

    fs::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "thinflow/avgops.hpp"
#include "thinflow/grid.hpp"
#include "thinflow/rng.hpp"

using namespace thinflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(std::fabs(want), 1e-30);
}

// u1 = cos(2*pi*(k+1/2)/nz), constant in x and y; zero columnwise mean.
VField3D vertical_mode(const Grid3D& g) {
    VField3D u = make_vfield3(g);
    for (int k = 0; k < g.nz; ++k) {
        const double c = std::cos(2.0 * kPi * (k + 0.5) / g.nz);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i <= g.nx; ++i) u.u(i, j, k) = c;
    }
    return u;
}

} // namespace

TEST_CASE("vertical mean: constants, linear profile, boundedness") {
    Grid3D g = make_grid3d(8, 6, 8, 1.0, 1.0, 0.25);

    SField3D c = make_sfield3(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) c.c(i, j, k) = 3.25;
    SField2D mc = m_eps(c);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) CHECK(mc.c(i, j) == 3.25);

    // psi = x3 sampled at midpoints averages to eps/2 by symmetry.
    SField3D lin = make_sfield3(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) lin.c(i, j, k) = (k + 0.5) * g.dz;
    SField2D ml = m_eps(lin);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) CHECK(rel_err(ml.c(i, j), g.eps / 2) <= 1e-15);

    for (int n = 0; n < 100; ++n) {
        SField3D psi = random_sfield3(g, mix64(900 + n));
        SField2D m = m_eps(psi);
        CHECK(inner_l2(m, m) <= (1.0 + 1e-12) * inner_l2(psi, psi) / g.eps);
    }
}

TEST_CASE("replicated means are exact fixed points for power-of-two nz") {
    Grid3D g = make_grid3d(6, 5, 8, 1.0, 1.0, 0.25);
    SField3D psi = random_sfield3(g, 42);
    SField3D hm = hat_m(psi);
    SField3D hmm = hat_m(hm);
    for (std::size_t q = 0; q < hm.c.a.size(); ++q) CHECK(hmm.c.a[q] == hm.c.a[q]);

    // tilde_m of a z-independent horizontal field is the identity, bitwise.
    VField2D v2 = random_vfield2(g.base(), 43);
    VField3D r = retract(v2, g);
    VField3D mr = tilde_m(r);
    for (std::size_t q = 0; q < r.u.a.size(); ++q) CHECK(mr.u.a[q] == r.u.a[q]);
    for (std::size_t q = 0; q < r.v.a.size(); ++q) CHECK(mr.v.a[q] == r.v.a[q]);

    // circ_m recovers the section exactly.
    VField2D back = circ_m(r);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) CHECK(back.u(i, j) == v2.u(i, j));
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) CHECK(back.v(i, j) == v2.v(i, j));
}

TEST_CASE("retract requires a paired grid") {
    Grid3D g = make_grid3d(8, 6, 4, 1.0, 1.0, 0.25);
    VField2D v = random_vfield2(make_grid2d(8, 5, 1.0, 1.0), 1);
    CHECK_THROWS_AS(retract(v, g), grid_error);
}

TEST_CASE("orthogonality and Pythagoras on random fields") {
    for (std::uint64_t s : {10ULL, 20ULL, 30ULL}) {
        Grid3D g = make_grid3d(10, 8, 8, 1.1, 0.9, 0.25);
        VField3D u = random_vfield3(g, s);
        VField3D v = random_vfield3(g, s + 1);
        scale(u, 1.0 / norm_l2(u));
        scale(v, 1.0 / norm_l2(v));

        CHECK(std::fabs(inner_l2(tilde_m(u), tilde_n(v))) <= 1e-13);
        CHECK(std::fabs(dirichlet_form(tilde_m(u), tilde_n(v))) <= 1e-13 *
              std::max(1.0, dirichlet_form(u, u)));

        OperatorReport p = check_pythagoras(u);
        CHECK(p.passed);
        CHECK(rel_err(p.lhs, p.rhs) <= 1e-12);
        OperatorReport pg = check_pythagoras_gradient(u);
        CHECK(pg.passed);
    }
}

TEST_CASE("scaling identities against hand-computed quadrature") {
    Grid3D g = make_grid3d(8, 6, 8, 1.0, 1.0, 0.25);
    VField2D v2 = random_vfield2(g.base(), 55);
    VField3D rv = retract(v2, g);

    // ||retract(v)||^2 = eps ||v||^2 via explicit summation of both sides.
    double s2d = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i) {
            const double w = (i == 0 || i == g.nx) ? 0.5 : 1.0;
            s2d += w * v2.u(i, j) * v2.u(i, j);
        }
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double w = (j == 0 || j == g.ny) ? 0.5 : 1.0;
            s2d += w * v2.v(i, j) * v2.v(i, j);
        }
    s2d *= g.dx * g.dy;
    CHECK(rel_err(inner_l2(rv, rv), g.eps * s2d) <= 1e-13);
    CHECK(rel_err(inner_l2(rv, rv), g.eps * inner_l2(v2, v2)) <= 1e-13);
    CHECK(rel_err(dirichlet_form(rv, rv), g.eps * dirichlet_form(v2, v2)) <= 1e-13);

    VField3D u = random_vfield3(g, 56);
    VField2D cu = circ_m(u);
    VField3D mu = tilde_m(u);
    CHECK(rel_err(inner_l2(mu, mu), g.eps * inner_l2(cu, cu)) <= 1e-13);
    CHECK(rel_err(inner_l2(rv, u), g.eps * inner_l2(v2, cu)) <= 1e-13);

    SField3D psi = random_sfield3(g, 57);
    SField2D mp = m_eps(psi);
    SField3D hp = hat_m(psi);
    CHECK(rel_err(inner_l2(hp, hp), g.eps * inner_l2(mp, mp)) <= 1e-13);
}

TEST_CASE("divergence-free construction and preservation") {
    Grid3D g = make_grid3d(12, 10, 8, 1.0, 0.8, 0.125);
    VField3D u = random_divfree_vfield3(g, 91);
    CHECK(max_abs_div(u) <= 1e-12);
    CHECK(max_abs_div(tilde_m(u)) <= 1e-12);
    CHECK(max_abs_div(tilde_n(u)) <= 1e-12);
    VField2D cu = circ_m(u);
    CHECK(max_abs_div(cu) <= 1e-12);
    CHECK(max_abs_div(retract(cu, g)) <= 1e-12);

    VField2D v = random_divfree_vfield2(g.base(), 92);
    CHECK(max_abs_div(v) <= 1e-12);
    // The construction gives a genuinely 3D field.
    CHECK(norm_l2(tilde_n(u)) > 0.0);
    CHECK(norm_dz(u) > 0.0);
}

TEST_CASE("Poincare ratio of the pure vertical mode matches its closed form") {
    for (int nz : {4, 8, 16}) {
        Grid3D g = make_grid3d(4, 3, nz, 1.0, 1.0, 0.25);
        VField3D u = vertical_mode(g);
        OperatorReport r = check_poincare(u);
        CHECK(r.applicable);
        CHECK(r.passed);
        const double want = 1.0 / (2.0 * nz * std::sin(kPi / nz));
        CHECK(rel_err(r.ratio, want) <= 1e-12);
        CHECK(r.ratio < 1.0);
    }
}

TEST_CASE("Poincare holds on random fields and flags the empty case") {
    Grid3D g = make_grid3d(8, 8, 8, 1.0, 1.0, 0.25);
    for (int n = 0; n < 100; ++n) {
        OperatorReport r = check_poincare(random_vfield3(g, mix64(700 + n)));
        CHECK(r.applicable);
        CHECK(r.passed);
        CHECK(r.ratio <= 1.0 + 5.0 * g.dz * g.dz);
    }
    OperatorReport rb = check_poincare_battery(g, 50, 123);
    CHECK(rb.passed);

    // z-independent field with zero vertical velocity: no fluctuation part.
    VField3D flat = retract(random_vfield2(g.base(), 5), g);
    OperatorReport r0 = check_poincare(flat);
    CHECK(!r0.applicable);
    CHECK(r0.passed);
}

TEST_CASE("Ladyzhenskaya constants of the vertical mode match direct quadrature") {
    Grid3D g = make_grid3d(6, 5, 8, 1.0, 1.0, 0.25);
    VField3D u = vertical_mode(g);

    // Hand quadrature on the mode c_k = cos(2 pi (k+1/2)/nz), constant in x,y.
    double s2 = 0.0, s3 = 0.0, s6 = 0.0, sd = 0.0;
    std::vector<double> c(g.nz);
    for (int k = 0; k < g.nz; ++k) c[k] = std::cos(2.0 * kPi * (k + 0.5) / g.nz);
    for (int k = 0; k < g.nz; ++k) {
        s2 += c[k] * c[k];
        s3 += std::pow(std::fabs(c[k]), 3);
        s6 += std::pow(c[k], 6);
        if (k >= 1) sd += (c[k] - c[k - 1]) * (c[k] - c[k - 1]);
    }

    const double vol = g.dx * g.dy * g.dz;
    // u1 is constant in x: the pinned-wall half weights sum to nx.
    const double l2sq = vol * g.nx * g.ny * s2;
    const double l6 = std::pow(vol * g.nx * g.ny * s6, 1.0 / 6.0);
    const double l3 = std::pow(vol * g.nx * g.ny * s3, 1.0 / 3.0);
    // Dirichlet form: odd y-walls contribute (1/2)(2c/dy)^2 per wall; z-faces
    // carry the successive differences; x differences vanish.
    const double dy_part = vol * g.nx * 4.0 / (g.dy * g.dy) * s2;
    const double dz_part = vol * g.nx * g.ny * sd / (g.dz * g.dz);
    const double vsq = l2sq + dy_part + dz_part;

    OperatorReport r = check_ladyzhenskaya(u);
    CHECK(r.applicable);
    CHECK(rel_err(r.lhs, l6 / std::sqrt(vsq)) <= 1e-10);
    CHECK(rel_err(r.rhs, l3 * l3 / (g.eps * vsq)) <= 1e-10);

    const double f1 = std::sqrt(l2sq) / g.eps + std::sqrt(dz_part);
    const double f2 = std::sqrt(l2sq) + std::sqrt(dy_part);
    const double want_aniso = l6 / (std::cbrt(f1) * std::pow(f2, 2.0 / 3.0));
    CHECK(rel_err(lady_aniso_constant(u), want_aniso) <= 1e-10);

    OperatorReport rz = check_ladyzhenskaya(make_vfield3(g));
    CHECK(!rz.applicable);
}

TEST_CASE("anisotropic constant is flat across the eps ladder") {
    const std::vector<double> ladder{0.25, 0.125, 0.0625, 0.03125};
    OperatorReport r = check_ladyzhenskaya_trend(8, 8, 8, 1.0, 1.0, ladder, 20, 2024);
    CHECK(r.applicable);
    CHECK(r.passed);
    CHECK(r.lhs <= 0.1);
    // Profile reuse makes the constant eps-independent to rounding.
    CHECK(r.lhs <= 1e-12);
}

TEST_CASE("lemma battery passes on a ladder of grids") {
    for (double eps : {0.25, 0.0625}) {
        Grid3D g = make_grid3d(12, 10, 8, 1.0, 1.0, eps);
        std::vector<OperatorReport> reports = run_lemma_battery(g, 20, 77);
        CHECK(reports.size() >= 20);
        for (const OperatorReport& r : reports) {
            INFO(r.name, ": lhs=", r.lhs, " rhs=", r.rhs, " tol=", r.tolerance);
            CHECK(r.passed);
        }
    }
}

TEST_CASE("report pass rules") {
    OperatorReport a = identity_report("x", 1.0 + 1e-15, 1.0, 1e-13);
    CHECK(a.passed);
    OperatorReport b = identity_report("x", 1.0 + 1e-10, 1.0, 1e-13);
    CHECK(!b.passed);
    OperatorReport c = inequality_report("x", 0.9, 1.0, 0.0);
    CHECK(c.passed);
    OperatorReport d = inequality_report("x", 1.1, 1.0, 0.05);
    CHECK(!d.passed);
}

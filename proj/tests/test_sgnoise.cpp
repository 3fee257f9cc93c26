#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "thinflow/avgops.hpp"
#include "thinflow/grid.hpp"
#include "thinflow/sgnoise.hpp"

using namespace thinflow;

namespace {

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(std::fabs(want), 1e-30);
}

ForcingFamily small_family(const Grid2D& base, const std::vector<Grid3D>& grids,
                           int n_modes) {
    std::vector<VField2D> modes;
    for (int j = 0; j < n_modes; ++j) modes.push_back(trig_mode(base, 1 + j, 1, 0.7));
    VField2D f = bump_mode(base, 0.3);
    return make_forcing(base, modes, f, grids);
}

} // namespace

TEST_CASE("path construction: validation, determinism, initial value") {
    CHECK_THROWS_AS(make_paths(2, -0.1, 1.0, 7), forcing_error);
    CHECK_THROWS_AS(make_paths(2, 0.0, 1.0, 7), forcing_error);
    CHECK_THROWS_AS(make_paths(2, 0.1, 0.0, 7), forcing_error);
    CHECK_THROWS_AS(make_paths(2, 0.3, 1.0, 7), forcing_error);
    CHECK_THROWS_AS(make_paths(-1, 0.1, 1.0, 7), forcing_error);

    BrownianPaths p = make_paths(3, 0.125, 1.0, 99);
    CHECK(p.n_steps == 8);
    CHECK(p.increments.size() == 24);
    for (int j = 0; j < 3; ++j) CHECK(p.path_value(0, j) == 0.0);
    CHECK(p.path_value(2, 1) == p.dW(0, 1) + p.dW(1, 1));

    BrownianPaths q = make_paths(3, 0.125, 1.0, 99);
    CHECK(p.increments == q.increments);
    BrownianPaths r = make_paths(3, 0.125, 1.0, 100);
    CHECK(p.increments != r.increments);
}

TEST_CASE("increment sample moments sit in the three-sigma band") {
    const double dt = 0.01;
    BrownianPaths p = make_paths(5, dt, 200.0, 4242);
    const std::size_t n = p.increments.size();
    CHECK(n == 100000);
    double mean = 0.0;
    for (double x : p.increments) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : p.increments) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);

    CHECK(std::fabs(mean) <= 3.0 * std::sqrt(dt / static_cast<double>(n)));
    CHECK(std::fabs(var - dt) <= 3.0 * dt * std::sqrt(2.0 / static_cast<double>(n - 1)));
}

TEST_CASE("analytic modes are admissible and divergence-free") {
    Grid2D base = make_grid2d(16, 12, 1.0, 0.8);
    for (const VField2D& m : {trig_mode(base, 1, 1, 1.0), trig_mode(base, 3, 2, 0.5),
                              bump_mode(base, 2.0)}) {
        CHECK(max_abs_div(m) <= 1e-12);
        CHECK(norm_l2(m) > 0.0);
        for (int j = 0; j < base.ny; ++j) {
            CHECK(m.u(0, j) == 0.0);
            CHECK(m.u(base.nx, j) == 0.0);
        }
    }
    CHECK_THROWS_AS(trig_mode(base, 0, 1, 1.0), forcing_error);
}

TEST_CASE("family construction rejects bad input") {
    Grid2D base = make_grid2d(8, 8, 1.0, 1.0);
    std::vector<Grid3D> grids{make_grid3d(8, 8, 8, 1.0, 1.0, 0.25)};
    VField2D zero_f = make_vfield2(base);

    // A generic random field has nonzero divergence.
    std::vector<VField2D> bad{random_vfield2(base, 3)};
    CHECK_THROWS_AS(make_forcing(base, bad, zero_f, grids), forcing_error);

    std::vector<VField2D> off_grid{trig_mode(make_grid2d(6, 8, 1.0, 1.0), 1, 1, 1.0)};
    CHECK_THROWS_AS(make_forcing(base, off_grid, zero_f, grids), forcing_error);

    std::vector<Grid3D> unpaired{make_grid3d(10, 8, 8, 1.0, 1.0, 0.25)};
    std::vector<VField2D> ok{trig_mode(base, 1, 1, 1.0)};
    CHECK_THROWS_AS(make_forcing(base, ok, zero_f, unpaired), forcing_error);

    std::vector<VField2D> many(65, trig_mode(base, 1, 1, 1.0));
    CHECK_THROWS_AS(make_forcing(base, many, zero_f, grids), forcing_error);
}

TEST_CASE("empty family: zero stochastic forcing is valid") {
    Grid2D base = make_grid2d(8, 8, 1.0, 1.0);
    std::vector<Grid3D> grids{make_grid3d(8, 8, 4, 1.0, 1.0, 0.25)};
    ForcingFamily fam = make_forcing(base, {}, make_vfield2(base), grids);
    BrownianPaths p = make_paths(0, 0.1, 1.0, 1);
    CHECK(norm_l2(stochastic_increment(fam, p, 0)) == 0.0);
    CHECK(norm_l2(stochastic_increment(fam, p, 0, 0)) == 0.0);
    CHECK(hs_norm_sq(fam) == 0.0);
}

TEST_CASE("lift scaling and section identities hold per grid and mode") {
    Grid2D base = make_grid2d(12, 10, 1.0, 0.9);
    std::vector<Grid3D> grids;
    for (double eps : {0.25, 0.125, 0.0625, 0.03125})
        grids.push_back(make_grid3d(12, 10, 8, 1.0, 0.9, eps));
    ForcingFamily fam = small_family(base, grids, 4);

    for (int gi = 0; gi < fam.n_grids(); ++gi) {
        const double eps = fam.grids[gi].eps;
        for (int j = 0; j < fam.n_modes(); ++j) {
            const double l3 = inner_l2(fam.glifts[gi][j], fam.glifts[gi][j]);
            const double l2 = inner_l2(fam.g2d[j], fam.g2d[j]);
            CHECK(rel_err(l3, eps * l2) <= 1e-13);

            VField2D back = circ_m(fam.glifts[gi][j]);
            for (int q = 0; q < base.ny; ++q)
                for (int i = 0; i <= base.nx; ++i)
                    CHECK(back.u(i, q) == fam.g2d[j].u(i, q));
        }
        CHECK(rel_err(hs_norm_sq(fam, gi), eps * hs_norm_sq(fam)) <= 1e-13);

        VField2D fback = circ_m(fam.f3d[gi]);
        for (int q = 0; q <= base.ny; ++q)
            for (int i = 0; i < base.nx; ++i) CHECK(fback.v(i, q) == fam.f2d.v(i, q));
    }
}

TEST_CASE("single unit increment returns the coefficient itself") {
    Grid2D base = make_grid2d(8, 6, 1.0, 1.0);
    std::vector<Grid3D> grids{make_grid3d(8, 6, 8, 1.0, 1.0, 0.25)};
    std::vector<VField2D> modes{trig_mode(base, 2, 1, 1.3)};
    ForcingFamily fam = make_forcing(base, modes, make_vfield2(base), grids);

    BrownianPaths p = make_paths(1, 0.1, 1.0, 5);
    p.increments.assign(p.increments.size(), 0.0);
    p.increments[3] = 1.0; // step 3, the only mode

    VField2D inc = stochastic_increment(fam, p, 3);
    for (int j = 0; j < base.ny; ++j)
        for (int i = 0; i <= base.nx; ++i) CHECK(inc.u(i, j) == modes[0].u(i, j));

    VField3D inc3 = stochastic_increment(fam, p, 3, 0);
    const VField3D& lift = fam.glifts[0][0];
    for (int k = 0; k < grids[0].nz; ++k)
        for (int j = 0; j < base.ny; ++j)
            for (int i = 0; i <= base.nx; ++i)
                CHECK(inc3.u(i, j, k) == lift.u(i, j, k));

    CHECK(norm_l2(stochastic_increment(fam, p, 0)) == 0.0);
}

TEST_CASE("noise coupling: columnwise mean of the thin-box increment is exact") {
    Grid2D base = make_grid2d(10, 8, 1.0, 1.0);
    std::vector<Grid3D> grids;
    for (double eps : {0.25, 0.0625}) {
        grids.push_back(make_grid3d(10, 8, 8, 1.0, 1.0, eps));
        grids.push_back(make_grid3d(10, 8, 16, 1.0, 1.0, eps / 2));
    }
    ForcingFamily fam = small_family(base, grids, 3);
    BrownianPaths p = make_paths(3, 0.05, 0.5, 31);

    for (int s = 0; s < p.n_steps; ++s) {
        VField2D inc2 = stochastic_increment(fam, p, s);
        for (int gi = 0; gi < fam.n_grids(); ++gi) {
            VField2D folded = circ_m(stochastic_increment(fam, p, s, gi));
            for (int j = 0; j < base.ny; ++j)
                for (int i = 0; i <= base.nx; ++i)
                    CHECK(folded.u(i, j) == inc2.u(i, j));
            for (int j = 0; j <= base.ny; ++j)
                for (int i = 0; i < base.nx; ++i)
                    CHECK(folded.v(i, j) == inc2.v(i, j));
        }
    }
}

TEST_CASE("index validation") {
    Grid2D base = make_grid2d(8, 6, 1.0, 1.0);
    std::vector<Grid3D> grids{make_grid3d(8, 6, 4, 1.0, 1.0, 0.25)};
    ForcingFamily fam = small_family(base, grids, 2);
    BrownianPaths p = make_paths(2, 0.1, 1.0, 5);

    CHECK_THROWS_AS(stochastic_increment(fam, p, 10), std::out_of_range);
    CHECK_THROWS_AS(stochastic_increment(fam, p, -1), std::out_of_range);
    CHECK_THROWS_AS(stochastic_increment(fam, p, 0, 1), std::out_of_range);
    CHECK_THROWS_AS(hs_norm_sq(fam, 2), std::out_of_range);

    BrownianPaths mismatched = make_paths(3, 0.1, 1.0, 5);
    CHECK_THROWS_AS(stochastic_increment(fam, mismatched, 0), forcing_error);
}

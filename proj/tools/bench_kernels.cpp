// Timing table for the reduction kernels (serial reference vs the threaded
// path) plus the cost of one full integrator step at survey scale.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "thinflow/avgops.hpp"
#include "thinflow/grid.hpp"
#include "thinflow/nse.hpp"
#include "thinflow/sgnoise.hpp"

using namespace thinflow;

namespace {

using clk = std::chrono::steady_clock;

double ms_since(clk::time_point t0) {
    return std::chrono::duration<double, std::milli>(clk::now() - t0).count();
}

double g_sink = 0.0; // defeats dead-code elimination of the timed calls

template <class Fn>
double time_ms(int reps, Fn&& fn) {
    const auto t0 = clk::now();
    for (int r = 0; r < reps; ++r) g_sink += fn();
    return ms_since(t0) / reps;
}

} // namespace

int main(int argc, char** argv) {
    int nx = 64, ny = 64, nz = 16, steps = 20;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--grid") == 0 && i + 3 < argc) {
            nx = std::atoi(argv[i + 1]);
            ny = std::atoi(argv[i + 2]);
            nz = std::atoi(argv[i + 3]);
            i += 3;
        } else if (std::strcmp(argv[i], "--steps") == 0 && i + 1 < argc) {
            steps = std::atoi(argv[i + 1]);
            ++i;
        } else {
            std::fprintf(stderr, "usage: %s [--grid nx ny nz] [--steps n]\n", argv[0]);
            return 2;
        }
    }

    Grid3D g = make_grid3d(nx, ny, nz, 1.0, 1.0, 0.25);
    VField3D a = random_vfield3(g, 1);
    VField3D b = random_vfield3(g, 2);
    const Exec ser{false}, par{true};
    const int reps = 50;

    std::printf("reduction kernels on %dx%dx%d (%d reps)\n", nx, ny, nz, reps);
    std::printf("%-22s %10s %10s %8s\n", "kernel", "serial ms", "thread ms", "ratio");
    struct RowSpec {
        const char* name;
        double s, p;
    };
    std::vector<RowSpec> rows;
    rows.push_back({"inner_l2", time_ms(reps, [&] { return inner_l2(a, b, ser); }),
                    time_ms(reps, [&] { return inner_l2(a, b, par); })});
    rows.push_back({"dirichlet_form",
                    time_ms(reps, [&] { return dirichlet_form(a, b, ser); }),
                    time_ms(reps, [&] { return dirichlet_form(a, b, par); })});
    rows.push_back({"norm_lp_centers(6)",
                    time_ms(reps, [&] { return norm_lp_centers(a, 6, ser); }),
                    time_ms(reps, [&] { return norm_lp_centers(a, 6, par); })});
    for (const RowSpec& r : rows)
        std::printf("%-22s %10.3f %10.3f %8.2f\n", r.name, r.s, r.p,
                    r.p > 0 ? r.s / r.p : 0.0);

    Grid3D gs = make_grid3d(32, 32, 8, 1.0, 1.0, 0.25);
    Grid2D base = gs.base();
    std::vector<VField2D> modes{trig_mode(base, 1, 1, 0.5), trig_mode(base, 2, 1, 0.35),
                                trig_mode(base, 1, 2, 0.35), trig_mode(base, 2, 2, 0.25)};
    ForcingFamily fam = make_forcing(base, modes, bump_mode(base, 0.4), {gs});
    SolverParams prm; // survey defaults: nu = 0.05, dt = 2.5e-3
    prm.T = steps * prm.dt;
    BrownianPaths paths = make_paths(4, prm.dt, prm.T, 99);

    VField2D u0 = random_divfree_vfield2(base, 7);
    scale(u0, 1.0 / norm_l2(u0));
    VField3D u = retract(u0, gs);

    SField3D phi = make_sfield3(gs);
    long helm = 0, pois = 0;
    const auto t0 = clk::now();
    for (int s = 0; s < steps; ++s) {
        EnergyLedgerRow row;
        VField3D inc = stochastic_increment(fam, paths, s, 0);
        step_em(u, prm, fam.f3d[0], &inc, &phi, &row);
        helm += row.helmholtz_iters;
        pois += row.poisson_iters;
    }
    const double per_step = ms_since(t0) / steps;
    std::printf("\nintegrator step on 32x32x8: %.1f ms "
                "(helmholtz %.1f iters, poisson %.1f iters per step)\n",
                per_step, static_cast<double>(helm) / steps,
                static_cast<double>(pois) / steps);
    return 0;
}

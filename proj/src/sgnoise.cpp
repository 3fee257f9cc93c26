#include "thinflow/sgnoise.hpp"

#include <cmath>
#include <string>

#include "thinflow/avgops.hpp"
#include "thinflow/rng.hpp"

namespace thinflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDivFreeTol = 1e-10;
constexpr int kMaxModes = 64;

// u = D_y psi, v = -D_x psi on the staggered nodes; psi lives on cell
// corners (0..nx, 0..ny) and must vanish on the boundary ring so the curl
// is admissible. Divergence vanishes by telescoping.
VField2D curl_of_corner_psi(const Grid2D& g, const std::vector<double>& psi) {
    const int sx = g.nx + 1;
    VField2D f = make_vfield2(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i <= g.nx; ++i)
            f.u(i, j) = (psi[i + sx * (j + 1)] - psi[i + sx * j]) / g.dy;
    for (int j = 0; j <= g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            f.v(i, j) = -(psi[(i + 1) + sx * j] - psi[i + sx * j]) / g.dx;
    apply_bc(f);
    return f;
}

} // namespace

double BrownianPaths::path_value(int step, int mode) const {
    double w = 0.0;
    for (int s = 0; s < step; ++s) w += dW(s, mode);
    return w;
}

BrownianPaths make_paths(int n_modes, double dt, double T, std::uint64_t seed) {
    if (n_modes < 0) throw forcing_error("make_paths: negative mode count");
    if (!(dt > 0.0) || !(T > 0.0))
        throw forcing_error("make_paths: dt and T must be positive");
    const double steps = T / dt;
    const long long n = std::llround(steps);
    if (n < 1 || std::fabs(n * dt - T) > 1e-9 * T)
        throw forcing_error("make_paths: dt must divide T");

    BrownianPaths p;
    p.n_modes = n_modes;
    p.n_steps = static_cast<int>(n);
    p.dt = dt;
    p.seed = seed;
    p.increments.resize(static_cast<std::size_t>(p.n_steps) * n_modes);
    const double root_dt = std::sqrt(dt);
    for (int s = 0; s < p.n_steps; ++s)
        for (int j = 0; j < n_modes; ++j)
            p.increments[static_cast<std::size_t>(s) * n_modes + j] =
                root_dt * gauss1(seed, static_cast<std::uint64_t>(s),
                                 static_cast<std::uint64_t>(j), 0xb10cULL);
    return p;
}

ForcingFamily make_forcing(const Grid2D& base, const std::vector<VField2D>& g2d,
                           const VField2D& f2d, const std::vector<Grid3D>& grids) {
    if (static_cast<int>(g2d.size()) > kMaxModes)
        throw forcing_error("make_forcing: more than 64 noise modes");
    for (std::size_t j = 0; j < g2d.size(); ++j) {
        if (!same_grid(g2d[j].g, base))
            throw forcing_error("make_forcing: mode grid does not match base");
        if (max_abs_div(g2d[j]) > kDivFreeTol)
            throw forcing_error("make_forcing: mode " + std::to_string(j) +
                                " is not divergence-free");
    }
    if (!same_grid(f2d.g, base))
        throw forcing_error("make_forcing: forcing grid does not match base");
    for (const Grid3D& g3 : grids)
        if (!paired(g3, base))
            throw forcing_error("make_forcing: thin box does not share the base section");

    ForcingFamily fam;
    fam.base = base;
    fam.grids = grids;
    fam.g2d = g2d;
    fam.f2d = f2d;
    fam.glifts.resize(grids.size());
    fam.f3d.reserve(grids.size());
    for (std::size_t gi = 0; gi < grids.size(); ++gi) {
        fam.glifts[gi].reserve(g2d.size());
        for (const VField2D& g : g2d) fam.glifts[gi].push_back(retract(g, grids[gi]));
        fam.f3d.push_back(retract(f2d, grids[gi]));
    }
    return fam;
}

namespace {

void check_step(const ForcingFamily& fam, const BrownianPaths& paths, int step) {
    if (paths.n_modes != fam.n_modes())
        throw forcing_error("stochastic_increment: mode count mismatch");
    if (step < 0 || step >= paths.n_steps)
        throw std::out_of_range("stochastic_increment: step out of range");
}

} // namespace

VField2D stochastic_increment(const ForcingFamily& fam, const BrownianPaths& paths,
                              int step) {
    check_step(fam, paths, step);
    VField2D out = make_vfield2(fam.base);
    for (int j = 0; j < fam.n_modes(); ++j) axpy(out, paths.dW(step, j), fam.g2d[j]);
    fill_ghosts(out.u, spec2_u1);
    fill_ghosts(out.v, spec2_u2);
    return out;
}

VField3D stochastic_increment(const ForcingFamily& fam, const BrownianPaths& paths,
                              int step, int grid_index) {
    check_step(fam, paths, step);
    if (grid_index < 0 || grid_index >= fam.n_grids())
        throw std::out_of_range("stochastic_increment: grid index out of range");
    VField3D out = make_vfield3(fam.grids[grid_index]);
    for (int j = 0; j < fam.n_modes(); ++j)
        axpy(out, paths.dW(step, j), fam.glifts[grid_index][j]);
    fill_ghosts(out.u, spec_u1);
    fill_ghosts(out.v, spec_u2);
    fill_ghosts(out.w, spec_u3);
    return out;
}

double hs_norm_sq(const ForcingFamily& fam) {
    double s = 0.0;
    for (const VField2D& g : fam.g2d) s += inner_l2(g, g);
    return s;
}

double hs_norm_sq(const ForcingFamily& fam, int grid_index) {
    if (grid_index < 0 || grid_index >= fam.n_grids())
        throw std::out_of_range("hs_norm_sq: grid index out of range");
    double s = 0.0;
    for (const VField3D& g : fam.glifts[grid_index]) s += inner_l2(g, g);
    return s;
}

VField2D trig_mode(const Grid2D& g, int a, int b, double amplitude) {
    if (a < 1 || b < 1) throw forcing_error("trig_mode: wavenumbers must be >= 1");
    const int sx = g.nx + 1;
    std::vector<double> psi(static_cast<std::size_t>(sx) * (g.ny + 1), 0.0);
    for (int j = 1; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            psi[i + sx * j] = amplitude * std::sin(a * kPi * i / g.nx) *
                              std::sin(b * kPi * j / g.ny);
    return curl_of_corner_psi(g, psi);
}

VField2D bump_mode(const Grid2D& g, double amplitude) {
    const int sx = g.nx + 1;
    std::vector<double> psi(static_cast<std::size_t>(sx) * (g.ny + 1), 0.0);
    auto hump = [](double s) { return 16.0 * s * s * (1.0 - s) * (1.0 - s); };
    for (int j = 1; j < g.ny; ++j)
        for (int i = 1; i < g.nx; ++i)
            psi[i + sx * j] = amplitude * hump(static_cast<double>(i) / g.nx) *
                              hump(static_cast<double>(j) / g.ny);
    return curl_of_corner_psi(g, psi);
}

} // namespace thinflow

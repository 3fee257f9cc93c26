#include "thinflow/nse.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "thinflow/avgops.hpp"

namespace thinflow {

void validate(const SolverParams& prm) {
    if (!(prm.nu > 0.0)) throw solver_error("params: nu must be positive");
    if (!(prm.dt > 0.0) || !(prm.T > 0.0))
        throw solver_error("params: dt and T must be positive");
    if (!(prm.poisson_tol > 0.0) || !(prm.helmholtz_tol > 0.0))
        throw solver_error("params: tolerances must be positive");
    if (prm.poisson_max_iter < 1 || prm.helmholtz_max_iter < 1)
        throw solver_error("params: iteration caps must be positive");
    const long long n = std::llround(prm.T / prm.dt);
    if (n < 1 || std::fabs(static_cast<double>(n) * prm.dt - prm.T) > 1e-9 * prm.T)
        throw solver_error("params: dt must divide T");
}

int step_count(const SolverParams& prm) {
    validate(prm);
    return static_cast<int>(std::llround(prm.T / prm.dt));
}

// ============================================================================
// Skew advection
// ============================================================================

VField3D advect(const VField3D& t, const VField3D& v) {
    if (!same_grid(t.g, v.g)) throw grid_error("advect: grid mismatch");
    const Grid3D& g = t.g;
    VField3D out = make_vfield3(g);
    // Quarter factors: one half from the two-point transport average, one
    // half from the (m+ v_{+1} - m- v_{-1}) / 2h compact skew stencil.
    const double kx = 0.25 / g.dx, ky = 0.25 / g.dy, kz = 0.25 / g.dz;
    const Array3 &TU = t.u, &TV = t.v, &TW = t.w;
    const Array3 &VU = v.u, &VV = v.v, &VW = v.w;
    const int nx = g.nx, ny = g.ny, nz = g.nz;

    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i) {
                double s = kx * ((TU(i, j, k) + TU(i + 1, j, k)) * VU(i + 1, j, k) -
                                 (TU(i - 1, j, k) + TU(i, j, k)) * VU(i - 1, j, k));
                if (j < ny - 1)
                    s += ky * (TV(i - 1, j + 1, k) + TV(i, j + 1, k)) * VU(i, j + 1, k);
                if (j > 0)
                    s -= ky * (TV(i - 1, j, k) + TV(i, j, k)) * VU(i, j - 1, k);
                if (k < nz - 1)
                    s += kz * (TW(i - 1, j, k + 1) + TW(i, j, k + 1)) * VU(i, j, k + 1);
                if (k > 0)
                    s -= kz * (TW(i - 1, j, k) + TW(i, j, k)) * VU(i, j, k - 1);
                out.u(i, j, k) = s;
            }

    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double s = ky * ((TV(i, j, k) + TV(i, j + 1, k)) * VV(i, j + 1, k) -
                                 (TV(i, j - 1, k) + TV(i, j, k)) * VV(i, j - 1, k));
                if (i < nx - 1)
                    s += kx * (TU(i + 1, j - 1, k) + TU(i + 1, j, k)) * VV(i + 1, j, k);
                if (i > 0)
                    s -= kx * (TU(i, j - 1, k) + TU(i, j, k)) * VV(i - 1, j, k);
                if (k < nz - 1)
                    s += kz * (TW(i, j - 1, k + 1) + TW(i, j, k + 1)) * VV(i, j, k + 1);
                if (k > 0)
                    s -= kz * (TW(i, j - 1, k) + TW(i, j, k)) * VV(i, j, k - 1);
                out.v(i, j, k) = s;
            }

    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                double s = kz * ((TW(i, j, k) + TW(i, j, k + 1)) * VW(i, j, k + 1) -
                                 (TW(i, j, k - 1) + TW(i, j, k)) * VW(i, j, k - 1));
                if (i < nx - 1)
                    s += kx * (TU(i + 1, j, k - 1) + TU(i + 1, j, k)) * VW(i + 1, j, k);
                if (i > 0)
                    s -= kx * (TU(i, j, k - 1) + TU(i, j, k)) * VW(i - 1, j, k);
                if (j < ny - 1)
                    s += ky * (TV(i, j + 1, k - 1) + TV(i, j + 1, k)) * VW(i, j + 1, k);
                if (j > 0)
                    s -= ky * (TV(i, j, k - 1) + TV(i, j, k)) * VW(i, j - 1, k);
                out.w(i, j, k) = s;
            }

    return out;
}

VField2D advect(const VField2D& t, const VField2D& v) {
    if (!same_grid(t.g, v.g)) throw grid_error("advect: grid mismatch");
    const Grid2D& g = t.g;
    VField2D out = make_vfield2(g);
    const double kx = 0.25 / g.dx, ky = 0.25 / g.dy;
    const Array2 &TU = t.u, &TV = t.v;
    const Array2 &VU = v.u, &VV = v.v;
    const int nx = g.nx, ny = g.ny;

    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) {
            double s = kx * ((TU(i, j) + TU(i + 1, j)) * VU(i + 1, j) -
                             (TU(i - 1, j) + TU(i, j)) * VU(i - 1, j));
            if (j < ny - 1) s += ky * (TV(i - 1, j + 1) + TV(i, j + 1)) * VU(i, j + 1);
            if (j > 0) s -= ky * (TV(i - 1, j) + TV(i, j)) * VU(i, j - 1);
            out.u(i, j) = s;
        }

    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double s = ky * ((TV(i, j) + TV(i, j + 1)) * VV(i, j + 1) -
                             (TV(i, j - 1) + TV(i, j)) * VV(i, j - 1));
            if (i < nx - 1) s += kx * (TU(i + 1, j - 1) + TU(i + 1, j)) * VV(i + 1, j);
            if (i > 0) s -= kx * (TU(i, j - 1) + TU(i, j)) * VV(i - 1, j);
            out.v(i, j) = s;
        }

    return out;
}

double trilinear_b3(const VField3D& u, const VField3D& v, const VField3D& w) {
    return inner_l2(advect(u, v), w);
}

double trilinear_b2(const VField2D& u, const VField2D& v, const VField2D& w) {
    return inner_l2(advect(u, v), w);
}

// ============================================================================
// Leray projection
// ============================================================================

namespace {

double logical_mean(const Array3& f) {
    const double s = reduce_slabs(f.n2, exec_default(), [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < f.n1; ++j)
            for (int i = 0; i < f.n0; ++i) acc += f(i, j, k);
        return acc;
    });
    return s / static_cast<double>(f.count());
}

double logical_mean(const Array2& f) {
    const double s = reduce_slabs(f.n1, exec_default(), [&](int j) {
        double acc = 0.0;
        for (int i = 0; i < f.n0; ++i) acc += f(i, j);
        return acc;
    });
    return s / static_cast<double>(f.count());
}

[[noreturn]] void poisson_failure(const CGResult& r) {
    throw solver_error("projection: poisson solve stalled at relative residual " +
                       std::to_string(r.rel_residual));
}

} // namespace

CGResult project_div_free(VField3D& u, const SolverParams& prm, SField3D& phi) {
    validate(prm);
    if (!same_grid(u.g, phi.g)) throw grid_error("project_div_free: grid mismatch");
    const Grid3D& g = u.g;

    SField3D b = divergence3d(u);
    // The all-Neumann operator is singular with constant kernel; center the
    // data so it is compatible.
    const double mean = logical_mean(b.c);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) b.c(i, j, k) = mean - b.c(i, j, k);

    CGResult res = cg_helmholtz(phi.c, b.c, spec_scal3, {g.dx, g.dy, g.dz}, 0.0, 1.0,
                                prm.poisson_tol, prm.poisson_max_iter, exec_default());
    if (!res.converged) poisson_failure(res);
    apply_bc(phi);

    VField3D gp = gradient3d(phi);
    axpy(u, -1.0, gp);
    apply_bc(u);
    return res;
}

CGResult project_div_free(VField2D& u, const SolverParams& prm, SField2D& phi) {
    validate(prm);
    if (!same_grid(u.g, phi.g)) throw grid_error("project_div_free: grid mismatch");
    const Grid2D& g = u.g;

    SField2D b = divergence2d(u);
    const double mean = logical_mean(b.c);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) b.c(i, j) = mean - b.c(i, j);

    CGResult res = cg_helmholtz(phi.c, b.c, spec2_scal, {g.dx, g.dy, 1.0}, 0.0, 1.0,
                                prm.poisson_tol, prm.poisson_max_iter, exec_default());
    if (!res.converged) poisson_failure(res);
    apply_bc(phi);

    VField2D gp = gradient2d(phi);
    axpy(u, -1.0, gp);
    apply_bc(u);
    return res;
}

std::pair<VField3D, SField3D> project_div_free(const VField3D& u, const SolverParams& prm) {
    VField3D out = u;
    SField3D phi = make_sfield3(u.g);
    project_div_free(out, prm, phi);
    return {std::move(out), std::move(phi)};
}

std::pair<VField2D, SField2D> project_div_free(const VField2D& u, const SolverParams& prm) {
    VField2D out = u;
    SField2D phi = make_sfield2(u.g);
    project_div_free(out, prm, phi);
    return {std::move(out), std::move(phi)};
}

// ============================================================================
// One Euler-Maruyama step
// ============================================================================

void step_em(VField3D& u, const SolverParams& prm, const VField3D& f,
             const VField3D* noise_inc, SField3D* phi_warm, EnergyLedgerRow* row) {
    validate(prm);
    if (!same_grid(f.g, u.g)) throw solver_error("step_em: forcing grid mismatch");
    if (noise_inc && !same_grid(noise_inc->g, u.g))
        throw solver_error("step_em: noise grid mismatch");
    const double dt = prm.dt;
    const double nudt = prm.nu * prm.dt;

    VField3D adv =
        prm.advection == AdvectionScheme::skew ? advect(u, u) : make_vfield3(u.g);

    double e_old = 0, work_f = 0, skew_work = 0, work_noise = 0;
    if (row) {
        e_old = inner_l2(u, u);
        work_f = 2.0 * dt * inner_l2(f, u);
        skew_work = -2.0 * dt * inner_l2(adv, u);
        if (noise_inc) work_noise = 2.0 * inner_l2(*noise_inc, u);
    }

    VField3D a = u;
    axpy(a, dt, f);
    axpy(a, -dt, adv);
    if (noise_inc) axpy(a, 1.0, *noise_inc);

    double quad = 0;
    if (row) {
        VField3D d = a;
        axpy(d, -1.0, u);
        quad = inner_l2(d, d);
    }

    // Implicit diffusion, warm started from u^n.
    VField3D ustar = u;
    const Spacing h{u.g.dx, u.g.dy, u.g.dz};
    const CGResult h1 = cg_helmholtz(ustar.u, a.u, spec_u1, h, 1.0, nudt,
                                     prm.helmholtz_tol, prm.helmholtz_max_iter,
                                     exec_default());
    const CGResult h2 = cg_helmholtz(ustar.v, a.v, spec_u2, h, 1.0, nudt,
                                     prm.helmholtz_tol, prm.helmholtz_max_iter,
                                     exec_default());
    const CGResult h3 = cg_helmholtz(ustar.w, a.w, spec_u3, h, 1.0, nudt,
                                     prm.helmholtz_tol, prm.helmholtz_max_iter,
                                     exec_default());
    if (!h1.converged || !h2.converged || !h3.converged)
        throw solver_error("step_em: helmholtz solve stalled");
    apply_bc(ustar);

    double e_star = 0, d_star = 0, visc = 0;
    if (row) {
        e_star = inner_l2(ustar, ustar);
        d_star = 2.0 * nudt * dirichlet_form(ustar, ustar);
        VField3D d = a;
        axpy(d, -1.0, ustar);
        visc = inner_l2(d, d);
    }

    u = std::move(ustar);
    SField3D local_phi;
    if (!phi_warm) local_phi = make_sfield3(u.g);
    SField3D& phi = phi_warm ? *phi_warm : local_phi;
    const CGResult pr = project_div_free(u, prm, phi);

    if (row) {
        row->e_old = e_old;
        row->e_new = inner_l2(u, u);
        row->d_new = 2.0 * nudt * dirichlet_form(u, u);
        row->work_f = work_f;
        row->skew_work = skew_work;
        row->work_noise = work_noise;
        row->quad = quad;
        row->visc_damp = visc;
        row->proj_drop = e_star - row->e_new;
        row->grad_shift = d_star - row->d_new;
        row->residual = (row->e_new + row->d_new) -
                        (e_old + work_f + skew_work + work_noise + quad - visc -
                         row->proj_drop - row->grad_shift);
        row->div_inf = max_abs_div(u);
        row->helmholtz_iters = h1.iters + h2.iters + h3.iters;
        row->poisson_iters = pr.iters;
    }
}

void step_em_2d(VField2D& u, const SolverParams& prm, const VField2D& f,
                const VField2D* noise_inc, SField2D* phi_warm, EnergyLedgerRow* row) {
    validate(prm);
    if (!same_grid(f.g, u.g)) throw solver_error("step_em_2d: forcing grid mismatch");
    if (noise_inc && !same_grid(noise_inc->g, u.g))
        throw solver_error("step_em_2d: noise grid mismatch");
    const double dt = prm.dt;
    const double nudt = prm.nu * prm.dt;

    VField2D adv =
        prm.advection == AdvectionScheme::skew ? advect(u, u) : make_vfield2(u.g);

    double e_old = 0, work_f = 0, skew_work = 0, work_noise = 0;
    if (row) {
        e_old = inner_l2(u, u);
        work_f = 2.0 * dt * inner_l2(f, u);
        skew_work = -2.0 * dt * inner_l2(adv, u);
        if (noise_inc) work_noise = 2.0 * inner_l2(*noise_inc, u);
    }

    VField2D a = u;
    axpy(a, dt, f);
    axpy(a, -dt, adv);
    if (noise_inc) axpy(a, 1.0, *noise_inc);

    double quad = 0;
    if (row) {
        VField2D d = a;
        axpy(d, -1.0, u);
        quad = inner_l2(d, d);
    }

    VField2D ustar = u;
    const Spacing h{u.g.dx, u.g.dy, 1.0};
    const CGResult h1 = cg_helmholtz(ustar.u, a.u, spec2_u1, h, 1.0, nudt,
                                     prm.helmholtz_tol, prm.helmholtz_max_iter,
                                     exec_default());
    const CGResult h2 = cg_helmholtz(ustar.v, a.v, spec2_u2, h, 1.0, nudt,
                                     prm.helmholtz_tol, prm.helmholtz_max_iter,
                                     exec_default());
    if (!h1.converged || !h2.converged)
        throw solver_error("step_em_2d: helmholtz solve stalled");
    apply_bc(ustar);

    double e_star = 0, d_star = 0, visc = 0;
    if (row) {
        e_star = inner_l2(ustar, ustar);
        d_star = 2.0 * nudt * dirichlet_form(ustar, ustar);
        VField2D d = a;
        axpy(d, -1.0, ustar);
        visc = inner_l2(d, d);
    }

    u = std::move(ustar);
    SField2D local_phi;
    if (!phi_warm) local_phi = make_sfield2(u.g);
    SField2D& phi = phi_warm ? *phi_warm : local_phi;
    const CGResult pr = project_div_free(u, prm, phi);

    if (row) {
        row->e_old = e_old;
        row->e_new = inner_l2(u, u);
        row->d_new = 2.0 * nudt * dirichlet_form(u, u);
        row->work_f = work_f;
        row->skew_work = skew_work;
        row->work_noise = work_noise;
        row->quad = quad;
        row->visc_damp = visc;
        row->proj_drop = e_star - row->e_new;
        row->grad_shift = d_star - row->d_new;
        row->residual = (row->e_new + row->d_new) -
                        (e_old + work_f + skew_work + work_noise + quad - visc -
                         row->proj_drop - row->grad_shift);
        row->div_inf = max_abs_div(u);
        row->helmholtz_iters = h1.iters + h2.iters;
        row->poisson_iters = pr.iters;
    }
}

// ============================================================================
// Trajectories
// ============================================================================

Trajectory3D run3d(const VField3D& u0, const SolverParams& prm,
                   const ForcingFamily& fam, const BrownianPaths& paths) {
    const int n = step_count(prm);
    int gi = -1;
    for (int i = 0; i < fam.n_grids(); ++i)
        if (same_grid(fam.grids[i], u0.g)) {
            gi = i;
            break;
        }
    if (gi < 0) throw solver_error("run3d: state grid not found in forcing family");
    const bool noisy = fam.n_modes() > 0;
    if (noisy && paths.n_modes != fam.n_modes())
        throw solver_error("run3d: path and family mode counts differ");
    if (noisy && paths.n_steps < n) throw solver_error("run3d: paths cover too few steps");
    const double hs = hs_norm_sq(fam, gi);

    Trajectory3D tr;
    tr.g = u0.g;
    VField3D u = u0;
    apply_bc(u);
    SField3D phi = make_sfield3(u.g);

    const double nudt2 = 2.0 * prm.nu * prm.dt;
    tr.times.push_back(0.0);
    tr.energy.push_back(inner_l2(u, u));
    tr.enstrophy.push_back(dirichlet_form(u, u));
    {
        VField3D b = tilde_n(u);
        tr.beta_sq.push_back(inner_l2(b, b));
        tr.beta_dform.push_back(dirichlet_form(b, b));
    }
    tr.noise_work_cum.push_back(0.0);
    tr.ito_cum.push_back(0.0);
    tr.snap_steps.push_back(0);
    tr.states.push_back(u);

    for (int s = 0; s < n; ++s) {
        EnergyLedgerRow row;
        VField3D inc;
        if (noisy) inc = stochastic_increment(fam, paths, s, gi);
        step_em(u, prm, fam.f3d[gi], noisy ? &inc : nullptr, &phi, &row);
        row.t = (s + 1) * prm.dt;
        if (!std::isfinite(row.e_new))
            throw solver_error("run3d: non-finite state at step " + std::to_string(s + 1));

        tr.times.push_back(row.t);
        tr.energy.push_back(row.e_new);
        tr.enstrophy.push_back(row.d_new / nudt2);
        VField3D b = tilde_n(u);
        tr.beta_sq.push_back(inner_l2(b, b));
        tr.beta_dform.push_back(dirichlet_form(b, b));
        tr.noise_work_cum.push_back(tr.noise_work_cum.back() + row.work_noise);
        tr.ito_cum.push_back(tr.ito_cum.back() + hs * prm.dt);
        tr.ledger.push_back(row);

        if ((prm.snapshot_stride > 0 && (s + 1) % prm.snapshot_stride == 0) || s + 1 == n) {
            tr.snap_steps.push_back(s + 1);
            tr.states.push_back(u);
        }
    }
    return tr;
}

Trajectory2D run2d(const VField2D& u0, const SolverParams& prm,
                   const ForcingFamily& fam, const BrownianPaths& paths) {
    const int n = step_count(prm);
    if (!same_grid(u0.g, fam.base))
        throw solver_error("run2d: state grid does not match the family base");
    const bool noisy = fam.n_modes() > 0;
    if (noisy && paths.n_modes != fam.n_modes())
        throw solver_error("run2d: path and family mode counts differ");
    if (noisy && paths.n_steps < n) throw solver_error("run2d: paths cover too few steps");
    const double hs = hs_norm_sq(fam);

    Trajectory2D tr;
    tr.g = u0.g;
    VField2D u = u0;
    apply_bc(u);
    SField2D phi = make_sfield2(u.g);

    const double nudt2 = 2.0 * prm.nu * prm.dt;
    tr.times.push_back(0.0);
    tr.energy.push_back(inner_l2(u, u));
    tr.enstrophy.push_back(dirichlet_form(u, u));
    tr.noise_work_cum.push_back(0.0);
    tr.ito_cum.push_back(0.0);
    tr.snap_steps.push_back(0);
    tr.states.push_back(u);

    for (int s = 0; s < n; ++s) {
        EnergyLedgerRow row;
        VField2D inc;
        if (noisy) inc = stochastic_increment(fam, paths, s);
        step_em_2d(u, prm, fam.f2d, noisy ? &inc : nullptr, &phi, &row);
        row.t = (s + 1) * prm.dt;
        if (!std::isfinite(row.e_new))
            throw solver_error("run2d: non-finite state at step " + std::to_string(s + 1));

        tr.times.push_back(row.t);
        tr.energy.push_back(row.e_new);
        tr.enstrophy.push_back(row.d_new / nudt2);
        tr.noise_work_cum.push_back(tr.noise_work_cum.back() + row.work_noise);
        tr.ito_cum.push_back(tr.ito_cum.back() + hs * prm.dt);
        tr.ledger.push_back(row);

        if ((prm.snapshot_stride > 0 && (s + 1) % prm.snapshot_stride == 0) || s + 1 == n) {
            tr.snap_steps.push_back(s + 1);
            tr.states.push_back(u);
        }
    }
    return tr;
}

} // namespace thinflow

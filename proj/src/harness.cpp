#include "thinflow/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "thinflow/avgops.hpp"
#include "thinflow/nse.hpp"

namespace thinflow {

using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::pair<double, double> mean_se(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size() - 1);
    return {m, std::sqrt(s2 / static_cast<double>(v.size()))};
}

double sup_abs_diff(const VField2D& a, const VField2D& b) {
    double m = 0.0;
    for (int j = 0; j < a.u.n1; ++j)
        for (int i = 0; i < a.u.n0; ++i)
            m = std::max(m, std::fabs(a.u(i, j) - b.u(i, j)));
    for (int j = 0; j < a.v.n1; ++j)
        for (int i = 0; i < a.v.n0; ++i)
            m = std::max(m, std::fabs(a.v(i, j) - b.v(i, j)));
    return m;
}

SolverParams params_from(const SimConfig& c) {
    SolverParams prm;
    prm.nu = c.nu;
    prm.dt = c.dt;
    prm.T = c.T;
    prm.poisson_tol = c.tol.poisson;
    prm.helmholtz_tol = c.tol.helmholtz;
    return prm;
}

ForcingFamily build_family_over(const SimConfig& c, const std::vector<Grid3D>& grids) {
    Grid2D base = make_grid2d(c.nx, c.ny, c.lx, c.ly);
    std::vector<VField2D> modes;
    for (const ModeSpec& m : c.modes) {
        if (m.kind == "trig") {
            modes.push_back(trig_mode(base, m.a, m.b, m.amplitude));
        } else if (m.kind == "bump") {
            modes.push_back(bump_mode(base, m.amplitude));
        } else {
            std::filesystem::path p(m.path);
            VField2D f = load_vfield2(p.parent_path().empty() ? "." : p.parent_path().string(),
                                      p.filename().string(), base);
            scale(f, m.amplitude);
            modes.push_back(std::move(f));
        }
    }
    return make_forcing(base, modes, bump_mode(base, c.f_amplitude), grids);
}

// One application of the negative-order smoothing used by the modulus norm:
// componentwise Poisson solve followed by the Leray projection.
VField2D inv_laplace_project(const VField2D& d, const SolverParams& prm) {
    VField2D w = make_vfield2(d.g);
    Spacing h{d.g.dx, d.g.dy, 1.0};
    CGResult ru = cg_helmholtz(w.u, d.u, spec2_u1, h, 0.0, 1.0, prm.poisson_tol,
                               prm.poisson_max_iter, exec_default());
    CGResult rv = cg_helmholtz(w.v, d.v, spec2_u2, h, 0.0, 1.0, prm.poisson_tol,
                               prm.poisson_max_iter, exec_default());
    if (!ru.converged || !rv.converged)
        throw solver_error("negative-order norm solve stalled");
    apply_bc(w);
    SField2D phi = make_sfield2(d.g);
    project_div_free(w, prm, phi);
    return w;
}

// The V*-type size of a force field: <f, w> with -Lap w = f componentwise.
double dual_norm_sq(const VField2D& f, const SolverParams& prm) {
    if (norm_l2(f) == 0.0) return 0.0;
    VField2D w = make_vfield2(f.g);
    Spacing h{f.g.dx, f.g.dy, 1.0};
    CGResult ru = cg_helmholtz(w.u, f.u, spec2_u1, h, 0.0, 1.0, prm.poisson_tol,
                               prm.poisson_max_iter, exec_default());
    CGResult rv = cg_helmholtz(w.v, f.v, spec2_u2, h, 0.0, 1.0, prm.poisson_tol,
                               prm.poisson_max_iter, exec_default());
    if (!ru.converged || !rv.converged) throw solver_error("dual norm solve stalled");
    apply_bc(w);
    return inner_l2(f, w);
}

bool no_upward_trend(const SlopeFit& f) {
    // The ladder runs toward small eps, so growth as eps drops is a negative
    // log-log slope; tolerate slopes inside twice their own standard error.
    if (f.n < 2) return true;
    return f.slope >= -std::max(0.05, 2.0 * f.stderr_slope);
}

SlopeFit log_log_fit(const std::vector<double>& eps, const std::vector<double>& vals) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (!(vals[i] > 0.0)) return SlopeFit{};
        x.push_back(std::log(eps[i]));
        y.push_back(std::log(vals[i]));
    }
    if (x.size() < 2) return SlopeFit{};
    return fit_line(x, y);
}

} // namespace

ForcingFamily build_family(const SimConfig& c) {
    std::vector<Grid3D> grids;
    grids.reserve(c.eps_ladder.size());
    for (double eps : c.eps_ladder)
        grids.push_back(make_grid3d(c.nx, c.ny, c.nz, c.lx, c.ly, eps));
    return build_family_over(c, grids);
}

void verify_coupling(const ForcingFamily& fam, double tol) {
    for (int gi = 0; gi < fam.n_grids(); ++gi) {
        for (int j = 0; j < fam.n_modes(); ++j) {
            double d = sup_abs_diff(circ_m(fam.glifts[gi][j]), fam.g2d[j]);
            if (!(d <= tol))
                throw harness_error("noise coupling broken: grid " + std::to_string(gi) +
                                    " mode " + std::to_string(j) + " deviates by " +
                                    std::to_string(d));
        }
        double d = sup_abs_diff(circ_m(fam.f3d[gi]), fam.f2d);
        if (!(d <= tol))
            throw harness_error("force coupling broken: grid " + std::to_string(gi) +
                                " deviates by " + std::to_string(d));
    }
}

VField2D initial_data_2d(const SimConfig& c) {
    Grid2D base = make_grid2d(c.nx, c.ny, c.lx, c.ly);
    if (c.u0_norm == 0.0) return make_vfield2(base);
    VField2D u0 = random_divfree_vfield2(base, c.u0_seed);
    double n = norm_l2(u0);
    if (n == 0.0) throw harness_error("degenerate initial draw");
    scale(u0, c.u0_norm / n);
    return u0;
}

VField3D initial_data_3d(const SimConfig& c, const VField2D& u0, const Grid3D& g) {
    VField3D out = retract(u0, g);
    double target = c.perturbation_scale * c.u0_norm * std::sqrt(g.eps);
    if (target > 0.0) {
        // Well-prepared fluctuation: the smoothest horizontal vortex carried
        // by the lowest vertical mode. Its column mean cancels pairwise, the
        // vertical decay layer is as wide as the thin box allows, and its
        // self-advection is nearly a gradient, so the mean flow takes almost
        // no spurious kick while the layer relaxes.
        VField2D prof = trig_mode(g.base(), 1, 1, 1.0);
        VField3D pert = make_vfield3(g);
        for (int k = 0; k < g.nz; ++k) {
            const double phi = std::cos(kPi * (k + 0.5) / g.nz);
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i <= g.nx; ++i) pert.u(i, j, k) = prof.u(i, j) * phi;
            for (int j = 0; j <= g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) pert.v(i, j, k) = prof.v(i, j) * phi;
        }
        apply_bc(pert);
        double n = norm_l2(pert);
        if (n == 0.0) throw harness_error("degenerate perturbation profile");
        axpy(out, target / n, pert);
        apply_bc(out);
    }
    return out;
}

double modulus_of_continuity(const std::vector<VField2D>& series, double dt_series,
                             double delta, const SolverParams& prm) {
    if (delta == 0.0 || series.size() < 2) return 0.0;
    if (!(dt_series > 0.0)) throw harness_error("modulus needs a positive series spacing");
    if (delta < dt_series) throw harness_error("modulus window is below the series spacing");
    // The smoothing is linear, so pair norms reduce to plain L2 distances of
    // the per-snapshot smoothed fields.
    std::vector<VField2D> z;
    z.reserve(series.size());
    for (const VField2D& s : series)
        z.push_back(inv_laplace_project(inv_laplace_project(s, prm), prm));
    const int n = static_cast<int>(z.size());
    const int k = static_cast<int>(std::floor(delta / dt_series + 1e-9));
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j <= std::min(n - 1, i + k); ++j) {
            VField2D d = z[j];
            axpy(d, -1.0, z[i]);
            sup = std::max(sup, norm_l2(d));
        }
    }
    return sup;
}

ConvergenceReport run_convergence(const SimConfig& c, std::ostream* progress) {
    validate(c);
    const auto t_start = std::chrono::steady_clock::now();
    const int n_eps = static_cast<int>(c.eps_ladder.size());
    ForcingFamily fam = build_family(c);
    verify_coupling(fam, c.tol.coupling);

    SolverParams prm = params_from(c);
    const int n = step_count(prm);
    const VField2D u0 = initial_data_2d(c);
    std::vector<VField3D> u0_3d;
    for (int i = 0; i < n_eps; ++i)
        u0_3d.push_back(initial_data_3d(c, u0, fam.grids[i]));

    const int stride = c.snapshot_stride;
    std::vector<double> deltas;
    if (stride > 0 && n / stride >= 1) {
        double dt_snap = stride * c.dt;
        for (int mult : {1, 2, 4})
            if (mult <= n / stride) deltas.push_back(mult * dt_snap);
    }

    // Per-cell sample vectors, filled in sample order.
    struct CellAccum {
        std::vector<double> err, alpha_sup, alpha_energy, beta_sup, beta_grad, beta_p4;
        std::vector<double> u_sup, u_grad;          // p = 2 building blocks
        std::vector<std::vector<double>> mom_sup;   // [p index][sample]
        std::vector<std::vector<double>> mom_grad;
        double resid_max = 0.0, div_max = 0.0;
        std::vector<double> modulus; // running max per delta
    };
    const int n_p = static_cast<int>(c.p_list.size());
    std::vector<CellAccum> acc(n_eps);
    for (CellAccum& a : acc) {
        a.mom_sup.resize(n_p);
        a.mom_grad.resize(n_p);
        a.modulus.assign(deltas.size(), 0.0);
    }
    double resid2d_max = 0.0;
    std::vector<std::string> sample_errors;

    if (progress)
        *progress << "survey: " << c.n_samples << " samples, " << n_eps
                  << " thicknesses, " << n << " steps each\n";

    for (int k = 0; k < c.n_samples; ++k) {
        try {
            BrownianPaths paths =
                make_paths(fam.n_modes(), c.dt, c.T, c.base_seed + static_cast<std::uint64_t>(k));
            VField2D u2 = u0;
            SField2D phi2 = make_sfield2(u2.g);
            std::vector<VField3D> u3 = u0_3d;
            std::vector<SField3D> phi3;
            for (int i = 0; i < n_eps; ++i) phi3.push_back(make_sfield3(fam.grids[i]));

            struct PerEps {
                double err = 0, a_sup = 0, a_grad = 0, b_sup = 0, b_grad = 0;
                double e_sup = 0;
                std::vector<double> m_grad;
                std::vector<VField2D> snaps;
                double resid = 0, div = 0;
            };
            std::vector<PerEps> st(n_eps);
            for (PerEps& s : st) s.m_grad.assign(n_p, 0.0);

            auto absorb = [&](int i, int s_t, double e_known, double d_known) {
                // One state-time contribution; e/d below are ||u||^2 and D(u)
                // of the thin-box state, reused from the step ledger when the
                // caller has them.
                PerEps& a = st[i];
                const double w = (s_t == 0 || s_t == n) ? 0.5 * c.dt : c.dt;
                VField2D alpha = circ_m(u3[i]);
                VField2D diff = alpha;
                axpy(diff, -1.0, u2);
                a.err += w * inner_l2(diff, diff);
                a.a_sup = std::max(a.a_sup, inner_l2(alpha, alpha));
                a.a_grad += w * dirichlet_form(alpha, alpha);
                VField3D beta = tilde_n(u3[i]);
                a.b_sup = std::max(a.b_sup, inner_l2(beta, beta));
                a.b_grad += w * dirichlet_form(beta, beta);
                const double e = e_known >= 0 ? e_known : inner_l2(u3[i], u3[i]);
                const double d = d_known >= 0 ? d_known : dirichlet_form(u3[i], u3[i]);
                a.e_sup = std::max(a.e_sup, e);
                for (int pi = 0; pi < n_p; ++pi) {
                    const int p = c.p_list[pi];
                    const double fac = p == 2 ? 1.0 : std::pow(e, 0.5 * (p - 2));
                    a.m_grad[pi] += w * fac * d;
                }
                if (stride > 0 && s_t % stride == 0) a.snaps.push_back(std::move(alpha));
            };

            for (int i = 0; i < n_eps; ++i) absorb(i, 0, -1.0, -1.0);

            for (int s = 0; s < n; ++s) {
                VField2D inc2 = stochastic_increment(fam, paths, s);
                EnergyLedgerRow row2;
                step_em_2d(u2, prm, fam.f2d, &inc2, &phi2, &row2);
                if (row2.e_old > 0)
                    resid2d_max = std::max(resid2d_max, std::fabs(row2.residual) / row2.e_old);
                for (int i = 0; i < n_eps; ++i) {
                    VField3D inc3 = stochastic_increment(fam, paths, s, i);
                    EnergyLedgerRow row;
                    step_em(u3[i], prm, fam.f3d[i], &inc3, &phi3[i], &row);
                    if (row.e_old > 0)
                        st[i].resid = std::max(st[i].resid, std::fabs(row.residual) / row.e_old);
                    st[i].div = std::max(st[i].div, row.div_inf);
                    absorb(i, s + 1, row.e_new, row.d_new / (2.0 * c.nu * c.dt));
                }
            }

            for (int i = 0; i < n_eps; ++i) {
                PerEps& a = st[i];
                CellAccum& out = acc[i];
                out.err.push_back(a.err);
                out.alpha_sup.push_back(a.a_sup);
                out.alpha_energy.push_back(a.a_sup + c.nu * a.a_grad);
                out.beta_sup.push_back(a.b_sup);
                out.beta_grad.push_back(a.b_grad);
                out.beta_p4.push_back(a.b_sup * a.b_sup);
                out.u_sup.push_back(a.e_sup);
                out.u_grad.push_back(n_p > 0 && c.p_list[0] == 2 ? a.m_grad[0] : 0.0);
                for (int pi = 0; pi < n_p; ++pi) {
                    const int p = c.p_list[pi];
                    out.mom_sup[pi].push_back(std::pow(a.e_sup, 0.5 * p));
                    out.mom_grad[pi].push_back(a.m_grad[pi]);
                }
                out.resid_max = std::max(out.resid_max, a.resid);
                out.div_max = std::max(out.div_max, a.div);
                for (std::size_t d = 0; d < deltas.size(); ++d)
                    out.modulus[d] = std::max(
                        out.modulus[d],
                        modulus_of_continuity(a.snaps, stride * c.dt, deltas[d], prm));
            }
        } catch (const std::exception& e) {
            sample_errors.push_back("sample " + std::to_string(k) + ": " + e.what());
        }
        if (progress) {
            const double el = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - t_start)
                                  .count();
            char line[96];
            std::snprintf(line, sizeof line, "sample %d/%d done, %.1f s elapsed\n", k + 1,
                          c.n_samples, el);
            *progress << line << std::flush;
        }
    }

    ConvergenceReport rep;
    rep.config = c;
    rep.deltas = deltas;
    rep.sample_errors = sample_errors;
    rep.energy_residual_max_2d = resid2d_max;

    for (int i = 0; i < n_eps; ++i) {
        const double eps = c.eps_ladder[i];
        CellAccum& a = acc[i];
        EpsCell cell;
        cell.eps = eps;
        cell.n_samples = static_cast<int>(a.err.size());
        std::tie(cell.err_l2, cell.err_l2_se) = mean_se(a.err);
        std::tie(cell.alpha_sup, cell.alpha_sup_se) = mean_se(a.alpha_sup);
        std::tie(cell.alpha_energy, cell.alpha_energy_se) = mean_se(a.alpha_energy);
        std::tie(cell.beta_sup, cell.beta_sup_se) = mean_se(a.beta_sup);
        std::tie(cell.beta_grad, cell.beta_grad_se) = mean_se(a.beta_grad);
        std::tie(cell.beta_sup_p4, cell.beta_sup_p4_se) = mean_se(a.beta_p4);
        cell.beta_sup_over_eps = cell.beta_sup / eps;
        cell.beta_grad_over_eps = cell.beta_grad / eps;
        cell.beta_sup_p4_scaled = cell.beta_sup_p4 / (eps * eps);
        for (int pi = 0; pi < n_p; ++pi) {
            MomentRow m;
            m.p = c.p_list[pi];
            std::tie(m.sup_moment, m.sup_moment_se) = mean_se(a.mom_sup[pi]);
            std::tie(m.grad_moment, m.grad_moment_se) = mean_se(a.mom_grad[pi]);
            const double s = std::pow(eps, 0.5 * m.p);
            m.sup_scaled = m.sup_moment / s;
            m.grad_scaled = m.grad_moment / s;
            cell.moments.push_back(m);
        }
        if (n_p > 0 && c.p_list[0] == 2) {
            cell.u_energy = cell.moments[0].sup_moment + c.nu * cell.moments[0].grad_moment;
            std::vector<double> comb;
            for (std::size_t s = 0; s < a.u_sup.size(); ++s)
                comb.push_back(a.u_sup[s] + c.nu * a.u_grad[s]);
            cell.u_energy_se = mean_se(comb).second;
        }
        cell.energy_residual_max = a.resid_max;
        cell.div_inf_max = a.div_max;
        cell.modulus = a.modulus;
        rep.cells.push_back(std::move(cell));
    }

    std::vector<double> errs, b2, b4, ae, m4;
    for (const EpsCell& cl : rep.cells) {
        errs.push_back(cl.err_l2);
        b2.push_back(cl.beta_sup);
        b4.push_back(cl.beta_sup_p4);
        ae.push_back(cl.alpha_energy);
        for (const MomentRow& m : cl.moments)
            if (m.p == 4) m4.push_back(m.sup_scaled);
    }
    rep.err_slope = log_log_fit(c.eps_ladder, errs);
    rep.beta2_slope = log_log_fit(c.eps_ladder, b2);
    rep.beta4_slope = log_log_fit(c.eps_ladder, b4);
    rep.alpha_trend = log_log_fit(c.eps_ladder, ae);

    rep.err_monotone = rep.cells.size() >= 2;
    for (std::size_t i = 0; i + 1 < rep.cells.size(); ++i)
        if (!(rep.cells[i + 1].err_l2 < rep.cells[i].err_l2)) rep.err_monotone = false;
    rep.pass_err_slope = rep.err_slope.n >= 2 && rep.err_slope.slope > 0.5;
    rep.pass_beta2 = rep.beta2_slope.n >= 2 && rep.beta2_slope.slope >= 0.9;
    rep.pass_beta4 = rep.beta4_slope.n >= 2 && rep.beta4_slope.slope >= 1.8;

    double worst_resid = resid2d_max;
    for (const EpsCell& cl : rep.cells) worst_resid = std::max(worst_resid, cl.energy_residual_max);
    rep.energy_pathwise_pass = worst_resid <= c.tol.energy_residual && sample_errors.empty();
    rep.alpha_no_growth = no_upward_trend(rep.alpha_trend);
    rep.moment_p4_no_growth =
        m4.size() == rep.cells.size() ? no_upward_trend(log_log_fit(c.eps_ladder, m4)) : true;

    rep.modulus_monotone = true;
    for (const EpsCell& cl : rep.cells)
        for (std::size_t d = 0; d + 1 < cl.modulus.size(); ++d)
            if (cl.modulus[d] > cl.modulus[d + 1] * (1.0 + 1e-12) &&
                cl.modulus[d] - cl.modulus[d + 1] > 1e-15)
                rep.modulus_monotone = false;

    // The eps-free energy bound of the base system, in base-section units:
    // ||u0||^2 + T ||f||_{V*}^2 / nu + trace T.
    rep.energy_bound = c.u0_norm * c.u0_norm + prm.T * dual_norm_sq(fam.f2d, prm) / c.nu +
                       hs_norm_sq(fam) * prm.T;
    return rep;
}

// ---- command line ----------------------------------------------------------

namespace {

void emit_error(const char* type, const std::string& msg) {
    json e{{"error", {{"type", type}, {"message", msg}}}};
    std::fprintf(stderr, "%s\n", e.dump().c_str());
}

json report_entry(const OperatorReport& r) {
    return json{{"name", r.name},         {"lhs", r.lhs},
                {"rhs", r.rhs},           {"ratio", r.ratio},
                {"tolerance", r.tolerance}, {"passed", r.passed},
                {"inequality", r.inequality}, {"applicable", r.applicable}};
}

int do_check_ops(const std::string& grid_arg, double eps, std::uint64_t seed,
                 int n_fields, const std::string& out_path) {
    int nx = 0, ny = 0, nz = 0;
    if (std::sscanf(grid_arg.c_str(), "%d,%d,%d", &nx, &ny, &nz) != 3)
        throw config_error("--grid expects nx,ny,nz");
    if (!(eps > 0.0 && eps < 0.5)) throw config_error("--eps must lie in (0, 1/2)");
    if (n_fields < 1) throw config_error("--fields must be positive");
    Grid3D g = make_grid3d(nx, ny, nz, 1.0, 1.0, eps);

    std::vector<OperatorReport> reports = run_lemma_battery(g, n_fields, seed);
    reports.push_back(check_poincare_battery(g, n_fields, seed + 1));
    std::vector<double> ladder{eps, eps / 2, eps / 4, eps / 8};
    reports.push_back(check_ladyzhenskaya_trend(nx, ny, nz, 1.0, 1.0, ladder,
                                                std::min(n_fields, 30), seed + 2));

    bool all_pass = true;
    json entries = json::array();
    for (const OperatorReport& r : reports) {
        all_pass = all_pass && r.passed;
        entries.push_back(report_entry(r));
    }
    json out{{"schema_version", 1},
             {"grid", {{"nx", nx}, {"ny", ny}, {"nz", nz}}},
             {"eps", eps},
             {"seed", seed},
             {"n_fields", n_fields},
             {"reports", std::move(entries)},
             {"all_pass", all_pass}};
    write_text_file(out_path, out.dump(2) + "\n");
    std::printf("check-ops: %zu checks on %dx%dx%d, eps %g: %s\n", reports.size(), nx, ny,
                nz, eps, all_pass ? "all passed" : "FAILURES");
    return all_pass ? 0 : 1;
}

int do_run3d(const std::string& config_path, double eps, std::uint64_t seed,
             const std::string& out_dir) {
    SimConfig c = load_config(config_path);
    if (!(eps > 0.0 && eps < 0.5)) throw config_error("--eps must lie in (0, 1/2)");
    Grid3D g = make_grid3d(c.nx, c.ny, c.nz, c.lx, c.ly, eps);
    ForcingFamily fam = build_family_over(c, {g});
    verify_coupling(fam, c.tol.coupling);
    SolverParams prm = params_from(c);
    prm.snapshot_stride = c.snapshot_stride;
    VField2D u0 = initial_data_2d(c);
    VField3D u0_3 = initial_data_3d(c, u0, g);
    BrownianPaths paths = make_paths(fam.n_modes(), c.dt, c.T, seed);
    Trajectory3D traj = run3d(u0_3, prm, fam, paths);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/traj3d.csv", trajectory_csv(traj));
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "state_%06d", traj.snap_steps[i]);
        dump_vfield(out_dir, name, traj.states[i]);
    }
    std::printf("run3d: %d steps at eps %g, final energy %.6g, wrote %s\n",
                step_count(prm), eps, traj.energy.back(), out_dir.c_str());
    return 0;
}

int do_run2d(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    SimConfig c = load_config(config_path);
    Grid2D base = make_grid2d(c.nx, c.ny, c.lx, c.ly);
    Grid3D probe = make_grid3d(c.nx, c.ny, c.nz, c.lx, c.ly, c.eps_ladder.front());
    ForcingFamily fam = build_family_over(c, {probe});
    SolverParams prm = params_from(c);
    prm.snapshot_stride = c.snapshot_stride;
    VField2D u0 = initial_data_2d(c);
    BrownianPaths paths = make_paths(fam.n_modes(), c.dt, c.T, seed);
    Trajectory2D traj = run2d(u0, prm, fam, paths);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/traj2d.csv", trajectory_csv(traj));
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "state_%06d", traj.snap_steps[i]);
        dump_vfield(out_dir, name, traj.states[i]);
    }
    std::printf("run2d: %d steps on %dx%d, final energy %.6g, wrote %s\n", step_count(prm),
                base.nx, base.ny, traj.energy.back(), out_dir.c_str());
    return 0;
}

int do_converge(const std::string& config_path, const std::string& out_dir) {
    SimConfig c = load_config(config_path);
    std::filesystem::create_directories(out_dir);
    ConvergenceReport rep = run_convergence(c, &std::cerr);
    write_text_file(out_dir + "/report.json", report_to_json(rep));
    write_text_file(out_dir + "/report.csv", report_to_csv(rep));
    for (const EpsCell& cl : rep.cells)
        std::printf("eps %-8g err_l2 %.6e (se %.1e)  beta_sup %.6e  samples %d\n", cl.eps,
                    cl.err_l2, cl.err_l2_se, cl.beta_sup, cl.n_samples);
    std::printf("slopes: err %.3f+-%.3f  beta2 %.3f  beta4 %.3f\n", rep.err_slope.slope,
                rep.err_slope.stderr_slope, rep.beta2_slope.slope, rep.beta4_slope.slope);
    std::printf("flags: monotone %d err_slope %d beta2 %d beta4 %d energy %d no_growth %d\n",
                rep.err_monotone, rep.pass_err_slope, rep.pass_beta2, rep.pass_beta4,
                rep.energy_pathwise_pass, rep.alpha_no_growth);
    if (!rep.sample_errors.empty())
        std::printf("incomplete: %zu sample(s) aborted\n", rep.sample_errors.size());
    std::printf("wrote %s/report.json and report.csv\n", out_dir.c_str());
    return 0;
}

int do_report(const std::string& in_path, const std::string& format,
              const std::string& out_path) {
    ConvergenceReport rep = report_from_json(read_text_file(in_path));
    std::string text = format == "csv" ? report_to_csv(rep) : report_to_json(rep);
    if (out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        write_text_file(out_path, text);
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"thin-box stochastic flow laboratory"};
    app.require_subcommand(1);
    int rc = 0;

    std::string co_grid = "16,16,8", co_out = "report.json";
    double co_eps = 0.25;
    std::uint64_t co_seed = 1;
    int co_fields = 100;
    CLI::App* co = app.add_subcommand("check-ops", "run the operator identity batteries");
    co->add_option("--grid", co_grid, "grid as nx,ny,nz");
    co->add_option("--eps", co_eps, "box thickness");
    co->add_option("--seed", co_seed, "battery seed");
    co->add_option("--fields", co_fields, "random fields per battery");
    co->add_option("--out", co_out, "ledger path");
    co->callback([&] { rc = do_check_ops(co_grid, co_eps, co_seed, co_fields, co_out); });

    std::string r3_config, r3_out = "traj3d";
    double r3_eps = 0.25;
    std::uint64_t r3_seed = 0;
    bool r3_seed_set = false;
    CLI::App* r3 = app.add_subcommand("run3d", "integrate one thin-box trajectory");
    r3->add_option("--config", r3_config, "config file (.toml/.json)")->required();
    r3->add_option("--eps", r3_eps, "box thickness")->required();
    r3->add_option("--seed", r3_seed, "path seed (default: config base seed)")
        ->each([&](const std::string&) { r3_seed_set = true; });
    r3->add_option("--out", r3_out, "output directory");
    r3->callback([&] {
        SimConfig c = load_config(r3_config);
        rc = do_run3d(r3_config, r3_eps, r3_seed_set ? r3_seed : c.base_seed, r3_out);
    });

    std::string r2_config, r2_out = "traj2d";
    std::uint64_t r2_seed = 0;
    bool r2_seed_set = false;
    CLI::App* r2 = app.add_subcommand("run2d", "integrate the base-plane trajectory");
    r2->add_option("--config", r2_config, "config file (.toml/.json)")->required();
    r2->add_option("--seed", r2_seed, "path seed (default: config base seed)")
        ->each([&](const std::string&) { r2_seed_set = true; });
    r2->add_option("--out", r2_out, "output directory");
    r2->callback([&] {
        SimConfig c = load_config(r2_config);
        rc = do_run2d(r2_config, r2_seed_set ? r2_seed : c.base_seed, r2_out);
    });

    std::string cv_config, cv_out = ".";
    CLI::App* cv = app.add_subcommand("converge", "run the full convergence survey");
    cv->add_option("--config", cv_config, "config file (.toml/.json)")->required();
    cv->add_option("--out", cv_out, "output directory");
    cv->callback([&] { rc = do_converge(cv_config, cv_out); });

    std::string rp_in, rp_format = "csv", rp_out;
    CLI::App* rp = app.add_subcommand("report", "re-emit a stored report");
    rp->add_option("--in", rp_in, "report.json path")->required();
    rp->add_option("--format", rp_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    rp->add_option("--out", rp_out, "output path (default: stdout)");
    rp->callback([&] { rc = do_report(rp_in, rp_format, rp_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const config_error& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return 1;
    }
    return rc;
}

} // namespace thinflow

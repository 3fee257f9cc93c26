#pragma once

// Semi-implicit Euler-Maruyama integrators for the thin-box and base-plane
// systems, sharing one family of kernels:
//
//   a      = u^n + dt*(f - N(u^n, u^n)) + G dW
//   u*     solves (I + nu dt (-Lap)) u* = a, componentwise CG
//   u^{n+1} = u* - grad phi,  with -Lap phi = -div u* (Neumann CG)
//
// N is the compact skew advection: along every dof chain the pair
// (node, node+1) exchanges momentum through the transported velocity averaged
// to the shared half-point, so <N(t,v), w> = -<N(t,w), v> on admissible
// fields without assuming div t = 0. Half-points on a wall carry a pinned
// normal velocity and are omitted, which equals including them with zero
// transport; ghosts are never read.
//
// Every step writes an energy-balance row whose recorded work and slack
// columns make the discrete energy identity close to rounding; the residual
// column is the defect of that identity.

#include <utility>
#include <vector>

#include "thinflow/grid.hpp"
#include "thinflow/sgnoise.hpp"

namespace thinflow {

enum class AdvectionScheme { skew, none };

struct SolverParams {
    double nu = 0.05;
    double dt = 2.5e-3;
    double T = 1.0;
    double poisson_tol = 1e-11;
    int poisson_max_iter = 40000;
    double helmholtz_tol = 1e-12;
    int helmholtz_max_iter = 20000;
    AdvectionScheme advection = AdvectionScheme::skew;
    int snapshot_stride = 0; // 0: keep only the endpoints
};

// Throws solver_error on nonpositive nu/dt/T or tolerances, or T not an
// integer multiple of dt (within rounding).
void validate(const SolverParams& prm);
int step_count(const SolverParams& prm);

VField3D advect(const VField3D& transport, const VField3D& v);
VField2D advect(const VField2D& transport, const VField2D& v);

// <advect(u, v), w>; antisymmetric in (v, w) on admissible fields.
double trilinear_b3(const VField3D& u, const VField3D& v, const VField3D& w);
double trilinear_b2(const VField2D& u, const VField2D& v, const VField2D& w);

// In-place Leray projection. phi carries the warm start in and the potential
// out. Throws solver_error if the Poisson solve does not converge.
CGResult project_div_free(VField3D& u, const SolverParams& prm, SField3D& phi);
CGResult project_div_free(VField2D& u, const SolverParams& prm, SField2D& phi);
std::pair<VField3D, SField3D> project_div_free(const VField3D& u, const SolverParams& prm);
std::pair<VField2D, SField2D> project_div_free(const VField2D& u, const SolverParams& prm);

// One row of the discrete energy balance
//   e_new + d_new = e_old + work_f + skew_work + work_noise + quad
//                   - visc_damp - proj_drop - grad_shift + residual
// where every column is recorded from the step's own fields; residual is the
// defect and sits at the rounding/solver-tolerance floor.
struct EnergyLedgerRow {
    double t = 0;          // time at the end of the step
    double e_old = 0;      // ||u^n||^2
    double e_new = 0;      // ||u^{n+1}||^2
    double d_new = 0;      // 2 nu dt Dirichlet(u^{n+1})
    double work_f = 0;     // 2 dt <f, u^n>
    double skew_work = 0;  // -2 dt <N(u^n,u^n), u^n>, zero up to rounding
    double work_noise = 0; // 2 <G dW, u^n>
    double quad = 0;       // ||a - u^n||^2
    double visc_damp = 0;  // ||a - u*||^2
    double proj_drop = 0;  // ||u*||^2 - ||u^{n+1}||^2
    double grad_shift = 0; // 2 nu dt (Dirichlet(u*) - Dirichlet(u^{n+1}))
    double residual = 0;
    double div_inf = 0;    // max |div u^{n+1}|
    int helmholtz_iters = 0;
    int poisson_iters = 0;
};

// Advances u in place by one step. noise_inc may be null (no stochastic
// forcing); phi_warm, if given, warm-starts the pressure solve and receives
// the new potential; row, if given, receives the energy balance.
void step_em(VField3D& u, const SolverParams& prm, const VField3D& f,
             const VField3D* noise_inc, SField3D* phi_warm = nullptr,
             EnergyLedgerRow* row = nullptr);
void step_em_2d(VField2D& u, const SolverParams& prm, const VField2D& f,
                const VField2D* noise_inc, SField2D* phi_warm = nullptr,
                EnergyLedgerRow* row = nullptr);

struct Trajectory3D {
    Grid3D g;
    std::vector<double> times;           // n_steps + 1 entries
    std::vector<double> energy;          // ||u||^2 at each time
    std::vector<double> enstrophy;       // Dirichlet form at each time
    std::vector<double> beta_sq;         // ||fluctuation||^2 at each time
    std::vector<double> beta_dform;      // Dirichlet form of the fluctuation
    std::vector<double> noise_work_cum;  // running 2 sum <G dW, u^n>
    std::vector<double> ito_cum;         // running sum ||G||_HS^2 dt
    std::vector<EnergyLedgerRow> ledger; // n_steps entries
    std::vector<int> snap_steps;
    std::vector<VField3D> states;
};

struct Trajectory2D {
    Grid2D g;
    std::vector<double> times;
    std::vector<double> energy;
    std::vector<double> enstrophy;
    std::vector<double> noise_work_cum;
    std::vector<double> ito_cum;
    std::vector<EnergyLedgerRow> ledger;
    std::vector<int> snap_steps;
    std::vector<VField2D> states;
};

// Integrates from u0 over step_count(prm) steps. The thin-box run picks its
// forcing and noise lifts by matching u0's grid inside the family; the paths
// must cover at least that many steps. Aborts with solver_error (citing the
// step) if a state stops being finite.
Trajectory3D run3d(const VField3D& u0, const SolverParams& prm,
                   const ForcingFamily& fam, const BrownianPaths& paths);
Trajectory2D run2d(const VField2D& u0, const SolverParams& prm,
                   const ForcingFamily& fam, const BrownianPaths& paths);

} // namespace thinflow

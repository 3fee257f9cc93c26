#pragma once

// Orchestration of the convergence survey.
//
// One sample draws a single set of Brownian increments that drives the base
// 2D system and every thin box on the thickness ladder in lockstep; the
// deviation integral int ||circ_m(u_eps) - u||^2 dt is accumulated on the
// shared time grid (trapezoidal), together with the alpha/beta split
// statistics, moment ledgers, the per-step energy audit, and decimated
// alpha snapshots for the modulus-of-continuity scan. A report is a pure
// function of (config, seeds): the sample loop, reductions, and summation
// orders are fixed.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinflow/config.hpp"
#include "thinflow/report.hpp"
#include "thinflow/sgnoise.hpp"

namespace thinflow {

struct harness_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Forcing family over the whole ladder, built from the config's mode
// descriptors (trig/bump analytic modes or dumped field pairs).
ForcingFamily build_family(const SimConfig& c);

// Hard gate, run once per survey: the columnwise mean of every lifted mode
// (and of the deterministic force) must match its base field within
// c.tol.coupling in the sup norm. Throws harness_error.
void verify_coupling(const ForcingFamily& fam, double tol);

// Base initial profile: a divergence-free field drawn from u0_seed and
// scaled to u0_norm (zero norm gives the zero field).
VField2D initial_data_2d(const SimConfig& c);

// Thin-box initial state: the lift of u0 plus a well-prepared z-dependent
// perturbation scaled to perturbation_scale * ||u0|| * sqrt(eps) in the
// thin-box L2 norm. The perturbation is the smoothest horizontal vortex
// carried by the lowest vertical mode: exactly divergence-free, exactly
// mean-free per column, and with a vertical relaxation layer the integrator
// can resolve on every ladder rung.
VField3D initial_data_3d(const SimConfig& c, const VField2D& u0, const Grid3D& g);

// Runs the whole survey; progress lines go to *progress when given.
ConvergenceReport run_convergence(const SimConfig& c, std::ostream* progress = nullptr);

// sup over |t - s| <= delta of the negative-order norm of series
// differences, where the norm solves the Poisson problem twice (projecting
// after each solve) and takes L2. The series lives on a uniform grid with
// spacing dt_series; delta = 0 returns 0, 0 < delta < dt_series is an error.
double modulus_of_continuity(const std::vector<VField2D>& series, double dt_series,
                             double delta, const SolverParams& prm);

// Subcommands: check-ops, run3d, run2d, converge, report. Returns 0 on
// success, 2 on usage or config errors, 1 on runtime failures; errors are
// reported as one-line JSON on stderr.
int cli_main(int argc, const char* const* argv);

} // namespace thinflow

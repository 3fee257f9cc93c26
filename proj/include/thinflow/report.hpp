#pragma once

// Survey ledgers and artifact writers.
//
// A ConvergenceReport is a pure value: serializing to JSON and back restores
// it exactly (doubles round-trip through shortest-form printing), so the
// flat CSV emitted from a reloaded report is byte-identical to the one
// emitted right after the run. CSV rows are "eps,metric,value,stderr" with
// eps = 0 marking ladder-wide rows; numbers print with %.17g.

#include <stdexcept>
#include <string>
#include <vector>

#include "thinflow/config.hpp"
#include "thinflow/nse.hpp"

namespace thinflow {

struct report_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ordinary least squares of y against x, with the slope's standard error
// and a two-sided 95% half-width from the t distribution on n - 2 degrees
// of freedom. n < 2 leaves everything zero; n = 2 has zero residual.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double ci95_half = 0.0;
    int n = 0;
};

SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Ensemble moments of one order p: sup_moment = E sup_t ||u||^p and
// grad_moment = E int ||u||^{p-2} D(u) dt, with the eps^{p/2}-normalized
// columns alongside.
struct MomentRow {
    int p = 2;
    double sup_moment = 0.0, sup_moment_se = 0.0;
    double grad_moment = 0.0, grad_moment_se = 0.0;
    double sup_scaled = 0.0, grad_scaled = 0.0;
};

// Everything measured on one rung of the thickness ladder. alpha is the
// columnwise mean of the thin-box state on the base section, beta its
// fluctuation part; u_energy is E[sup||u||^2 + nu int D(u)] of the thin-box
// state itself and coincides with the p = 2 moment combination by
// construction.
struct EpsCell {
    double eps = 0.0;
    int n_samples = 0;
    double err_l2 = 0.0, err_l2_se = 0.0;
    double alpha_sup = 0.0, alpha_sup_se = 0.0;
    double alpha_energy = 0.0, alpha_energy_se = 0.0;
    double u_energy = 0.0, u_energy_se = 0.0;
    double beta_sup = 0.0, beta_sup_se = 0.0;
    double beta_grad = 0.0, beta_grad_se = 0.0;
    double beta_sup_over_eps = 0.0;
    double beta_grad_over_eps = 0.0;
    double beta_sup_p4 = 0.0, beta_sup_p4_se = 0.0;
    double beta_sup_p4_scaled = 0.0;
    std::vector<MomentRow> moments;
    double energy_residual_max = 0.0; // max over samples and steps of |r| / ||u^n||^2
    double div_inf_max = 0.0;
    std::vector<double> modulus; // sup over the ensemble, aligned with deltas
};

struct ConvergenceReport {
    int schema_version = 1;
    SimConfig config;
    std::vector<EpsCell> cells; // ladder order
    std::vector<double> deltas; // modulus window ladder, increasing
    SlopeFit err_slope;         // log err_l2 vs log eps
    SlopeFit beta2_slope;       // log beta_sup vs log eps
    SlopeFit beta4_slope;       // log beta_sup_p4 vs log eps
    SlopeFit alpha_trend;       // log alpha_energy vs log eps
    double energy_bound = 0.0;  // ||u0||^2 + T ||f||_{V*}^2 / nu + tr T, base units
    double energy_residual_max_2d = 0.0;
    bool err_monotone = false;
    bool pass_err_slope = false;       // err_slope.slope > 0.5
    bool pass_beta2 = false;           // beta2_slope.slope >= 0.9
    bool pass_beta4 = false;           // beta4_slope.slope >= 1.8
    bool energy_pathwise_pass = false; // every step of every sample within tolerance
    bool alpha_no_growth = false;      // no upward trend of alpha_energy as eps drops
    bool moment_p4_no_growth = false;  // scaled p = 4 moments flat across the ladder
    bool modulus_monotone = false;     // each cell's modulus non-decreasing in delta
    std::vector<std::string> sample_errors; // aborted samples, with reasons
};

std::string report_to_json(const ConvergenceReport& r);
ConvergenceReport report_from_json(const std::string& text);
std::string report_to_csv(const ConvergenceReport& r);

// Diagnostic series as CSV with header t,energy,enstrophy,energy_residual;
// the residual column is 0 at t = 0.
std::string trajectory_csv(const Trajectory3D& tr);
std::string trajectory_csv(const Trajectory2D& tr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Inverses of dump_vfield for a known grid: read the component dumps
// written under dir/name, check shapes against the grid, and restore the
// boundary conditions. Throws report_error on any mismatch.
VField3D load_vfield3(const std::string& dir, const std::string& name, const Grid3D& g);
VField2D load_vfield2(const std::string& dir, const std::string& name, const Grid2D& g);

} // namespace thinflow

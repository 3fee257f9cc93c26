#pragma once

// Survey configuration: grid, thickness ladder, physics, ensemble size,
// forcing spec, seeds, tolerances, and diagnostics, parsed from TOML or
// JSON files that share one tree shape. The TOML reader covers the subset
// the schema uses: [table] and [[array-of-tables]] headers, bare keys,
// strings, integers, floats, booleans, flat arrays, and # comments.
//
// The vertical cell count is fixed across the ladder (dz shrinks with eps)
// and the horizontal grid is shared by every run, so the 2D system and all
// thin boxes stay coupled through one forcing family.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinflow {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One analytic forcing mode on the base section; kind "file" loads a dumped
// field pair <path>.u1.* / <path>.u2.* and scales it by amplitude. Modes must
// be divergence-free.
struct ModeSpec {
    std::string kind = "trig"; // trig | bump | file
    int a = 1, b = 1;          // trig wavenumbers, >= 1
    double amplitude = 0.0;
    std::string path; // file kind only
};

struct Tolerances {
    double poisson = 1e-11;
    double helmholtz = 1e-12;
    double energy_residual = 1e-8; // per-step ledger residual over ||u^n||^2
    double coupling = 1e-12;       // circ_m of each lift vs its base mode
};

struct SimConfig {
    int schema_version = 1;
    int nx = 32, ny = 32, nz = 8;
    double lx = 1.0, ly = 1.0;
    std::vector<double> eps_ladder{0.25, 0.125, 0.0625, 0.03125};
    int n_samples = 32;
    double nu = 0.05;
    double T = 1.0;
    double dt = 2.5e-3;
    std::vector<ModeSpec> modes; // stochastic mode coefficients
    double f_amplitude = 0.0;    // deterministic bump forcing; 0 disables
    std::uint64_t base_seed = 2026; // sample k draws its paths from base_seed + k
    std::uint64_t u0_seed = 7;      // initial profile; perturbation uses u0_seed + 1
    double u0_norm = 1.0;           // prescribed L2 size of the base initial data
    double perturbation_scale = 1.0; // vertical part gets scale * u0_norm * sqrt(eps)
    std::vector<int> p_list{2, 4};
    Tolerances tol;
    int snapshot_stride = 25; // decimation for state dumps and the modulus scan; 0 disables
};

// Invariants: eps values in (0, 1/2) strictly decreasing; n_samples >= 1;
// nu, T, dt positive with dt dividing T; moment orders >= 2; trig
// wavenumbers >= 1; file modes carry a path. Throws config_error.
void validate(const SimConfig& c);

// Desk-scale convergence survey defaults: 32x32x8, four-rung ladder
// 1/4 .. 1/32, nu = 0.05, T = 1, dt = 2.5e-3, four trigonometric noise
// modes plus a deterministic bump force, 32 samples.
SimConfig survey_config();

// format is "toml" or "json"; both reject unknown keys by name.
SimConfig parse_config_text(const std::string& text, const std::string& format);

// Dispatches on the file extension (.toml / .json).
SimConfig load_config(const std::string& path);

// Canonical serialization; parse_config_text(config_to_json(c), "json")
// reproduces c exactly.
std::string config_to_json(const SimConfig& c);

} // namespace thinflow

#pragma once

// Finite-dimensional Wiener increments and the additive forcing family that
// couples the thin-domain runs to the limit run: every 3D coefficient is the
// retract of its 2D counterpart, and one set of Brownian increments drives
// all thicknesses. Everything here is a pure function of (inputs, seed) and
// is read-only after construction.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "thinflow/grid.hpp"

namespace thinflow {

struct forcing_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BrownianPaths {
    int n_modes = 0;
    int n_steps = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> increments; // step-major: [step * n_modes + mode], N(0, dt)

    double dW(int step, int mode) const {
        return increments[static_cast<std::size_t>(step) * n_modes + mode];
    }
    // W(t_step) for one mode; W(0) = 0.
    double path_value(int step, int mode) const;
};

// n_steps = T/dt, which must be integral within rounding.
BrownianPaths make_paths(int n_modes, double dt, double T, std::uint64_t seed);

struct ForcingFamily {
    Grid2D base;
    std::vector<Grid3D> grids;                 // thin boxes over the same section
    std::vector<VField2D> g2d;                 // noise coefficients, divergence-free
    std::vector<std::vector<VField3D>> glifts; // [grid][mode], lift of g2d[mode]
    VField2D f2d;                              // steady deterministic forcing
    std::vector<VField3D> f3d;                 // [grid], lift of f2d

    int n_modes() const { return static_cast<int>(g2d.size()); }
    int n_grids() const { return static_cast<int>(grids.size()); }
};

// Rejects coefficients that are not divergence-free, grids that do not share
// the base section, and more than 64 modes. n_modes = 0 is a valid family.
ForcingFamily make_forcing(const Grid2D& base, const std::vector<VField2D>& g2d,
                           const VField2D& f2d, const std::vector<Grid3D>& grids);

// Sum over modes of coefficient * dW at one step, on the base grid or on one
// thin box. The thin-box increment is z-independent by construction, so its
// columnwise mean reproduces the base increment exactly.
VField2D stochastic_increment(const ForcingFamily& fam, const BrownianPaths& paths,
                              int step);
VField3D stochastic_increment(const ForcingFamily& fam, const BrownianPaths& paths,
                              int step, int grid_index);

// Squared Hilbert-Schmidt norm: sum over modes of the squared L2 norm.
double hs_norm_sq(const ForcingFamily& fam);
double hs_norm_sq(const ForcingFamily& fam, int grid_index);

// Divergence-free analytic modes, built as discrete curls of a corner
// streamfunction that vanishes on the boundary ring.
VField2D trig_mode(const Grid2D& g, int a, int b, double amplitude);
VField2D bump_mode(const Grid2D& g, double amplitude);

} // namespace thinflow

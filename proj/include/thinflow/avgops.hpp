#pragma once

// Vertical averaging calculus on the thin box and its base section.
//
// Scalar operators: m_eps takes the columnwise vertical mean onto the base
// grid; hat_m replicates that mean back along x3; hat_n = id - hat_m leaves
// the zero-vertical-mean part. Vector operators act componentwise on the
// horizontal velocities: tilde_m u = (hat_m u1, hat_m u2, 0) and
// tilde_n u = (hat_n u1, hat_n u2, u3); circ_m u = (m_eps u1, m_eps u2) is
// the 2D section and retract lifts a 2D field z-independently with zero
// vertical component.
//
// The vertical mean is a pairwise (binary tree) sum divided by nz, so for
// power-of-two nz the mean of a replicated column is bitwise exact; combined
// with the uniform vertical quadrature weights this makes the scaling,
// Pythagoras, orthogonality, and duality identities below exact up to
// rounding rather than up to discretization error.

#include <cstdint>
#include <string>
#include <vector>

#include "thinflow/grid.hpp"

namespace thinflow {

SField2D m_eps(const SField3D& psi);
SField3D hat_m(const SField3D& psi);
SField3D hat_n(const SField3D& psi);
VField3D tilde_m(const VField3D& u);
VField3D tilde_n(const VField3D& u);
VField2D circ_m(const VField3D& u);
// Requires paired(g, v.g); output ghosts are filled, logical values are the
// plain replication (no pinning is imposed on non-admissible input).
VField3D retract(const VField2D& v, const Grid3D& g);

// Verdict carrier for one identity or inequality check.
// Identities:    passed iff |lhs - rhs| <= tolerance * max(1, |rhs|).
// Inequalities:  passed iff lhs <= rhs * (1 + tolerance).
struct OperatorReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0; // lhs/rhs when rhs != 0
    double tolerance = 0.0;
    bool passed = false;
    bool inequality = false;
    bool applicable = true; // false: hypothesis empty (e.g. zero fluctuation)
};

OperatorReport identity_report(const std::string& name, double lhs, double rhs,
                               double tol);
OperatorReport inequality_report(const std::string& name, double lhs, double rhs,
                                 double tol);

// ||tilde_m u||^2 + ||tilde_n u||^2 = ||u||^2, and the same for the
// Dirichlet forms of the two parts.
OperatorReport check_pythagoras(const VField3D& u);
OperatorReport check_pythagoras_gradient(const VField3D& u);

// ||tilde_n u|| <= eps * ||d3 tilde_n u|| with the staggered d3; the discrete
// slack is O(dz^2), reported via tolerance = 5*dz^2. Flagged inapplicable
// (and vacuously passed) when the fluctuation part vanishes.
OperatorReport check_poincare(const VField3D& u);

// Empirical anisotropic embedding constants of the fluctuation part:
// lhs = ||tilde_n u||_L6 / ||tilde_n u||_V, rhs = ||tilde_n u||_L3^2 / (eps ||tilde_n u||_V^2)
// where ||.||_V^2 = ||.||^2 + Dirichlet form. Constants only; passed = true.
OperatorReport check_ladyzhenskaya(const VField3D& u);

// Two-factor anisotropic embedding constant of the fluctuation v = tilde_n(u):
// ||v||_L6 / [((1/eps)||v|| + ||d3 v||)^{1/3} (||v|| + ||d1 v|| + ||d2 v||)^{2/3}].
// Unlike the V-norm quotient above, this one is invariant under thinning the
// slab at a fixed field profile, which is exactly the eps-uniformity the
// inequality asserts. Returns 0 when v vanishes.
double lady_aniso_constant(const VField3D& u);

// Regresses log of the battery-max anisotropic constant against log(eps) over
// an eps ladder at fixed resolution, reusing the same field profiles at every
// eps; lhs = |slope|, tolerance = 0.1.
OperatorReport check_ladyzhenskaya_trend(int nx, int ny, int nz, double lx, double ly,
                                         const std::vector<double>& eps_list,
                                         int n_fields, std::uint64_t seed);

// Largest Poincare ratio lhs/rhs over a battery of random fields (inequality
// report with tolerance 5*dz^2).
OperatorReport check_poincare_battery(const Grid3D& g, int n_fields, std::uint64_t seed);

// Worst case of every operator identity over n_fields random fields, one
// report per identity, at the tolerances documented above.
std::vector<OperatorReport> run_lemma_battery(const Grid3D& g, int n_fields,
                                              std::uint64_t seed);

// Exactly divergence-free admissible random field built from streamfunctions
// (2D corner streamfunction plus two vertical-plane modes), used by the
// batteries and tests.
VField3D random_divfree_vfield3(const Grid3D& g, std::uint64_t seed);
VField2D random_divfree_vfield2(const Grid2D& g, std::uint64_t seed);

} // namespace thinflow

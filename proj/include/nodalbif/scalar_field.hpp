#pragma once

// Nodal solutions w_k of -Delta w + w = w^3 on the unit ball, w_k(0) > 0 with
// exactly k-1 interior sign changes.

#include <vector>

#include "nodalbif/grid.hpp"

namespace nodalbif {

struct ShootingOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double origin_radius = 1e-4;   ///< series start h0
    double blowup_bound = 1e6;
};

struct ShotResult {
    RadialFunction trajectory;   ///< IVP solution resampled at the grid nodes
    double boundary_value = 0.0; ///< u(1)
    int interior_nodes = 0;      ///< sign changes on (0,1)
};

/// Integrates u'' + (2/r)u' = u - u^3, u(0) = a, u'(0) = 0 to r = 1 with the
/// Dormand-Prince 5(4) pair. Throws BlowUp if |u| exceeds the bound.
ShotResult shoot(double a, const GridPtr& grid, const ShootingOptions& opts = {});

/// u(1) and the number of sign changes on (0,1], without resampling.
struct ShotSummary {
    double boundary_value = 0.0;
    int sign_changes_to_boundary = 0;  ///< counts a sign flip at r = 1 itself
};
ShotSummary shoot_summary(double a, const ShootingOptions& opts = {});

struct FindOptions {
    ShootingOptions shooting;
    double scan_start = 0.5;       ///< first amplitude of the bracketing scan
    double scan_ratio = 1.05;      ///< geometric scan factor
    double amplitude_cap = 1e4;
    double boundary_tol = 1e-10;   ///< |u(1)| target for the bisection
    double newton_tol = 1e-10;     ///< fixed-point residual target for the polish
    int newton_max_iter = 30;
};

struct ScalarSolution {
    int k = 0;
    double amplitude = 0.0;        ///< shooting amplitude a_k = w_k(0)
    RadialFunction profile;        ///< Newton-polished discrete solution
    RadialFunction shooting_profile;
    double boundary_value = 0.0;   ///< u(1) of the final shot
    double residual_sup = 0.0;
    int newton_iterations = 0;
};

/// Locates w_k by bracketing on (sign changes up to r = 1) and bisecting on
/// the amplitude, then polishes the grid samples with Newton's method.
ScalarSolution find_w(int k, const GridPtr& grid, const FindOptions& opts = {});

/// sup |w - (-Delta_h + 1)^{-1} w^3|: the fixed-point residual of the
/// discrete scalar equation.
double scalar_residual(const RadialFunction& w);

struct MorseResult {
    int index = 0;
    double min_abs_eig = 0.0;
};

/// Negative eigenvalue count of -Delta_h + 1 - 3 w^2 and its eigenvalue of
/// smallest modulus.
MorseResult scalar_morse_index(const ScalarSolution& w);

struct BumpIdentity {
    double quadform = 0.0;    ///< D^2 I(w)[b,b] = |b|_{H1}^2 - 3 int w^2 b^2
    double neg_two_l4 = 0.0;  ///< -2 int b^4
};

/// One entry per bump of the profile. Integrals over each nodal annulus cut
/// the grid cells at the interpolated sign-change radii.
std::vector<BumpIdentity> bump_identity_check(const ScalarSolution& w);

}  // namespace nodalbif

#pragma once

// Discrete coupled system
//   -Delta u + u = u^3 + beta u v^2
//   -Delta v + v = v^3 + beta u^2 v
// on the radial grid: residual, Jacobian, Newton kernel, quadratic form H_beta,
// Morse index along the synchronized branch, the maps T_1..T_4 and the circle
// of solutions at beta = 1.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "nodalbif/grid.hpp"
#include "nodalbif/scalar_field.hpp"
#include "nodalbif/spectral.hpp"

namespace nodalbif {

struct StatePair {
    double beta = 0.0;
    RadialFunction u;
    RadialFunction v;

    const GridPtr& grid() const { return u.grid(); }
};

/// (beta, w/sqrt(1+beta), w/sqrt(1+beta)). Throws PoleAtMinusOne for beta <= -1.
StatePair synchronized_point(const ScalarSolution& w, double beta);
/// (beta, w, 0)
StatePair semitrivial_point(const ScalarSolution& w, double beta);

struct NodalSignature {
    int n_u = 0;
    int n_v = 0;
    int n_sum = 0;
    int n_diff = 0;
    double u0 = 0.0;  ///< origin values, for the sign class
    double v0 = 0.0;

    bool same_counts(const NodalSignature& o) const {
        return n_u == o.n_u && n_v == o.n_v && n_sum == o.n_sum && n_diff == o.n_diff;
    }
    std::string str() const;
};

/// Components below this fraction of max(|u|_inf, |v|_inf) count as zero.
inline constexpr double kNegligibleComponent = 1e-12;

/// Nodal counts of u, v, u+v, u-v; each thresholded against its own sup norm.
/// A zero or negligible component has count 0.
NodalSignature nodal_signature(const StatePair& s, double rel_threshold = kDefaultNodalThreshold);

struct Residual {
    RadialFunction res_u;
    RadialFunction res_v;
    double sup = 0.0;
};

/// Fixed-point residual u - (-Delta_h + 1)^{-1}(u^3 + beta u v^2) and the
/// analogue for v. Zero exactly at discrete solutions; free of the 1/h^2
/// round-off amplification of the strong form.
Residual residual(const StatePair& s);

/// Strong-form residual (-Delta_h + 1)u - u^3 - beta u v^2, interleaved (u_j, v_j).
Eigen::VectorXd strong_residual(const StatePair& s);

/// Linearization at a state: diagonal blocks -Delta + c_uu, -Delta + c_vv and
/// the coupling c_uv on both off-diagonal blocks.
class CoupledJacobian {
public:
    explicit CoupledJacobian(const StatePair& s);

    const GridPtr& grid() const { return grid_; }
    std::size_t size() const { return c_uu_.size(); }

    std::pair<RadialFunction, RadialFunction> apply(const RadialFunction& phi, const RadialFunction& psi) const;

    /// Interleaved (u_j, v_j) sparse matrix in the original coordinates.
    Eigen::SparseMatrix<double> sparse() const;

    /// d/dbeta of the strong residual, interleaved.
    static Eigen::VectorXd beta_derivative(const StatePair& s);

    /// Number of eigenvalues of the symmetrized Jacobian below x (block Sturm
    /// count over 2x2 pivots). count_below(0) is the Morse index.
    std::size_t count_below(double x) const;
    /// Eigenvalue `index` (0-based, ascending) of the Jacobian.
    double eigenvalue(std::size_t index) const;
    /// Eigenvalue of smallest modulus; equals the smallest singular value of
    /// the symmetrized matrix.
    double min_abs_eigenvalue() const;

    std::span<const double> c_uu() const { return c_uu_; }
    std::span<const double> c_vv() const { return c_vv_; }
    std::span<const double> c_uv() const { return c_uv_; }

private:
    GridPtr grid_;
    std::vector<double> c_uu_, c_vv_, c_uv_;
};

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
    double armijo_factor = 0.5;
    double min_step = 1.0 / (1 << 20);
    double singular_tol = 1e-10;
    bool check_singular = true;
};

struct NewtonReport {
    int iterations = 0;
    double residual_sup = 0.0;
};

/// Damped Newton at fixed beta. Throws SingularJacobian if the initial
/// Jacobian has an eigenvalue within singular_tol of zero, NoConvergence
/// otherwise on failure.
StatePair newton_solve(const StatePair& s0, double frozen_beta, const NewtonOptions& opts = {},
                       NewtonReport* report = nullptr);

/// H_beta[phi, psi] along the synchronized branch of w_k.
double h_beta_form(const ScalarSolution& w, double beta, const RadialFunction& phi, const RadialFunction& psi);

/// Morse index of the synchronized solution at beta. With a table given,
/// throws AtBifurcation when beta is within `guard` of a tabulated beta_{k,i}.
int coupled_morse_index(const ScalarSolution& w, double beta, const BifurcationTable* table = nullptr,
                        double guard = 1e-8);

/// T_l, l = 1..4; beta must exceed -1.
StatePair map_T(int l, const StatePair& s);

/// (1, cos(theta) w, sin(theta) w)
StatePair circle_solution(const ScalarSolution& w, double theta);

/// Interleave / split helpers for (u_j, v_j) vectors.
Eigen::VectorXd interleave(const RadialFunction& u, const RadialFunction& v);
void deinterleave(const Eigen::VectorXd& x, RadialFunction& u, RadialFunction& v);

}  // namespace nodalbif

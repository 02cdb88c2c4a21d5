#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nodalbif {

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
struct SymTridiag {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }

    /// y = T x
    std::vector<double> apply(std::span<const double> x) const;

    /// Number of eigenvalues of T - x*M strictly below zero, i.e. the Sturm
    /// count of the pencil (T, M). `mass` empty means M = I.
    std::size_t count_below(double x, std::span<const double> mass = {}) const;

    /// Eigenvalue number `index` (0-based, ascending) of T (mass empty) or of
    /// the pencil T v = lambda M v with M diagonal, positive semidefinite and T
    /// positive definite. Bisection on the Sturm count.
    double eigenvalue(std::size_t index, std::span<const double> mass = {}) const;

    /// Eigenvector for an already converged eigenvalue by inverse iteration.
    /// Returned vector has unit Euclidean norm (unit M-norm for a pencil).
    std::vector<double> eigenvector(double lambda, std::span<const double> mass = {}) const;

    /// Gershgorin interval enclosing the spectrum of T.
    std::pair<double, double> gershgorin() const;
};

/// Solves a general tridiagonal system with partial pivoting (LAPACK dgtsv
/// style). `sub` and `sup` have length n-1. Returns false if a pivot is
/// exactly zero.
bool solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<double> rhs);

}  // namespace nodalbif

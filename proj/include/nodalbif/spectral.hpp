#pragma once

// Weighted eigenproblem -Delta phi + phi = lambda w_k^2 phi and the predicted
// bifurcation parameters of the synchronized and semi-trivial branches.

#include <string>
#include <vector>

#include "nodalbif/grid.hpp"
#include "nodalbif/scalar_field.hpp"

namespace nodalbif {

struct Spectrum {
    int k = 0;
    std::vector<double> eigenvalues;            ///< ascending
    std::vector<RadialFunction> eigenfunctions; ///< int w_k^2 phi^2 = 1, phi(r_1) > 0
    std::vector<int> nodal_counts;
};

struct SpectrumOptions {
    double unit_tol = 1e-6;   ///< |lambda_{k,k} - 1|
    double gap_delta = 1e-6;  ///< no eigenvalue in (1 + delta, 3 - delta)
};

/// The m smallest eigenvalues by Sturm bisection on the pencil (T, diag w^2)
/// where T is the symmetric form of -Delta_h + 1, plus inverse iteration.
/// Validates the spectral invariants and throws InvariantViolated naming the
/// first that fails.
Spectrum weighted_eigs(const ScalarSolution& w, int m, const SpectrumOptions& opts = {});

/// Checks all Spectrum invariants; throws InvariantViolated.
void validate_spectrum(const Spectrum& s, const ScalarSolution& w, const SpectrumOptions& opts = {});

/// (3 - beta)/(1 + beta); an involution of (-1, inf). Throws PoleAtMinusOne.
double moebius(double beta);

/// beta = 4/(lambda + 1) - 1
double sync_bifurcation_parameter(double lambda);

enum class FamilyWindow { Left, Right, Circle };

std::string to_string(FamilyWindow w);

struct BifurcationRow {
    int i = 0;
    double lambda = 0.0;
    double beta = 0.0;        ///< synchronized-branch parameter
    double beta_tilde = 0.0;  ///< semi-trivial-branch parameter (= lambda)
    FamilyWindow window = FamilyWindow::Circle;
};

struct BifurcationTable {
    int k = 0;
    std::vector<BifurcationRow> rows;

    const BifurcationRow& row(int i) const { return rows.at(static_cast<std::size_t>(i - 1)); }
};

BifurcationTable bifurcation_table(const Spectrum& spec);

}  // namespace nodalbif

#include "nodalbif/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "nodalbif/errors.hpp"

namespace nodalbif {

namespace {

std::vector<double> weight_of(const ScalarSolution& w) {
    std::vector<double> m(w.profile.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = w.profile[j] * w.profile[j];
    return m;
}

}  // namespace

Spectrum weighted_eigs(const ScalarSolution& w, int m, const SpectrumOptions& opts) {
    if (m < w.k + 2) throw std::invalid_argument("weighted_eigs needs m >= k + 2");
    const auto& grid = w.profile.grid();
    const auto mass = weight_of(w);

    const double wmax = *std::max_element(mass.begin(), mass.end());
    const auto nonzero = std::count_if(mass.begin(), mass.end(), [&](double v) { return v > 1e-14 * wmax; });
    if (nonzero < m) {
        throw WeightDegenerate("only " + std::to_string(nonzero) + " nonzero weights for " + std::to_string(m) +
                               " eigenvalues");
    }

    const auto t = assemble_operator(grid, 1.0).symmetric_form();
    Spectrum s;
    s.k = w.k;
    const double norm = 1.0 / std::sqrt(4.0 * kPi * grid->h());
    for (int i = 0; i < m; ++i) {
        const double lam = t.eigenvalue(static_cast<std::size_t>(i), mass);
        auto psi = t.eigenvector(lam, mass);
        // psi = r*phi with sum w^2 psi^2 = 1; rescale to int w^2 phi^2 = 1.
        RadialFunction phi(grid);
        for (std::size_t j = 0; j < phi.size(); ++j) phi[j] = psi[j] / grid->r(j) * norm;
        if (phi[0] < 0.0) phi *= -1.0;
        // Bisection carries the rounding of 2/h^2 + 1 (about eps/h^2); the
        // Rayleigh quotient through the edge-difference form does not.
        std::vector<double> wphi(phi.size());
        for (std::size_t j = 0; j < phi.size(); ++j) wphi[j] = mass[j] * phi[j] * phi[j];
        const double rq = inner_products(phi, phi).h1 / integrate(grid, wphi);
        s.eigenvalues.push_back(std::isfinite(rq) ? rq : lam);
        s.nodal_counts.push_back(nodal_count(phi));
        s.eigenfunctions.push_back(std::move(phi));
    }
    validate_spectrum(s, w, opts);
    return s;
}

void validate_spectrum(const Spectrum& s, const ScalarSolution& w, const SpectrumOptions& opts) {
    const auto m = s.eigenvalues.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (!(s.eigenvalues[i] > 0.0)) throw InvariantViolated("eigenvalue " + std::to_string(i + 1) + " not positive");
        if (i > 0 && !(s.eigenvalues[i] > s.eigenvalues[i - 1])) {
            throw InvariantViolated("eigenvalues not strictly increasing at i = " + std::to_string(i + 1));
        }
        if (s.nodal_counts[i] != static_cast<int>(i)) {
            throw InvariantViolated("eigenfunction " + std::to_string(i + 1) + " has " +
                                    std::to_string(s.nodal_counts[i]) + " sign changes");
        }
    }
    const auto kk = static_cast<std::size_t>(s.k - 1);
    if (kk >= m || std::abs(s.eigenvalues[kk] - 1.0) > opts.unit_tol) {
        throw InvariantViolated("lambda_{k,k} differs from 1");
    }
    if (kk + 1 >= m || !(s.eigenvalues[kk + 1] > 3.0)) throw InvariantViolated("lambda_{k,k+1} not above 3");

    // Spectral gap over the whole discrete spectrum, not only the m computed.
    const auto t = assemble_operator(w.profile.grid(), 1.0).symmetric_form();
    const auto mass = weight_of(w);
    if (t.count_below(3.0 - opts.gap_delta, mass) != t.count_below(1.0 + opts.gap_delta, mass)) {
        throw InvariantViolated("spectral gap: eigenvalue inside (1, 3)");
    }

    // phi_{k,k} parallel to w_k
    const auto& phi = s.eigenfunctions[kk];
    const auto pw = inner_products(phi, w.profile).l2;
    const auto pp = inner_products(phi, phi).l2;
    const auto ww = inner_products(w.profile, w.profile).l2;
    if (std::abs(pw) < (1.0 - 1e-8) * std::sqrt(pp * ww)) {
        throw InvariantViolated("phi_{k,k} not parallel to w_k");
    }
}

double moebius(double beta) {
    if (beta == -1.0) throw PoleAtMinusOne("moebius map is singular at beta = -1");
    return (3.0 - beta) / (1.0 + beta);
}

double sync_bifurcation_parameter(double lambda) { return 4.0 / (lambda + 1.0) - 1.0; }

std::string to_string(FamilyWindow w) {
    switch (w) {
        case FamilyWindow::Left: return "left";
        case FamilyWindow::Right: return "right";
        case FamilyWindow::Circle: return "circle";
    }
    return "circle";
}

BifurcationTable bifurcation_table(const Spectrum& spec) {
    BifurcationTable t;
    t.k = spec.k;
    for (std::size_t idx = 0; idx < spec.eigenvalues.size(); ++idx) {
        BifurcationRow r;
        r.i = static_cast<int>(idx) + 1;
        r.lambda = spec.eigenvalues[idx];
        r.beta = sync_bifurcation_parameter(r.lambda);
        r.beta_tilde = r.lambda;
        r.window = r.i > spec.k ? FamilyWindow::Left : (r.i < spec.k ? FamilyWindow::Right : FamilyWindow::Circle);
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace nodalbif

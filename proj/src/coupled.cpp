#include "nodalbif/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseLU>

#include "nodalbif/errors.hpp"

namespace nodalbif {

Eigen::VectorXd interleave(const RadialFunction& u, const RadialFunction& v) {
    require_same_grid(u, v);
    Eigen::VectorXd x(2 * u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        x[2 * j] = u[j];
        x[2 * j + 1] = v[j];
    }
    return x;
}

void deinterleave(const Eigen::VectorXd& x, RadialFunction& u, RadialFunction& v) {
    for (std::size_t j = 0; j < u.size(); ++j) {
        u[j] = x[2 * j];
        v[j] = x[2 * j + 1];
    }
}

StatePair synchronized_point(const ScalarSolution& w, double beta) {
    if (!(beta > -1.0)) throw PoleAtMinusOne("synchronized branch needs beta > -1");
    const double s = 1.0 / std::sqrt(1.0 + beta);
    return {beta, s * w.profile, s * w.profile};
}

StatePair semitrivial_point(const ScalarSolution& w, double beta) {
    return {beta, w.profile, RadialFunction(w.profile.grid())};
}

std::string NodalSignature::str() const {
    std::ostringstream os;
    os << "(" << n_u << "," << n_v << "," << n_sum << "," << n_diff << ")";
    return os.str();
}

namespace {

// A component that is zero, or round-off next to the other one, has no sign
// changes.
int count_or_zero(const RadialFunction& f, double rel, double pair_scale) {
    if (f.sup_norm() <= kNegligibleComponent * pair_scale) return 0;
    try {
        return nodal_count(f, rel);
    } catch (const AllBelowThreshold&) {
        return 0;
    }
}

}  // namespace

NodalSignature nodal_signature(const StatePair& s, double rel_threshold) {
    require_same_grid(s.u, s.v);
    NodalSignature sig;
    const double scale = std::max(s.u.sup_norm(), s.v.sup_norm());
    sig.n_u = count_or_zero(s.u, rel_threshold, scale);
    sig.n_v = count_or_zero(s.v, rel_threshold, scale);
    sig.n_sum = count_or_zero(s.u + s.v, rel_threshold, scale);
    sig.n_diff = count_or_zero(s.u - s.v, rel_threshold, scale);
    sig.u0 = s.u.value_at_origin();
    sig.v0 = s.v.value_at_origin();
    return sig;
}

Residual residual(const StatePair& s) {
    require_same_grid(s.u, s.v);
    const auto& grid = s.grid();
    const auto op = assemble_operator(grid, 1.0);
    const std::size_t n = s.u.size();
    std::vector<double> nu(n), nv(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = s.u[j], v = s.v[j];
        nu[j] = u * u * u + s.beta * u * v * v;
        nv[j] = v * v * v + s.beta * u * u * v;
    }
    op.solve(nu);
    op.solve(nv);
    Residual r{RadialFunction(grid), RadialFunction(grid), 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        r.res_u[j] = s.u[j] - nu[j];
        r.res_v[j] = s.v[j] - nv[j];
        r.sup = std::max({r.sup, std::abs(r.res_u[j]), std::abs(r.res_v[j])});
    }
    if (!std::isfinite(r.sup)) r.sup = std::numeric_limits<double>::infinity();
    return r;
}

Eigen::VectorXd strong_residual(const StatePair& s) {
    require_same_grid(s.u, s.v);
    const auto op = assemble_operator(s.grid(), 1.0);
    const auto au = op.apply(s.u);
    const auto av = op.apply(s.v);
    Eigen::VectorXd f(2 * s.u.size());
    for (std::size_t j = 0; j < s.u.size(); ++j) {
        const double u = s.u[j], v = s.v[j];
        f[2 * j] = au[j] - u * u * u - s.beta * u * v * v;
        f[2 * j + 1] = av[j] - v * v * v - s.beta * u * u * v;
    }
    return f;
}

CoupledJacobian::CoupledJacobian(const StatePair& s) : grid_(s.grid()) {
    require_same_grid(s.u, s.v);
    const std::size_t n = s.u.size();
    c_uu_.resize(n);
    c_vv_.resize(n);
    c_uv_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = s.u[j], v = s.v[j];
        c_uu_[j] = 1.0 - 3.0 * u * u - s.beta * v * v;
        c_vv_[j] = 1.0 - 3.0 * v * v - s.beta * u * u;
        c_uv_[j] = -2.0 * s.beta * u * v;
    }
}

std::pair<RadialFunction, RadialFunction> CoupledJacobian::apply(const RadialFunction& phi,
                                                                 const RadialFunction& psi) const {
    const auto lap = assemble_operator(grid_, 0.0);
    auto a = lap.apply(phi);
    auto b = lap.apply(psi);
    for (std::size_t j = 0; j < size(); ++j) {
        a[j] += c_uu_[j] * phi[j] + c_uv_[j] * psi[j];
        b[j] += c_uv_[j] * phi[j] + c_vv_[j] * psi[j];
    }
    return {std::move(a), std::move(b)};
}

Eigen::SparseMatrix<double> CoupledJacobian::sparse() const {
    const auto lap = assemble_operator(grid_, 0.0);
    const std::size_t n = size();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(8 * n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto iu = static_cast<int>(2 * j), iv = iu + 1;
        for (int c = 0; c < 2; ++c) {
            const int row = iu + c;
            if (j > 0) trip.emplace_back(row, row - 2, lap.sub()[j]);
            if (j + 1 < n) trip.emplace_back(row, row + 2, lap.sup()[j]);
        }
        trip.emplace_back(iu, iu, lap.diag()[j] + c_uu_[j]);
        trip.emplace_back(iv, iv, lap.diag()[j] + c_vv_[j]);
        trip.emplace_back(iu, iv, c_uv_[j]);
        trip.emplace_back(iv, iu, c_uv_[j]);
    }
    Eigen::SparseMatrix<double> m(static_cast<int>(2 * n), static_cast<int>(2 * n));
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

Eigen::VectorXd CoupledJacobian::beta_derivative(const StatePair& s) {
    Eigen::VectorXd d(2 * s.u.size());
    for (std::size_t j = 0; j < s.u.size(); ++j) {
        const double u = s.u[j], v = s.v[j];
        d[2 * j] = -u * v * v;
        d[2 * j + 1] = -u * u * v;
    }
    return d;
}

namespace {

// Off-diagonal of the symmetric form of -Delta_h; the diagonal is 2/h^2.
struct SymLaplacian {
    double diag;
    double off;
};

SymLaplacian sym_laplacian(const RadialGrid& g) {
    const double h2 = g.h() * g.h();
    return {2.0 / h2, -1.0 / h2};
}

double signed_floor(double det, double floor) {
    if (std::abs(det) >= floor) return det;
    return -floor;
}

}  // namespace

std::size_t CoupledJacobian::count_below(double x) const {
    const auto lap = sym_laplacian(*grid_);
    const double off2 = lap.off * lap.off;
    const double floor = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    std::size_t count = 0;
    // previous pivot inverse [[pa, pb], [pb, pc]]
    double pa = 0.0, pb = 0.0, pc = 0.0;
    for (std::size_t j = 0; j < size(); ++j) {
        const double a = lap.diag + c_uu_[j] - x - off2 * pa;
        const double b = c_uv_[j] - off2 * pb;
        const double c = lap.diag + c_vv_[j] - x - off2 * pc;
        const double det = signed_floor(a * c - b * b, floor * (1.0 + std::abs(a * c)));
        if (det < 0.0) {
            count += 1;
        } else if (a + c < 0.0) {
            count += 2;
        }
        pa = c / det;
        pb = -b / det;
        pc = a / det;
    }
    return count;
}

double CoupledJacobian::eigenvalue(std::size_t index) const {
    if (index >= 2 * size()) throw std::out_of_range("Jacobian eigenvalue index out of range");
    const auto lap = sym_laplacian(*grid_);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < size(); ++j) {
        const double rad = 2.0 * std::abs(lap.off) + std::abs(c_uv_[j]);
        lo = std::min({lo, lap.diag + c_uu_[j] - rad, lap.diag + c_vv_[j] - rad});
        hi = std::max({hi, lap.diag + c_uu_[j] + rad, lap.diag + c_vv_[j] + rad});
    }
    const double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi || hi - lo <= 4.0 * eps * std::max(std::abs(lo), std::abs(hi))) break;
        if (count_below(mid) > index) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace {

// Rayleigh quotient of the symmetric Jacobian for (P, Q) = (r phi, r psi),
// with the Laplacian part summed as squared differences.
double rayleigh(const RadialGrid& g, std::span<const double> cuu, std::span<const double> cvv,
                std::span<const double> cuv, const Eigen::VectorXd& x) {
    const std::size_t n = g.size();
    const double h2 = g.h() * g.h();
    double num = 0.0, den = 0.0;
    double prev_p = 0.0, prev_q = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double p = x[2 * j], q = x[2 * j + 1];
        num += ((p - prev_p) * (p - prev_p) + (q - prev_q) * (q - prev_q)) / h2;
        num += cuu[j] * p * p + 2.0 * cuv[j] * p * q + cvv[j] * q * q;
        den += p * p + q * q;
        prev_p = p;
        prev_q = q;
    }
    num += (prev_p * prev_p + prev_q * prev_q) / h2;
    return num / den;
}

}  // namespace

double CoupledJacobian::min_abs_eigenvalue() const {
    const std::size_t below = count_below(0.0);
    std::vector<double> candidates;
    if (below > 0) candidates.push_back(eigenvalue(below - 1));
    if (below < 2 * size()) candidates.push_back(eigenvalue(below));

    // The bisection is only accurate to about eps*|J|; refine each candidate
    // by inverse iteration on the symmetric form and a cancellation-free
    // Rayleigh quotient.
    const auto lap = sym_laplacian(*grid_);
    const std::size_t n = size();
    double best = std::numeric_limits<double>::infinity();
    for (double sigma : candidates) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(6 * n);
        for (std::size_t j = 0; j < n; ++j) {
            const auto iu = static_cast<int>(2 * j), iv = iu + 1;
            for (int c = 0; c < 2; ++c) {
                if (j > 0) trip.emplace_back(iu + c, iu + c - 2, lap.off);
                if (j + 1 < n) trip.emplace_back(iu + c, iu + c + 2, lap.off);
            }
            trip.emplace_back(iu, iu, lap.diag + c_uu_[j] - sigma);
            trip.emplace_back(iv, iv, lap.diag + c_vv_[j] - sigma);
            trip.emplace_back(iu, iv, c_uv_[j]);
            trip.emplace_back(iv, iu, c_uv_[j]);
        }
        Eigen::SparseMatrix<double> m(static_cast<int>(2 * n), static_cast<int>(2 * n));
        m.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(m);
        double value = sigma;
        if (lu.info() == Eigen::Success) {
            Eigen::VectorXd x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(2 * n));
            for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += 0.1 * std::sin(static_cast<double>(j));
            for (int it = 0; it < 4; ++it) {
                Eigen::VectorXd y = lu.solve(x);
                if (!y.allFinite() || y.norm() == 0.0) break;
                x = y / y.norm();
            }
            const double rq = rayleigh(*grid_, c_uu_, c_vv_, c_uv_, x);
            if (std::isfinite(rq)) value = rq;
        }
        best = std::min(best, std::abs(value));
    }
    return best;
}

namespace {

double fixed_point_norm(const StatePair& s, double* sup = nullptr) {
    const auto r = residual(s);
    if (sup) *sup = r.sup;
    double acc = 0.0;
    for (std::size_t j = 0; j < r.res_u.size(); ++j) acc += r.res_u[j] * r.res_u[j] + r.res_v[j] * r.res_v[j];
    return std::sqrt(acc);
}

}  // namespace

StatePair newton_solve(const StatePair& s0, double frozen_beta, const NewtonOptions& opts, NewtonReport* report) {
    require_same_grid(s0.u, s0.v);
    StatePair s{frozen_beta, s0.u, s0.v};
    if (opts.check_singular) {
        const double m = CoupledJacobian(s).min_abs_eigenvalue();
        if (m <= opts.singular_tol) {
            std::ostringstream os;
            os << "Jacobian singular at beta = " << frozen_beta << " (min |eigenvalue| " << m << ")";
            throw SingularJacobian(os.str());
        }
    }

    double sup = 0.0;
    double norm = fixed_point_norm(s, &sup);
    int it = 0;
    for (; it < opts.max_iter && sup > opts.tol; ++it) {
        const auto jac = CoupledJacobian(s).sparse();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw NoConvergence("singular Jacobian during Newton iteration");
        const Eigen::VectorXd step = lu.solve(strong_residual(s));
        if (!step.allFinite()) throw NoConvergence("non-finite Newton step");

        const Eigen::VectorXd x = interleave(s.u, s.v);
        double t = 1.0;
        bool accepted = false;
        while (t >= opts.min_step) {
            StatePair trial{frozen_beta, s.u, s.v};
            deinterleave(x - t * step, trial.u, trial.v);
            double trial_sup = 0.0;
            const double trial_norm = fixed_point_norm(trial, &trial_sup);
            if (std::isfinite(trial_norm) && trial_norm <= (1.0 - 1e-4 * t) * norm) {
                s = std::move(trial);
                norm = trial_norm;
                sup = trial_sup;
                accepted = true;
                break;
            }
            t *= opts.armijo_factor;
        }
        if (!accepted) {
            // Full steps at the round-off floor may not decrease the norm.
            if (sup <= 10.0 * opts.tol) break;
            std::ostringstream os;
            os << "Armijo line search failed at residual " << sup;
            throw NoConvergence(os.str());
        }
    }
    if (report) {
        report->iterations = it;
        report->residual_sup = sup;
    }
    if (!(sup <= opts.tol)) {
        std::ostringstream os;
        os << "Newton did not reach " << opts.tol << " (residual " << sup << " after " << it << " iterations)";
        throw NoConvergence(os.str());
    }
    return s;
}

double h_beta_form(const ScalarSolution& w, double beta, const RadialFunction& phi, const RadialFunction& psi) {
    if (beta == -1.0) throw PoleAtMinusOne("H_beta is singular at beta = -1");
    require_same_grid(phi, psi);
    require_same_grid(phi, w.profile);
    const double a = (beta + 3.0) / (beta + 1.0);
    const double b = 4.0 * beta / (beta + 1.0);
    std::vector<double> density(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) {
        const double w2 = w.profile[j] * w.profile[j];
        density[j] = w2 * (a * (phi[j] * phi[j] + psi[j] * psi[j]) + b * phi[j] * psi[j]);
    }
    return inner_products(phi, phi).h1 + inner_products(psi, psi).h1 - integrate(phi.grid(), density);
}

int coupled_morse_index(const ScalarSolution& w, double beta, const BifurcationTable* table, double guard) {
    if (table) {
        for (const auto& row : table->rows) {
            if (std::abs(beta - row.beta) <= guard) {
                std::ostringstream os;
                os << "beta = " << beta << " is within " << guard << " of beta_{" << table->k << "," << row.i << "}";
                throw AtBifurcation(os.str());
            }
        }
    }
    return static_cast<int>(CoupledJacobian(synchronized_point(w, beta)).count_below(0.0));
}

StatePair map_T(int l, const StatePair& s) {
    if (l < 1 || l > 4) throw std::invalid_argument("map_T needs l in 1..4");
    if (!(s.beta > -1.0)) throw PoleAtMinusOne("T_l is defined for beta > -1");
    const double c = 0.5 * std::sqrt(1.0 + s.beta);
    const auto sum = c * (s.u + s.v);
    const auto diff = c * (s.u - s.v);
    const double b = moebius(s.beta);
    switch (l) {
        case 1: return {b, sum, diff};
        case 2: return {b, diff, sum};
        case 3: return {b, -sum, diff};
        default: return {b, diff, -sum};
    }
}

StatePair circle_solution(const ScalarSolution& w, double theta) {
    return {1.0, std::cos(theta) * w.profile, std::sin(theta) * w.profile};
}

}  // namespace nodalbif

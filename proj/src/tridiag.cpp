#include "nodalbif/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace nodalbif {

std::vector<double> SymTridiag::apply(std::span<const double> x) const {
    const std::size_t n = size();
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = diag[j] * x[j];
        if (j > 0) s += off[j - 1] * x[j - 1];
        if (j + 1 < n) s += off[j] * x[j + 1];
        y[j] = s;
    }
    return y;
}

std::size_t SymTridiag::count_below(double x, std::span<const double> mass) const {
    const std::size_t n = size();
    const bool pencil = !mass.empty();
    // Pivots of the LDL^T factorization of T - xM; a zero pivot is nudged off
    // zero so the count stays well defined.
    const double tiny = std::numeric_limits<double>::min() * 1e10;
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double shift = pencil ? x * mass[j] : x;
        if (j == 0) {
            q = diag[0] - shift;
        } else {
            q = diag[j] - shift - off[j - 1] * off[j - 1] / q;
        }
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

std::pair<double, double> SymTridiag::gershgorin() const {
    const std::size_t n = size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < n; ++j) {
        double rad = 0.0;
        if (j > 0) rad += std::abs(off[j - 1]);
        if (j + 1 < n) rad += std::abs(off[j]);
        lo = std::min(lo, diag[j] - rad);
        hi = std::max(hi, diag[j] + rad);
    }
    return {lo, hi};
}

double SymTridiag::eigenvalue(std::size_t index, std::span<const double> mass) const {
    if (index >= size()) throw std::out_of_range("eigenvalue index beyond matrix size");
    double lo = 0.0;
    double hi = 0.0;
    if (mass.empty()) {
        std::tie(lo, hi) = gershgorin();
        const double pad = 1e-12 * std::max(std::abs(lo), std::abs(hi)) + 1e-300;
        lo -= pad;
        hi += pad;
    } else {
        // T positive definite: all finite pencil eigenvalues are positive.
        lo = 0.0;
        hi = 1.0;
        int guard = 0;
        while (count_below(hi, mass) <= index) {
            hi *= 2.0;
            if (++guard > 2000) throw std::runtime_error("pencil eigenvalue is not finite");
        }
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (count_below(mid, mass) > index) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> SymTridiag::eigenvector(double lambda, std::span<const double> mass) const {
    const std::size_t n = size();
    const bool pencil = !mass.empty();
    std::vector<double> sub(off.begin(), off.end());
    std::vector<double> sup(off.begin(), off.end());
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = diag[j] - lambda * (pencil ? mass[j] : 1.0);

    // Deterministic, non-symmetric start so it is never orthogonal to the target.
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = 1.0 + 0.5 * std::sin(0.37 * static_cast<double>(j) + 0.1);

    const double eps = std::numeric_limits<double>::epsilon();
    double scale = 0.0;
    for (double v : d) scale = std::max(scale, std::abs(v));
    for (double v : off) scale = std::max(scale, std::abs(v));

    auto normalize = [&](std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += v[j] * v[j] * (pencil ? mass[j] : 1.0);
        s = std::sqrt(s);
        for (double& vj : v) vj /= s;
    };

    for (int it = 0; it < 4; ++it) {
        std::vector<double> rhs(n);
        for (std::size_t j = 0; j < n; ++j) rhs[j] = x[j] * (pencil ? mass[j] : 1.0);
        if (!solve_tridiagonal(sub, d, sup, rhs)) {
            // Exactly singular shift: perturb by a rounding-level amount.
            for (double& v : d) v += eps * scale;
            --it;
            continue;
        }
        x = std::move(rhs);
        normalize(x);
    }
    return x;
}

bool solve_tridiagonal(std::span<const double> sub_in, std::span<const double> diag_in,
                       std::span<const double> sup_in, std::span<double> b) {
    const std::size_t n = diag_in.size();
    if (n == 0) return true;
    const std::vector<double> dl(sub_in.begin(), sub_in.end());
    std::vector<double> d(diag_in.begin(), diag_in.end());
    std::vector<double> du(sup_in.begin(), sup_in.end());
    std::vector<double> du2(n > 2 ? n - 2 : 0, 0.0);

    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == 0.0) return false;
            const double fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            if (i + 2 < n) du2[i] = 0.0;
        } else {
            const double fact = d[i] / dl[i];
            d[i] = dl[i];
            double tmp = d[i + 1];
            d[i + 1] = du[i] - fact * tmp;
            du[i] = tmp;
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= fact * b[i];
        }
    }
    if (d[n - 1] == 0.0) return false;
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    if (n > 2) {
        for (std::size_t ii = n - 2; ii-- > 0;) {
            b[ii] = (b[ii] - du[ii] * b[ii + 1] - du2[ii] * b[ii + 2]) / d[ii];
        }
    }
    return true;
}

}  // namespace nodalbif

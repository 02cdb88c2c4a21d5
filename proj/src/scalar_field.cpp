#include "nodalbif/scalar_field.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "nodalbif/errors.hpp"

namespace nodalbif {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::array<double, 2>;

struct RadialScalarOde {
    double bound;
    void operator()(const State& x, State& dx, double r) const {
        if (!(std::abs(x[0]) <= bound)) {
            throw BlowUp("|u| exceeded " + std::to_string(bound) + " at r = " + std::to_string(r));
        }
        dx[0] = x[1];
        dx[1] = -2.0 / r * x[1] + x[0] - x[0] * x[0] * x[0];
    }
};

// u(r) = a + (a - a^3) r^2 / 6 + O(r^4)
State series_start(double a, double r) {
    const double c = (a - a * a * a) / 6.0;
    return {a + c * r * r, 2.0 * c * r};
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

void require_positive_amplitude(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("shooting amplitude must be positive");
}

}  // namespace

ShotSummary shoot_summary(double a, const ShootingOptions& opts) {
    require_positive_amplitude(a);
    auto stepper = odeint::make_dense_output(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_dopri5<State>());
    State x = series_start(a, opts.origin_radius);
    int changes = 0;
    int last = sign_of(x[0]);
    double final_u = x[0];
    odeint::integrate_adaptive(stepper, RadialScalarOde{opts.blowup_bound}, x, opts.origin_radius, 1.0, 1e-6,
                               [&](const State& s, double) {
                                   const int sg = sign_of(s[0]);
                                   if (sg != 0 && last != 0 && sg != last) ++changes;
                                   if (sg != 0) last = sg;
                                   final_u = s[0];
                               });
    return {final_u, changes};
}

ShotResult shoot(double a, const GridPtr& grid, const ShootingOptions& opts) {
    require_positive_amplitude(a);
    const std::size_t n = grid->size();
    std::vector<double> values(n);
    std::vector<double> times{opts.origin_radius};
    std::vector<std::size_t> slot;
    for (std::size_t j = 0; j < n; ++j) {
        if (grid->r(j) <= opts.origin_radius) {
            values[j] = series_start(a, grid->r(j))[0];
        } else {
            times.push_back(grid->r(j));
            slot.push_back(j);
        }
    }
    times.push_back(1.0);

    auto stepper = odeint::make_dense_output(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_dopri5<State>());
    State x = series_start(a, opts.origin_radius);
    std::size_t idx = 0;
    double boundary = 0.0;
    odeint::integrate_times(stepper, RadialScalarOde{opts.blowup_bound}, x, times.begin(), times.end(), 1e-6,
                            [&](const State& s, double) {
                                // first observation is the start point
                                if (idx > 0 && idx <= slot.size()) values[slot[idx - 1]] = s[0];
                                if (idx == slot.size() + 1) boundary = s[0];
                                ++idx;
                            });

    RadialFunction traj(grid, std::move(values));
    int nodes = 0;
    int last = 0;
    for (double v : traj.values()) {
        const int sg = sign_of(v);
        if (sg == 0) continue;
        if (last != 0 && sg != last) ++nodes;
        last = sg;
    }
    return {std::move(traj), boundary, nodes};
}

double scalar_residual(const RadialFunction& w) {
    const auto op = assemble_operator(w.grid(), 1.0);
    std::vector<double> rhs(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) rhs[j] = w[j] * w[j] * w[j];
    op.solve(rhs);
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s = std::max(s, std::abs(w[j] - rhs[j]));
    return s;
}

namespace {

// True when the k-th sign change has entered (0,1].
bool beyond_target(double a, int k, const ShootingOptions& opts, ShotSummary* out) {
    try {
        const auto s = shoot_summary(a, opts);
        if (out) *out = s;
        return s.sign_changes_to_boundary >= k;
    } catch (const BlowUp&) {
        if (out) *out = {std::numeric_limits<double>::infinity(), std::numeric_limits<int>::max()};
        return true;
    }
}

RadialFunction newton_polish(RadialFunction w, const FindOptions& opts, double& residual, int& iterations) {
    const auto& grid = w.grid();
    const auto base = assemble_operator(grid, 1.0);
    residual = scalar_residual(w);
    iterations = 0;
    while (residual > 0.01 * opts.newton_tol && iterations < opts.newton_max_iter) {
        auto f = base.apply(w);
        RadialFunction c(grid);
        for (std::size_t j = 0; j < w.size(); ++j) {
            f[j] -= w[j] * w[j] * w[j];
            c[j] = 1.0 - 3.0 * w[j] * w[j];
        }
        const auto jac = assemble_operator(grid, c);
        std::vector<double> step(f.values().begin(), f.values().end());
        if (!jac.solve(step)) throw NoConvergence("singular scalar Jacobian in Newton polish");
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step[j];
        ++iterations;
        const double next = scalar_residual(w);
        // round-off floor reached
        if (next >= residual && next <= opts.newton_tol) {
            residual = next;
            break;
        }
        residual = next;
    }
    return w;
}

}  // namespace

ScalarSolution find_w(int k, const GridPtr& grid, const FindOptions& opts) {
    if (k < 1) throw std::invalid_argument("find_w needs k >= 1");
    const auto& so = opts.shooting;

    double lo = opts.scan_start;
    if (beyond_target(lo, k, so, nullptr)) {
        throw BracketingFailed("scan start " + std::to_string(lo) + " already beyond target k");
    }
    double hi = lo;
    do {
        lo = hi;
        hi *= opts.scan_ratio;
        if (hi > opts.amplitude_cap) {
            throw BracketingFailed("no amplitude below " + std::to_string(opts.amplitude_cap) +
                                   " reaches " + std::to_string(k - 1) + " interior nodes");
        }
    } while (!beyond_target(hi, k, so, nullptr));

    ShotSummary s_lo{}, s_hi{};
    beyond_target(lo, k, so, &s_lo);
    beyond_target(hi, k, so, &s_hi);
    for (int it = 0; it < 200; ++it) {
        if (std::min(std::abs(s_lo.boundary_value), std::abs(s_hi.boundary_value)) <= opts.boundary_tol) break;
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        ShotSummary s_mid{};
        if (beyond_target(mid, k, so, &s_mid)) {
            hi = mid;
            s_hi = s_mid;
        } else {
            lo = mid;
            s_lo = s_mid;
        }
    }
    const bool take_lo = std::abs(s_lo.boundary_value) <= std::abs(s_hi.boundary_value);
    const double a = take_lo ? lo : hi;

    ScalarSolution sol;
    sol.k = k;
    sol.amplitude = a;
    auto shot = shoot(a, grid, so);
    sol.boundary_value = shot.boundary_value;
    sol.shooting_profile = shot.trajectory;
    sol.profile = newton_polish(shot.trajectory, opts, sol.residual_sup, sol.newton_iterations);
    if (sol.residual_sup > opts.newton_tol) {
        throw NoConvergence("Newton polish for k = " + std::to_string(k) + " stalled at residual " +
                            std::to_string(sol.residual_sup));
    }
    if (nodal_count(sol.profile) != k - 1 || !(sol.profile.value_at_origin() > 0.0)) {
        throw BracketingFailed("polished profile lost the nodal structure of w_" + std::to_string(k));
    }
    return sol;
}

MorseResult scalar_morse_index(const ScalarSolution& w) {
    const auto& grid = w.profile.grid();
    RadialFunction c(grid);
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = 1.0 - 3.0 * w.profile[j] * w.profile[j];
    const auto t = assemble_operator(grid, c).symmetric_form();
    MorseResult out;
    out.index = static_cast<int>(t.count_below(0.0));
    double m = std::numeric_limits<double>::infinity();
    if (out.index > 0) m = std::min(m, std::abs(t.eigenvalue(static_cast<std::size_t>(out.index - 1))));
    if (static_cast<std::size_t>(out.index) < t.size()) {
        m = std::min(m, std::abs(t.eigenvalue(static_cast<std::size_t>(out.index))));
    }
    out.min_abs_eig = m;
    return out;
}

std::vector<BumpIdentity> bump_identity_check(const ScalarSolution& w) {
    const auto& f = w.profile;
    const auto& grid = *f.grid();
    const std::size_t n = grid.size();
    const double h = grid.h();
    const auto q = grid.quad_weights();

    std::vector<double> edges{0.0};
    for (double z : sign_change_radii(f)) edges.push_back(z);
    edges.push_back(1.0);

    std::vector<BumpIdentity> out;
    std::size_t j = 0;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const double left = edges[b];
        const double right = edges[b + 1];
        while (j < n && grid.r(j) <= left) ++j;
        const std::size_t first = j;
        while (j < n && grid.r(j) < right) ++j;
        const std::size_t last = j;  // one past
        if (first == last) continue;

        auto cap = [&](std::size_t i) { return grid.r(i) * f[i]; };
        double grad = cap(first) * cap(first) / (grid.r(first) - left);
        for (std::size_t i = first; i + 1 < last; ++i) {
            const double d = cap(i + 1) - cap(i);
            grad += d * d / h;
        }
        grad += cap(last - 1) * cap(last - 1) / (right - grid.r(last - 1));
        grad *= 4.0 * kPi;

        double mass = 0.0, quartic = 0.0;
        for (std::size_t i = first; i < last; ++i) {
            const double v2 = f[i] * f[i];
            mass += q[i] * v2;
            quartic += q[i] * v2 * v2;
        }
        // w = b on the annulus, so int w^2 b^2 = int b^4
        out.push_back({grad + mass - 3.0 * quartic, -2.0 * quartic});
    }
    return out;
}

}  // namespace nodalbif

#include "nodalbif/continuation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseLU>

#include "json.hpp"
#include "nodalbif/errors.hpp"

namespace nodalbif {

std::string to_string(Family f) {
    switch (f) {
        case Family::U: return "U";
        case Family::W: return "W";
        case Family::T: return "T";
        case Family::ST: return "ST";
    }
    return "U";
}

Family family_from_string(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "u") return Family::U;
    if (t == "w") return Family::W;
    if (t == "t") return Family::T;
    if (t == "st") return Family::ST;
    throw std::invalid_argument("unknown family '" + s + "'");
}

ModeData prepare_mode(const GridPtr& grid, int k, int m, const FindOptions& opts) {
    ModeData d;
    d.w = find_w(k, grid, opts);
    d.spectrum = weighted_eigs(d.w, m);
    d.table = bifurcation_table(d.spectrum);
    return d;
}

NodalSignature expected_signature(Family f, int k, int i) {
    NodalSignature s;
    if (f == Family::U) {
        s.n_u = s.n_v = s.n_sum = k - 1;
        s.n_diff = i - 1;
    } else if (f == Family::W) {
        s.n_u = s.n_sum = s.n_diff = k - 1;
        s.n_v = i - 1;
    } else {
        throw std::invalid_argument("expected_signature is defined for U and W families");
    }
    return s;
}

bool sign_class_ok(Family f, const NodalSignature& s) {
    if (f == Family::U) return s.u0 > 0.0 && s.v0 > 0.0;
    if (f == Family::W) return s.u0 > std::abs(s.v0);
    return true;
}

double bifurcation_beta(Family f, const ModeData& mode, int i) {
    const auto& row = mode.table.row(i);
    if (f == Family::U) return row.beta;
    if (f == Family::W) return row.beta_tilde;
    throw std::invalid_argument("bifurcation_beta is defined for U and W families");
}

StatePair bifurcation_point(Family f, const ModeData& mode, int i) {
    const double b = bifurcation_beta(f, mode, i);
    return f == Family::U ? synchronized_point(mode.w, b) : semitrivial_point(mode.w, b);
}

Window predicted_window(Family f, const ModeData& mode, int i) {
    const double b = bifurcation_beta(f, mode, i);
    const int k = mode.k();
    if (i == k) return {b, b};
    const bool left = (f == Family::U) == (i > k);
    return left ? Window{-std::numeric_limits<double>::infinity(), b}
                : Window{b, std::numeric_limits<double>::infinity()};
}

Window containment_window(Family f, const ModeData& mode, int i) {
    const int k = mode.k();
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (i == k) return {1.0, 1.0};
    if (f == Family::U) return i > k ? Window{-inf, 0.0} : Window{1.0, inf};
    return i > k ? Window{3.0, inf} : Window{-inf, 1.0};
}

Window exploration_window(Family f, const ModeData& mode, int i, double width) {
    const auto pred = predicted_window(f, mode, i);
    const auto outer = containment_window(f, mode, i);
    if (std::isinf(pred.lo)) return {pred.hi - width, outer.hi};
    return {outer.lo, pred.lo + width};
}

std::pair<RadialFunction, RadialFunction> branch_tangent(const ModeData& mode, int i, Family f) {
    const auto& phi = mode.spectrum.eigenfunctions.at(static_cast<std::size_t>(i - 1));
    RadialFunction a = phi, b = phi;
    if (f == Family::U) {
        b *= -1.0;
    } else if (f == Family::W) {
        a *= 0.0;
    } else {
        throw std::invalid_argument("branch_tangent is defined for U and W families");
    }
    const double norm = std::sqrt(inner_products(a, a).l2 + inner_products(b, b).l2);
    a *= 1.0 / norm;
    b *= 1.0 / norm;
    return {std::move(a), std::move(b)};
}

namespace {

// Augmented state X = (u_1, v_1, ..., u_n, v_n, beta) with the metric
// sum_j q_j (du_j^2 + dv_j^2) + dbeta^2, q the volume weights.
using Vec = Eigen::VectorXd;

Vec to_vec(const StatePair& s) {
    Vec x(static_cast<Eigen::Index>(2 * s.u.size() + 1));
    x.head(x.size() - 1) = interleave(s.u, s.v);
    x[x.size() - 1] = s.beta;
    return x;
}

StatePair from_vec(const Vec& x, const GridPtr& grid) {
    StatePair s{x[x.size() - 1], RadialFunction(grid), RadialFunction(grid)};
    deinterleave(x.head(x.size() - 1), s.u, s.v);
    return s;
}

Vec metric_weights(const GridPtr& grid) {
    const auto q = grid->quad_weights();
    Vec m(static_cast<Eigen::Index>(2 * q.size() + 1));
    for (std::size_t j = 0; j < q.size(); ++j) m[2 * j] = m[2 * j + 1] = q[j];
    m[m.size() - 1] = 1.0;
    return m;
}

double m_norm(const Vec& x, const Vec& m) { return std::sqrt((x.array() * x.array() * m.array()).sum()); }

struct Correction {
    Vec x;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
};

// Newton on F(X) = 0, <tau, X - X_pred>_M = 0 with beta free.
Correction correct(const Vec& pred, const Vec& tau, const Vec& m, const GridPtr& grid, double tol, int max_iter) {
    const auto n2 = pred.size() - 1;
    const Vec row = (tau.array() * m.array()).matrix();
    const double h = grid->h();
    const double row_scale = 1.0 / (h * h * row.cwiseAbs().maxCoeff());

    Correction c{pred, 0, false, 0.0};
    for (int it = 0; it < max_iter; ++it) {
        const auto s = from_vec(c.x, grid);
        const auto jac = CoupledJacobian(s).sparse();
        const Vec fb = CoupledJacobian::beta_derivative(s);

        const Vec rrow = row_scale * row;
        Vec rhs(n2 + 1);
        rhs.head(n2) = strong_residual(s);
        rhs[n2] = rrow.dot(c.x - pred);

        // Block elimination of the border on an LU of the banded Jacobian,
        // then iterative refinement against the full bordered matrix.
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) return c;
        const Vec y = lu.solve(fb);
        const double schur = rrow[n2] - rrow.head(n2).dot(y);
        auto bordered_solve = [&](const Vec& b) {
            Vec z(n2 + 1);
            const Vec g = lu.solve(b.head(n2));
            z[n2] = (b[n2] - rrow.head(n2).dot(g)) / schur;
            z.head(n2) = g - z[n2] * y;
            return z;
        };
        auto bordered_apply = [&](const Vec& z) {
            Vec out(n2 + 1);
            out.head(n2) = jac * z.head(n2) + z[n2] * fb;
            out[n2] = rrow.dot(z);
            return out;
        };
        Vec step = bordered_solve(rhs);
        for (int refine = 0; refine < 2 && step.allFinite(); ++refine) step += bordered_solve(rhs - bordered_apply(step));
        if (!step.allFinite()) return c;
        c.x -= step;
        c.iterations = it + 1;
        c.residual = residual(from_vec(c.x, grid)).sup;
        if (!std::isfinite(c.residual) || c.residual > 1e6) return c;
        if (c.residual <= tol) {
            c.converged = true;
            return c;
        }
    }
    return c;
}

bool signature_matches(Family f, const NodalSignature& expected, const NodalSignature& got) {
    return expected.same_counts(got) && sign_class_ok(f, got);
}

}  // namespace

StatePair switch_branch(const ModeData& mode, int i, Family f, const ContinuationOptions& opts) {
    const auto star = bifurcation_point(f, mode, i);
    const auto& grid = star.grid();
    const auto [ta, tb] = branch_tangent(mode, i, f);
    Vec t = to_vec({0.0, ta, tb});
    const Vec x0 = to_vec(star);
    const Vec m = metric_weights(grid);
    const auto expected = expected_signature(f, mode.k(), i);

    for (double sigma : {1.0, -1.0}) {
        double ds = opts.ds0;
        for (int halving = 0; halving <= opts.switch_halvings; ++halving, ds *= 0.5) {
            const Vec pred = x0 + sigma * ds * t;
            const auto c = correct(pred, t, m, grid, opts.corrector_tol, 2 * opts.corrector_max_iter);
            if (!c.converged) continue;
            auto s = from_vec(c.x, grid);
            if (signature_matches(f, expected, nodal_signature(s))) return s;
        }
    }
    std::ostringstream os;
    os << to_string(f) << "(" << mode.k() << "," << i << "): no side produced signature " << expected.str();
    throw SwitchFailed(os.str());
}

Branch continue_branch(const StatePair& prev, const StatePair& start, Family f, int k, int i, Window window,
                       const ContinuationOptions& opts) {
    const auto& grid = start.grid();
    const Vec m = metric_weights(grid);
    Branch b;
    b.family = f;
    b.k = k;
    b.i = i;
    b.signature = expected_signature(f, k, i);
    b.origin_beta = prev.beta;

    const auto sig0 = nodal_signature(start);
    if (!signature_matches(f, b.signature, sig0)) {
        throw SignatureBroken("start point has signature " + sig0.str() + ", expected " + b.signature.str());
    }
    if (!window.contains(start.beta)) {
        b.stop_reason = "window";
        return b;
    }
    b.signature.u0 = sig0.u0;
    b.signature.v0 = sig0.v0;
    b.points.push_back(start);

    Vec x_prev = to_vec(prev);
    Vec x_cur = to_vec(start);
    double ds = std::clamp(m_norm(x_cur - x_prev, m), opts.ds_min, opts.ds_max);
    b.stats.ds_smallest = b.stats.ds_largest = ds;
    int easy = 0;
    bool last_failure_signature = false;

    while (b.points.size() < opts.max_points) {
        const Vec sec = x_cur - x_prev;
        const Vec tau = sec / m_norm(sec, m);
        const Vec pred = x_cur + ds * tau;
        const auto c = correct(pred, tau, m, grid, opts.corrector_tol, opts.corrector_max_iter);
        b.stats.corrector_iterations += c.iterations;

        bool ok = c.converged;
        NodalSignature sig;
        StatePair s;
        if (ok) {
            s = from_vec(c.x, grid);
            sig = nodal_signature(s);
            ok = signature_matches(f, b.signature, sig);
            last_failure_signature = !ok;
        } else {
            last_failure_signature = false;
        }
        if (!ok) {
            ++b.stats.rejected;
            easy = 0;
            ds *= 0.5;
            if (ds < opts.ds_min) {
                std::ostringstream os;
                os << to_string(f) << "(" << k << "," << i << ") near beta = " << x_cur[x_cur.size() - 1];
                if (last_failure_signature) {
                    throw SignatureBroken(os.str() + ": signature " + sig.str() + ", expected " + b.signature.str());
                }
                throw CorrectorStalled(os.str() + ": step fell below " + std::to_string(opts.ds_min));
            }
            continue;
        }

        if (!window.contains(s.beta)) {
            // Close the branch exactly on the window edge it crossed.
            const double edge = s.beta > window.hi ? window.hi : window.lo;
            const double t = (edge - x_cur[x_cur.size() - 1]) / (s.beta - x_cur[x_cur.size() - 1]);
            if (std::isfinite(t) && t > 0.0) {
                const Vec guess = x_cur + t * (c.x - x_cur);
                NewtonOptions no;
                no.check_singular = false;
                no.tol = opts.corrector_tol;
                try {
                    auto e = newton_solve(from_vec(guess, grid), edge, no);
                    if (signature_matches(f, b.signature, nodal_signature(e))) {
                        b.points.push_back(std::move(e));
                        ++b.stats.accepted;
                    }
                } catch (const NoConvergence&) {
                }
            }
            b.stop_reason = "window";
            break;
        }
        if (std::max(s.u.sup_norm(), s.v.sup_norm()) > opts.norm_overflow) {
            b.stop_reason = "overflow";
            break;
        }
        b.points.push_back(std::move(s));
        ++b.stats.accepted;
        b.stats.ds_smallest = std::min(b.stats.ds_smallest, ds);
        b.stats.ds_largest = std::max(b.stats.ds_largest, ds);
        x_prev = std::move(x_cur);
        x_cur = c.x;

        if (c.iterations <= opts.easy_iterations) {
            if (++easy >= opts.easy_streak) {
                ds = std::min(ds * opts.grow, opts.ds_max);
                easy = 0;
            }
        } else {
            easy = 0;
        }
    }
    if (b.stop_reason.empty()) b.stop_reason = "max_points";
    return b;
}

Branch reference_branch(Family f, const ModeData& mode, const std::vector<double>& betas) {
    if (f != Family::T && f != Family::ST) throw std::invalid_argument("reference_branch needs family T or ST");
    Branch b;
    b.family = f;
    b.k = mode.k();
    b.i = 0;
    for (double beta : betas) {
        if (f == Family::T && !(beta > -1.0)) continue;
        b.points.push_back(f == Family::T ? synchronized_point(mode.w, beta) : semitrivial_point(mode.w, beta));
    }
    if (!b.points.empty()) {
        const auto sig = nodal_signature(b.points.front());
        b.signature = sig;
    }
    b.stop_reason = "samples";
    return b;
}

Branch trace_branch(const ModeData& mode, int i, Family f, Window window, const ContinuationOptions& opts) {
    const auto start = switch_branch(mode, i, f, opts);
    return continue_branch(bifurcation_point(f, mode, i), start, f, mode.k(), i, window, opts);
}

StatePair point_at_beta(const Branch& b, double beta) {
    for (std::size_t j = 0; j + 1 < b.points.size(); ++j) {
        const auto& p = b.points[j];
        const auto& q = b.points[j + 1];
        if ((p.beta - beta) * (q.beta - beta) > 0.0) continue;
        const double t = q.beta == p.beta ? 0.0 : (beta - p.beta) / (q.beta - p.beta);
        StatePair guess{beta, (1.0 - t) * p.u + t * q.u, (1.0 - t) * p.v + t * q.v};
        NewtonOptions no;
        no.check_singular = false;
        return newton_solve(guess, beta, no);
    }
    throw std::out_of_range("branch does not reach beta = " + std::to_string(beta));
}

double limit_system_residual(const StatePair& s) {
    const double c = std::sqrt(1.0 + s.beta);
    const auto uu = c * s.u;
    const auto vv = c * s.v;
    const auto op = assemble_operator(s.grid(), 1.0);
    std::vector<double> nu(uu.size()), nv(uu.size());
    for (std::size_t j = 0; j < uu.size(); ++j) {
        nu[j] = uu[j] * vv[j] * vv[j];
        nv[j] = uu[j] * uu[j] * vv[j];
    }
    op.solve(nu);
    op.solve(nv);
    double r = 0.0;
    for (std::size_t j = 0; j < uu.size(); ++j) r = std::max({r, std::abs(uu[j] - nu[j]), std::abs(vv[j] - nv[j])});
    return r;
}

AsymptoticsReport asymptotics_check(const Branch& b, const std::vector<double>& betas) {
    AsymptoticsReport rep;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double beta : betas) {
        const auto s = point_at_beta(b, beta);
        AsymptoticsSample a;
        a.beta = beta;
        a.scaled_sup = std::sqrt(beta) * std::max(s.u.sup_norm(), s.v.sup_norm());
        a.limit_residual = limit_system_residual(s);
        a.signature = nodal_signature(s);
        lo = std::min(lo, a.scaled_sup);
        hi = std::max(hi, a.scaled_sup);
        rep.samples.push_back(a);
    }
    rep.spread = rep.samples.empty() ? 0.0 : hi / lo - 1.0;
    rep.residual_decreasing = rep.samples.size() > 1;
    for (std::size_t j = 1; j < rep.samples.size(); ++j) {
        if (!(rep.samples[j].limit_residual < rep.samples[j - 1].limit_residual)) rep.residual_decreasing = false;
    }
    return rep;
}

namespace {

// Gaussian bumps of alternating sign, one per random nodal annulus.
RadialFunction probe_seed(const GridPtr& grid, int nodes, double amplitude, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> edges{0.0};
    for (int a = 0; a < nodes; ++a) edges.push_back(0.05 + 0.9 * unit(rng));
    std::sort(edges.begin() + 1, edges.end());
    edges.push_back(1.0);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;

    RadialFunction f(grid);
    for (int a = 0; a <= nodes; ++a) {
        const double left = edges[static_cast<std::size_t>(a)];
        const double right = edges[static_cast<std::size_t>(a) + 1];
        const double center = a == 0 ? 0.0 : 0.5 * (left + right);
        const double width = std::max(a == 0 ? 0.5 * right : 0.25 * (right - left), 1e-3);
        const double amp = sign * (a % 2 == 0 ? 1.0 : -1.0) * amplitude * (0.3 + 0.7 * unit(rng));
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double z = (grid->r(j) - center) / width;
            f[j] += amp * std::exp(-z * z) * (1.0 - grid->r(j));
        }
    }
    return f;
}

}  // namespace

ProbeReport nonexistence_probe(int P, int Q, const GridPtr& grid, Window betas, int attempts, std::uint64_t seed,
                               const FindOptions& find) {
    if (P < 0 || Q < 0 || attempts < 0) throw std::invalid_argument("probe needs P, Q, attempts >= 0");
    ProbeReport rep;
    rep.P = P;
    rep.Q = Q;
    rep.attempts = attempts;
    const double amplitude = find_w(std::max(P, Q) + 1, grid, find).profile.sup_norm();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    NewtonOptions no;
    no.check_singular = false;
    for (int a = 0; a < attempts; ++a) {
        const double beta = betas.lo == betas.hi ? betas.lo : betas.lo + (betas.hi - betas.lo) * unit(rng);
        StatePair s{beta, probe_seed(grid, P, amplitude, rng), probe_seed(grid, Q, amplitude, rng)};
        try {
            const auto sol = newton_solve(s, beta, no);
            const auto sig = nodal_signature(sol);
            ++rep.converged;
            if (sig.n_u == P && sig.n_v == Q && std::min(sol.u.sup_norm(), sol.v.sup_norm()) > 1e-6 * std::max(sol.u.sup_norm(), sol.v.sup_norm())) {
                ++rep.target_hits;
            }
            rep.solutions.push_back({beta, sig});
        } catch (const NoConvergence&) {
        }
    }
    return rep;
}

std::vector<SyncCrossing> detect_sync_bifurcations(const ScalarSolution& w, double lo, double hi, int samples,
                                                   double tol) {
    if (!(lo > -1.0) || !(hi > lo) || samples < 2) throw std::invalid_argument("bad scan interval");
    auto index = [&](double beta) { return coupled_morse_index(w, beta); };
    std::vector<SyncCrossing> out;
    std::function<void(double, double, int, int)> locate = [&](double a, double b, int ia, int ib) {
        if (ia == ib) return;
        if (b - a <= tol) {
            const double mid = 0.5 * (a + b);
            out.push_back({mid, ia, ib, CoupledJacobian(synchronized_point(w, mid)).min_abs_eigenvalue()});
            return;
        }
        const double mid = 0.5 * (a + b);
        const int im = index(mid);
        locate(a, mid, ia, im);
        locate(mid, b, im, ib);
    };
    double a = lo;
    int ia = index(a);
    for (int s = 1; s < samples; ++s) {
        const double b = lo + (hi - lo) * s / (samples - 1);
        const int ib = index(b);
        locate(a, b, ia, ib);
        a = b;
        ia = ib;
    }
    return out;
}

double branch_distance(const Branch& a, const Branch& b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : a.points) {
        for (const auto& q : b.points) {
            const double db = std::abs(p.beta - q.beta);
            if (db >= best) continue;
            double d = db;
            for (std::size_t j = 0; j < p.u.size() && d < best; ++j) {
                d = std::max({d, std::abs(p.u[j] - q.u[j]), std::abs(p.v[j] - q.v[j])});
            }
            best = std::min(best, d);
        }
    }
    return best;
}

std::string branch_to_json(const Branch& b, bool with_profiles) {
    using nlohmann::json;
    json j;
    j["family"] = to_string(b.family);
    j["k"] = b.k;
    j["i"] = b.i;
    j["signature"] = {b.signature.n_u, b.signature.n_v, b.signature.n_sum, b.signature.n_diff};
    j["meta"] = {{"origin_beta", b.origin_beta},
                 {"accepted", b.stats.accepted},
                 {"rejected", b.stats.rejected},
                 {"corrector_iterations", b.stats.corrector_iterations},
                 {"ds_smallest", b.stats.ds_smallest},
                 {"ds_largest", b.stats.ds_largest},
                 {"stop_reason", b.stop_reason}};
    json pts = json::array();
    for (const auto& p : b.points) {
        const double h1 = std::sqrt(inner_products(p.u, p.u).h1 + inner_products(p.v, p.v).h1);
        json q{{"beta", p.beta}, {"sup_u", p.u.sup_norm()}, {"sup_v", p.v.sup_norm()}, {"h1", h1}};
        if (with_profiles) {
            q["u"] = std::vector<double>(p.u.values().begin(), p.u.values().end());
            q["v"] = std::vector<double>(p.v.values().begin(), p.v.values().end());
        }
        pts.push_back(std::move(q));
    }
    j["points"] = std::move(pts);
    return j.dump();
}

BranchRecord branch_record_from_json(const std::string& text) {
    using nlohmann::json;
    BranchRecord r;
    try {
        const auto j = json::parse(text);
        r.family = j.at("family").get<std::string>();
        (void)family_from_string(r.family);
        r.k = j.at("k").get<int>();
        r.i = j.at("i").get<int>();
        r.signature = j.at("signature").get<std::vector<int>>();
        if (r.signature.size() != 4) throw SchemaError("signature must have 4 entries");
        for (const auto& p : j.at("points")) {
            BranchRecord::Point q{p.at("beta").get<double>(), p.at("sup_u").get<double>(), p.at("sup_v").get<double>()};
            if (p.contains("h1")) q.h1 = p.at("h1").get<double>();
            r.points.push_back(q);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("branch JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("branch JSON: ") + e.what());
    }
    return r;
}

}  // namespace nodalbif

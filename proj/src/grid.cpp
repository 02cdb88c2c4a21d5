#include "nodalbif/grid.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "nodalbif/errors.hpp"

namespace nodalbif {

RadialGrid::RadialGrid(std::size_t n_interior) : h_(1.0 / static_cast<double>(n_interior + 1)) {
    if (n_interior < 3) throw std::invalid_argument("RadialGrid needs at least 3 interior nodes");
    nodes_.resize(n_interior);
    weights_.resize(n_interior);
    for (std::size_t j = 0; j < n_interior; ++j) {
        const double r = static_cast<double>(j + 1) * h_;
        nodes_[j] = r;
        weights_[j] = 4.0 * kPi * r * r * h_;
    }
}

GridPtr make_grid(std::size_t n_interior) { return std::make_shared<const RadialGrid>(n_interior); }

RadialFunction::RadialFunction(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}

RadialFunction::RadialFunction(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) {
        throw GridMismatch("value count " + std::to_string(values_.size()) + " != grid size " +
                           std::to_string(grid_->size()));
    }
}

RadialFunction RadialFunction::sample(GridPtr grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid->size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(grid->r(j));
    return RadialFunction(std::move(grid), std::move(v));
}

double RadialFunction::value_at_origin() const { return (4.0 * values_[0] - values_[1]) / 3.0; }

double RadialFunction::sup_norm() const {
    double s = 0.0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
}

double RadialFunction::l2_norm() const { return std::sqrt(inner_products(*this, *this).l2); }

double RadialFunction::h1_norm() const { return std::sqrt(inner_products(*this, *this).h1); }

RadialFunction& RadialFunction::operator+=(const RadialFunction& o) {
    require_same_grid(*this, o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] += o.values_[j];
    return *this;
}

RadialFunction& RadialFunction::operator-=(const RadialFunction& o) {
    require_same_grid(*this, o);
    for (std::size_t j = 0; j < values_.size(); ++j) values_[j] -= o.values_[j];
    return *this;
}

RadialFunction& RadialFunction::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

void require_same_grid(const RadialFunction& f, const RadialFunction& g) {
    if (!f.grid() || !g.grid()) throw GridMismatch("function without grid");
    if (f.grid() != g.grid() && f.grid()->size() != g.grid()->size()) {
        throw GridMismatch("grids of size " + std::to_string(f.grid()->size()) + " and " +
                           std::to_string(g.grid()->size()));
    }
}

RadialOperator::RadialOperator(GridPtr grid, std::vector<double> sub, std::vector<double> diag,
                               std::vector<double> sup)
    : grid_(std::move(grid)), sub_(std::move(sub)), diag_(std::move(diag)), sup_(std::move(sup)) {}

RadialFunction RadialOperator::apply(const RadialFunction& f) const {
    const std::size_t n = diag_.size();
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = diag_[j] * f[j];
        if (j > 0) s += sub_[j] * f[j - 1];
        if (j + 1 < n) s += sup_[j] * f[j + 1];
        y[j] = s;
    }
    return RadialFunction(grid_, std::move(y));
}

SymTridiag RadialOperator::symmetric_form() const {
    const std::size_t n = diag_.size();
    SymTridiag t;
    t.diag = diag_;
    t.off.resize(n - 1);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        t.off[j] = grid_->r(j) * sup_[j] / grid_->r(j + 1);
    }
    return t;
}

bool RadialOperator::solve(std::span<double> rhs) const {
    const std::size_t n = diag_.size();
    std::vector<double> lower(sub_.begin() + 1, sub_.end());
    std::vector<double> upper(sup_.begin(), sup_.begin() + static_cast<std::ptrdiff_t>(n - 1));
    return solve_tridiagonal(lower, diag_, upper, rhs);
}

RadialOperator assemble_operator(const GridPtr& grid, const RadialFunction& c) {
    if (c.size() != grid->size()) throw GridMismatch("coefficient not sampled on this grid");
    const std::size_t n = grid->size();
    const double h2 = grid->h() * grid->h();
    std::vector<double> sub(n, 0.0), diag(n), sup(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double r = grid->r(j);
        diag[j] = 2.0 / h2 + c[j];
        if (j > 0) sub[j] = -grid->r(j - 1) / (r * h2);
        if (j + 1 < n) sup[j] = -grid->r(j + 1) / (r * h2);
    }
    return RadialOperator(grid, std::move(sub), std::move(diag), std::move(sup));
}

RadialOperator assemble_operator(const GridPtr& grid, double c) {
    return assemble_operator(grid, RadialFunction(grid, std::vector<double>(grid->size(), c)));
}

double dirichlet_form(const RadialFunction& f, const RadialFunction& g) {
    require_same_grid(f, g);
    const auto& grid = *f.grid();
    const std::size_t n = grid.size();
    double s = 0.0;
    double fu_prev = 0.0, gu_prev = 0.0;  // r*f at r = 0
    for (std::size_t j = 0; j <= n; ++j) {
        const double fu = j < n ? grid.r(j) * f[j] : 0.0;
        const double gu = j < n ? grid.r(j) * g[j] : 0.0;
        s += (fu - fu_prev) * (gu - gu_prev);
        fu_prev = fu;
        gu_prev = gu;
    }
    return 4.0 * kPi * s / grid.h();
}

InnerProducts inner_products(const RadialFunction& f, const RadialFunction& g) {
    require_same_grid(f, g);
    const auto w = f.grid()->quad_weights();
    InnerProducts out;
    for (std::size_t j = 0; j < f.size(); ++j) {
        out.l2 += w[j] * f[j] * g[j];
        const double f2 = f[j] * f[j];
        out.l4_f += w[j] * f2 * f2;
    }
    out.h1 = dirichlet_form(f, g) + out.l2;
    return out;
}

double integrate(const GridPtr& grid, std::span<const double> density) {
    const auto w = grid->quad_weights();
    double s = 0.0;
    for (std::size_t j = 0; j < density.size(); ++j) s += w[j] * density[j];
    return s;
}

namespace {

double checked_threshold(const RadialFunction& f, double rel_threshold) {
    if (!(rel_threshold > 0.0 && rel_threshold < 0.5)) {
        throw std::invalid_argument("rel_threshold must lie in (0, 0.5)");
    }
    const double sup = f.sup_norm();
    if (!(sup > 0.0) || !std::isfinite(sup)) {
        throw AllBelowThreshold("function is numerically zero (sup norm " + std::to_string(sup) + ")");
    }
    return rel_threshold * sup;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

int nodal_count(const RadialFunction& f, double rel_threshold) {
    const double thr = checked_threshold(f, rel_threshold);
    int count = 0;
    int last = 0;
    for (double v : f.values()) {
        if (std::abs(v) <= thr) continue;
        const int s = sign_of(v);
        if (last != 0 && s != last) ++count;
        last = s;
    }
    return count;
}

std::vector<RadialFunction> bump_decompose(const RadialFunction& f, double rel_threshold) {
    const double thr = checked_threshold(f, rel_threshold);
    const std::size_t n = f.size();

    // Sign of each bump, in order of increasing radius, and the index of the
    // first significant sample of each bump.
    std::vector<int> bump_sign;
    std::vector<std::size_t> bump_start;
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(f[j]) <= thr) continue;
        const int s = sign_of(f[j]);
        if (bump_sign.empty() || bump_sign.back() != s) {
            bump_sign.push_back(s);
            bump_start.push_back(j);
        }
    }

    std::vector<RadialFunction> bumps(bump_sign.size(), RadialFunction(f.grid()));
    std::size_t current = 0;
    for (std::size_t j = 0; j < n; ++j) {
        while (current + 1 < bump_sign.size() && j >= bump_start[current + 1]) ++current;
        const int s = sign_of(f[j]);
        if (s == 0) continue;
        if (s == bump_sign[current]) {
            bumps[current][j] = f[j];
        } else if (j > bump_start[current] && current + 1 < bump_sign.size()) {
            // small samples leading into the next bump
            bumps[current + 1][j] = f[j];
        }
        // Anything else is a sub-threshold wiggle and is dropped.
    }
    return bumps;
}

std::vector<double> sign_change_radii(const RadialFunction& f, double rel_threshold) {
    const double thr = checked_threshold(f, rel_threshold);
    const auto& grid = *f.grid();
    std::vector<double> radii;
    std::size_t last = f.size();
    for (std::size_t j = 0; j < f.size(); ++j) {
        if (std::abs(f[j]) <= thr) continue;
        if (last < f.size() && sign_of(f[j]) != sign_of(f[last])) {
            // Last sign flip between the two significant samples.
            std::size_t a = last;
            for (std::size_t m = last + 1; m < j; ++m) {
                if (sign_of(f[m]) == sign_of(f[last])) a = m;
            }
            const double ua = grid.r(a) * f[a];
            const double ub = grid.r(a + 1) * f[a + 1];
            const double t = ua / (ua - ub);
            radii.push_back(grid.r(a) + t * grid.h());
        }
        last = j;
    }
    return radii;
}

void write_csv(std::ostream& os, const RadialFunction& f) {
    const auto& grid = *f.grid();
    os << "r,value\n" << std::setprecision(17);
    os << 0.0 << ',' << f.value_at_origin() << '\n';
    for (std::size_t j = 0; j < f.size(); ++j) os << grid.r(j) << ',' << f[j] << '\n';
    os << 1.0 << ',' << 0.0 << '\n';
}

RadialFunction read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("r,value", 0) != 0) {
        throw SchemaError("CSV must start with header r,value");
    }
    std::vector<double> rs, vs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw SchemaError("CSV row without comma: " + line);
        rs.push_back(std::stod(line.substr(0, comma)));
        vs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (vs.size() < 5) throw SchemaError("CSV too short");
    const std::size_t n = vs.size() - 2;
    auto grid = make_grid(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(rs[j + 1] - grid->r(j)) > 1e-12) throw SchemaError("CSV radii are not a uniform grid");
    }
    return RadialFunction(grid, std::vector<double>(vs.begin() + 1, vs.end() - 1));
}

std::string to_json_text(const RadialFunction& f) {
    nlohmann::json j;
    j["n"] = f.size();
    j["values"] = std::vector<double>(f.values().begin(), f.values().end());
    return j.dump();
}

RadialFunction from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(e.what());
    }
    if (!j.contains("n") || !j.contains("values")) throw SchemaError("expected keys n and values");
    const auto n = j["n"].get<std::size_t>();
    auto values = j["values"].get<std::vector<double>>();
    if (values.size() != n) throw SchemaError("n does not match number of values");
    return RadialFunction(make_grid(n), std::move(values));
}

}  // namespace nodalbif

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "nodalbif/errors.hpp"
#include "nodalbif/grid.hpp"

using namespace nodalbif;

namespace {

RadialFunction random_function(const GridPtr& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    RadialFunction f(g);
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = nd(rng);
    return f;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

}  // namespace

TEST_CASE("grid layout") {
    auto g = make_grid(400);
    CHECK(g->h() == doctest::Approx(1.0 / 401));
    CHECK(g->r(0) == doctest::Approx(g->h()));
    CHECK(g->r(399) + g->h() == doctest::Approx(1.0));
    for (std::size_t j = 1; j < g->size(); ++j) CHECK(g->r(j) > g->r(j - 1));
    for (double w : g->quad_weights()) CHECK(w > 0.0);
}

TEST_CASE("nodal_count examples") {
    auto g = make_grid(400);
    auto bowl = RadialFunction::sample(g, [](double r) { return 1.0 - r * r; });
    CHECK(nodal_count(bowl) == 0);
    auto c = RadialFunction::sample(g, [](double r) { return std::cos(1.5 * kPi * r); });
    CHECK(nodal_count(c) == 1);

    CHECK_THROWS_AS(nodal_count(RadialFunction(g)), AllBelowThreshold);
    CHECK_THROWS_AS(nodal_count(bowl, 0.7), std::invalid_argument);
}

TEST_CASE("nodal_count ignores sub-threshold round-off flips") {
    auto g = make_grid(200);
    auto f = RadialFunction::sample(g, [](double r) { return 1.0 - r; });
    // tail wiggle at 1e-9 relative amplitude
    f[199] = -1e-9;
    f[198] = 1e-9;
    CHECK(nodal_count(f) == 0);
}

TEST_CASE("nodal_count invariant under positive scaling and negation") {
    auto g = make_grid(300);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> freq(0.5, 6.0), scale(1e-3, 1e3);
    for (int trial = 0; trial < 50; ++trial) {
        const double w = freq(rng);
        auto f = RadialFunction::sample(g, [w](double r) { return std::cos(w * kPi * r) * (1.0 - r); });
        const int n0 = nodal_count(f);
        CHECK(nodal_count(scale(rng) * f) == n0);
        CHECK(nodal_count(-f) == n0);
    }
}

TEST_CASE("operator stencil exactness and eigenpair") {
    auto g = make_grid(400);
    auto bowl = RadialFunction::sample(g, [](double r) { return 1.0 - r * r; });
    auto lap = assemble_operator(g, 0.0).apply(bowl);
    for (std::size_t j = 0; j < g->size(); ++j) CHECK(lap[j] == doctest::Approx(6.0).epsilon(1e-8));

    auto phi = RadialFunction::sample(g, [](double r) { return std::sin(kPi * r) / r; });
    auto a_phi = assemble_operator(g, 1.0).apply(phi);
    const double lam = kPi * kPi + 1.0;
    double worst = 0.0;
    for (std::size_t j = 0; j < g->size(); ++j) worst = std::max(worst, std::abs(a_phi[j] - lam * phi[j]));
    // -U'' error is h^2/12 * pi^4 |U| / r for U = sin(pi r)
    CHECK(worst < 1.0 * g->h() * g->h() * std::pow(kPi, 4));
}

TEST_CASE("Rayleigh quotient of the first ball eigenfunction") {
    auto g = make_grid(1000);
    auto phi = RadialFunction::sample(g, [](double r) { return std::sin(kPi * r) / r; });
    const auto ip = inner_products(phi, phi);
    CHECK(std::abs(ip.h1 / ip.l2 - (kPi * kPi + 1.0)) < 1e-3);

    // Refinement: error shrinks at second order.
    auto err = [](std::size_t n) {
        auto gg = make_grid(n);
        auto p = RadialFunction::sample(gg, [](double r) { return std::sin(kPi * r) / r; });
        auto q = inner_products(p, p);
        return std::abs(q.h1 / q.l2 - (kPi * kPi + 1.0));
    };
    const double order = std::log2(err(99) / err(199));
    CHECK(order > 1.8);
    CHECK(order < 2.2);
}

TEST_CASE("inner_products examples and quadrature order") {
    auto g = make_grid(400);
    auto z = RadialFunction(g);
    auto ip0 = inner_products(z, z);
    CHECK(ip0.l2 == 0.0);
    CHECK(ip0.h1 == 0.0);
    CHECK(ip0.l4_f == 0.0);

    // 4*pi*(1/3 - 2/5 + 1/7) = 32*pi/105
    const double exact = 32.0 * kPi / 105.0;
    CHECK(exact == doctest::Approx(4.0 * kPi * (1.0 / 3 - 2.0 / 5 + 1.0 / 7)));
    auto err = [&](std::size_t n) {
        auto gg = make_grid(n);
        auto b = RadialFunction::sample(gg, [](double r) { return 1.0 - r * r; });
        return std::abs(inner_products(b, b).l2 - exact);
    };
    CHECK(err(400) < 1e-4);
    // The integrand's first derivative vanishes at both ends, so the
    // trapezoidal sum is superconvergent here; at least second order is the
    // guarantee.
    const double order = std::log2(err(99) / err(199));
    CHECK(order >= 1.8);

    CHECK_THROWS_AS(inner_products(RadialFunction(make_grid(10)), RadialFunction(make_grid(11))),
                    GridMismatch);
}

TEST_CASE("operator is symmetric in the r^2-weighted product") {
    auto g = make_grid(400);
    std::mt19937_64 rng(11);
    auto c = random_function(g, rng);
    auto op = assemble_operator(g, c);
    for (int trial = 0; trial < 20; ++trial) {
        auto f = random_function(g, rng);
        auto q = random_function(g, rng);
        auto af = op.apply(f);
        auto aq = op.apply(q);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t j = 0; j < g->size(); ++j) {
            const double d = g->r(j) * g->r(j);
            lhs += d * af[j] * q[j];
            rhs += d * f[j] * aq[j];
        }
        const double scale = std::sqrt(dot(f.values(), f.values()) * dot(q.values(), q.values()));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);
    }
    // Entrywise D*A symmetry.
    for (std::size_t j = 0; j + 1 < g->size(); ++j) {
        const double upper = g->r(j) * g->r(j) * op.sup()[j];
        const double lower = g->r(j + 1) * g->r(j + 1) * op.sub()[j + 1];
        CHECK(std::abs(upper - lower) <= 1e-12 * std::abs(upper));
    }
}

TEST_CASE("operator with c = 1 is positive definite") {
    auto g = make_grid(400);
    auto t = assemble_operator(g, 1.0).symmetric_form();
    CHECK(t.count_below(0.0) == 0);
    CHECK(t.eigenvalue(0) == doctest::Approx(kPi * kPi + 1.0).epsilon(1e-4));
}

TEST_CASE("dirichlet form agrees with the operator") {
    auto g = make_grid(300);
    std::mt19937_64 rng(3);
    auto f = random_function(g, rng);
    auto q = random_function(g, rng);
    auto af = assemble_operator(g, 0.0).apply(f);
    double via_op = 0.0;
    for (std::size_t j = 0; j < g->size(); ++j) via_op += g->quad_weights()[j] * af[j] * q[j];
    CHECK(dirichlet_form(f, q) == doctest::Approx(via_op).epsilon(1e-11));
}

TEST_CASE("bump_decompose") {
    auto g = make_grid(400);
    auto pos = RadialFunction::sample(g, [](double r) { return 1.0 - r * r; });
    auto one = bump_decompose(pos);
    REQUIRE(one.size() == 1);
    for (std::size_t j = 0; j < g->size(); ++j) CHECK(one[0][j] == pos[j]);

    auto f = RadialFunction::sample(g, [](double r) { return std::cos(2.5 * kPi * r); });
    auto bumps = bump_decompose(f);
    REQUIRE(bumps.size() == static_cast<std::size_t>(nodal_count(f) + 1));
    RadialFunction sum(g);
    for (const auto& b : bumps) sum += b;
    CHECK((f - sum).sup_norm() <= 1e-6 * f.sup_norm());
    // disjoint supports with alternating signs
    for (std::size_t j = 0; j < g->size(); ++j) {
        int owners = 0;
        for (const auto& b : bumps) owners += b[j] != 0.0;
        CHECK(owners <= 1);
    }
    CHECK(bumps[0][0] > 0.0);
    CHECK(bumps[1].values()[static_cast<std::size_t>(0.4 * 401)] < 0.0);

    auto radii = sign_change_radii(f);
    REQUIRE(radii.size() == 2);
    CHECK(radii[0] == doctest::Approx(0.2).epsilon(1e-4));
    CHECK(radii[1] == doctest::Approx(0.6).epsilon(1e-4));
}

TEST_CASE("textual formats keep 15 significant digits") {
    auto g = make_grid(50);
    std::mt19937_64 rng(5);
    auto f = random_function(g, rng);
    f *= 1234.5678;

    std::stringstream ss;
    write_csv(ss, f);
    auto back = read_csv(ss);
    REQUIRE(back.size() == f.size());
    for (std::size_t j = 0; j < f.size(); ++j) CHECK(std::abs(back[j] - f[j]) <= 1e-15 * std::abs(f[j]));

    auto fromj = from_json_text(to_json_text(f));
    for (std::size_t j = 0; j < f.size(); ++j) CHECK(std::abs(fromj[j] - f[j]) <= 1e-15 * std::abs(f[j]));

    CHECK_THROWS_AS(from_json_text("{\"n\": 3}"), SchemaError);
    std::stringstream bad("x,y\n");
    CHECK_THROWS_AS(read_csv(bad), SchemaError);
}

TEST_CASE("origin extrapolation honours zero slope") {
    auto g = make_grid(200);
    auto f = RadialFunction::sample(g, [](double r) { return 3.0 - 2.0 * r * r; });
    CHECK(f.value_at_origin() == doctest::Approx(3.0).epsilon(1e-12));
}

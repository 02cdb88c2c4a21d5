#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>

#include "nodalbif/errors.hpp"
#include "nodalbif/scalar_field.hpp"

using namespace nodalbif;

namespace {

// Amplitudes a_k = w_k(0) from the adaptive shooting, frozen.
constexpr std::array<double, 4> kAmplitude{7.584139191317, 37.098469186395, 104.193070379383, 224.283014495825};

// Independent oracle: classical RK4 with a fixed step, started from the same
// series expansion, returning u(1) and the number of sign changes.
struct Rk4Shot {
    double boundary;
    int changes;
};

Rk4Shot rk4_shoot(double a, double step = 2e-5) {
    const double r0 = 1e-5;
    const double c = (a - a * a * a) / 6.0;
    double r = r0, u = a + c * r0 * r0, p = 2.0 * c * r0;
    auto f = [](double rr, double uu, double pp, double& du, double& dp) {
        du = pp;
        dp = -2.0 / rr * pp + uu - uu * uu * uu;
    };
    int changes = 0;
    const auto steps = static_cast<int>(std::ceil((1.0 - r0) / step));
    const double hstep = (1.0 - r0) / steps;
    for (int s = 0; s < steps; ++s) {
        double k1u, k1p, k2u, k2p, k3u, k3p, k4u, k4p;
        f(r, u, p, k1u, k1p);
        f(r + hstep / 2, u + hstep / 2 * k1u, p + hstep / 2 * k1p, k2u, k2p);
        f(r + hstep / 2, u + hstep / 2 * k2u, p + hstep / 2 * k2p, k3u, k3p);
        f(r + hstep, u + hstep * k3u, p + hstep * k3p, k4u, k4p);
        const double un = u + hstep / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
        p += hstep / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
        if ((un > 0) != (u > 0)) ++changes;
        u = un;
        r += hstep;
    }
    return {u, changes};
}

// Bisection on "k-th sign change reached by r = 1".
double rk4_amplitude(int k, double lo, double hi) {
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (rk4_shoot(mid).changes >= k ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("shoot examples") {
    auto g = make_grid(400);
    auto small = shoot(0.5, g);
    CHECK(small.boundary_value > 0.0);
    CHECK(small.interior_nodes == 0);

    auto at = shoot(kAmplitude[0], g);
    CHECK(std::abs(at.boundary_value) <= 1e-8);
    CHECK(at.interior_nodes == 0);

    CHECK(shoot(kAmplitude[0] * 1.01, g).boundary_value < 0.0);
    CHECK_THROWS_AS(shoot(-1.0, g), std::invalid_argument);
}

TEST_CASE("shoot blow-up guard") {
    auto g = make_grid(100);
    ShootingOptions o;
    o.blowup_bound = 10.0;
    CHECK_THROWS_AS(shoot(20.0, g, o), BlowUp);
}

TEST_CASE("amplitudes agree with an independent RK4 bisection") {
    const double a1 = rk4_amplitude(1, 1.0, 20.0);
    const double a2 = rk4_amplitude(2, 20.0, 60.0);
    auto g = make_grid(200);
    CHECK(find_w(1, g).amplitude == doctest::Approx(a1).epsilon(1e-6));
    CHECK(find_w(2, g).amplitude == doctest::Approx(a2).epsilon(1e-6));
}

TEST_CASE("find_w k = 1..4 on n = 2000") {
    auto g = make_grid(2000);
    double prev = 0.0;
    for (int k = 1; k <= 4; ++k) {
        CAPTURE(k);
        const auto w = find_w(k, g);
        CHECK(w.k == k);
        CHECK(w.amplitude == doctest::Approx(kAmplitude[k - 1]).epsilon(1e-9));
        CHECK(w.amplitude > prev);
        prev = w.amplitude;
        CHECK(nodal_count(w.profile) == k - 1);
        CHECK(w.profile.value_at_origin() > 0.0);
        CHECK(w.residual_sup <= 1e-10);
        CHECK(scalar_residual(w.profile) == doctest::Approx(w.residual_sup));

        // Nehari: |w|_{H1}^2 = int w^4
        const auto ip = inner_products(w.profile, w.profile);
        CHECK(std::abs(ip.h1 - ip.l4_f) <= 1e-6 * ip.l4_f);
    }
    CHECK_THROWS_AS(find_w(0, g), std::invalid_argument);
}

TEST_CASE("uniqueness probe: disjoint scan brackets give one amplitude") {
    auto g = make_grid(200);
    for (int k = 1; k <= 3; ++k) {
        CAPTURE(k);
        FindOptions other;
        other.scan_start = 0.8;
        other.scan_ratio = 1.02;
        CHECK(find_w(k, g, other).amplitude == doctest::Approx(find_w(k, g).amplitude).epsilon(1e-8));
    }
    FindOptions beyond;
    beyond.scan_start = 50.0;
    CHECK_THROWS_AS(find_w(1, g, beyond), BracketingFailed);
}

TEST_CASE("Morse index equals k with a gap away from zero") {
    // floor observed on n in {500, 1000, 2000}: min |eig| > 12 for k = 1..4
    for (int n : {500, 1000, 2000}) {
        auto g = make_grid(static_cast<std::size_t>(n));
        for (int k = 1; k <= 4; ++k) {
            CAPTURE(n);
            CAPTURE(k);
            const auto m = scalar_morse_index(find_w(k, g));
            CHECK(m.index == k);
            CHECK(m.min_abs_eig > 10.0);
        }
    }
}

TEST_CASE("bump identity and its negative control") {
    auto g = make_grid(2000);
    for (int k : {1, 3}) {
        const auto w = find_w(k, g);
        const auto ids = bump_identity_check(w);
        REQUIRE(ids.size() == static_cast<std::size_t>(k));
        for (const auto& id : ids) {
            CHECK(id.quadform < 0.0);
            CHECK(id.neg_two_l4 < 0.0);
            CHECK(std::abs(id.quadform - id.neg_two_l4) <= 1e-4 * std::abs(id.neg_two_l4));
        }
    }
    auto w = find_w(1, g);
    w.profile *= 2.0;
    const auto id = bump_identity_check(w).at(0);
    CHECK(std::abs(id.quadform - id.neg_two_l4) > 0.1 * std::abs(id.neg_two_l4));
}

TEST_CASE("shooting trajectory and Newton profile converge together") {
    // The gap is the O(h^2) discretization error of the BVP.
    auto gap = [](int k, std::size_t n, double tol) {
        FindOptions o;
        o.newton_tol = tol;
        const auto w = find_w(k, make_grid(n), o);
        return (w.profile - w.shooting_profile).sup_norm() / w.profile.sup_norm();
    };
    const double coarse = gap(1, 1000, 1e-10);
    const double fine = gap(1, 2000, 1e-10);
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
    for (int k = 1; k <= 4; ++k) {
        CAPTURE(k);
        CHECK(gap(k, 120000, 1e-8) <= 1e-6);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "nodalbif/coupled.hpp"
#include "nodalbif/errors.hpp"

using namespace nodalbif;

namespace {

const GridPtr& grid2000() {
    static const GridPtr g = make_grid(2000);
    return g;
}

const ScalarSolution& w_of(int k) {
    static std::vector<ScalarSolution> cache;
    while (static_cast<int>(cache.size()) < k) cache.push_back(find_w(static_cast<int>(cache.size()) + 1, grid2000()));
    return cache[static_cast<std::size_t>(k - 1)];
}

const BifurcationTable& table_of(int k) {
    static std::vector<BifurcationTable> cache;
    while (static_cast<int>(cache.size()) < k) {
        const int kk = static_cast<int>(cache.size()) + 1;
        cache.push_back(bifurcation_table(weighted_eigs(w_of(kk), kk + 4)));
    }
    return cache[static_cast<std::size_t>(k - 1)];
}

const Spectrum& spectrum_of(int k) {
    static std::vector<Spectrum> cache;
    while (static_cast<int>(cache.size()) < k) {
        const int kk = static_cast<int>(cache.size()) + 1;
        cache.push_back(weighted_eigs(w_of(kk), kk + 4));
    }
    return cache[static_cast<std::size_t>(k - 1)];
}

RadialFunction smooth_random(const GridPtr& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng), b = u(rng), c = u(rng);
    return RadialFunction::sample(g, [&](double r) { return (1.0 - r) * (a + b * std::cos(3 * r) + c * r * r); });
}

}  // namespace

TEST_CASE("residual at reference points") {
    auto g = grid2000();
    CHECK(residual({0.7, RadialFunction(g), RadialFunction(g)}).sup == 0.0);
    for (int k = 1; k <= 3; ++k) {
        for (double beta : {-0.6, 0.0, 0.5, 2.0, 8.0}) {
            CAPTURE(k);
            CAPTURE(beta);
            CHECK(residual(synchronized_point(w_of(k), beta)).sup <= 1e-9);
            CHECK(residual(semitrivial_point(w_of(k), beta)).sup <= 1e-9);
        }
    }
    CHECK_THROWS_AS(synchronized_point(w_of(1), -1.0), PoleAtMinusOne);
    auto other = make_grid(100);
    CHECK_THROWS_AS(residual({0.0, RadialFunction(g), RadialFunction(other)}), GridMismatch);
}

TEST_CASE("jacobian structure") {
    auto g = grid2000();
    CoupledJacobian zero({0.3, RadialFunction(g), RadialFunction(g)});
    for (std::size_t j = 0; j < zero.size(); ++j) {
        CHECK(zero.c_uv()[j] == 0.0);
        CHECK(zero.c_uu()[j] == 1.0);
    }
    CHECK(zero.count_below(0.0) == 0);

    // beta = 0 decouples the blocks
    CoupledJacobian dec({0.0, w_of(1).profile, w_of(2).profile});
    for (double c : dec.c_uv()) CHECK(c == 0.0);
}

TEST_CASE("jacobian is symmetric under the r^2 weight") {
    auto g = make_grid(300);
    const auto w = find_w(2, g);
    StatePair s{0.4, w.profile, 0.5 * w.profile};
    const auto j = CoupledJacobian(s).sparse();
    double worst = 0.0, scale = 0.0;
    for (int col = 0; col < j.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(j, col); it; ++it) {
            const auto rr = static_cast<std::size_t>(it.row() / 2), cc = static_cast<std::size_t>(it.col() / 2);
            const double a = g->r(rr) * g->r(rr) * it.value();
            const double b = g->r(cc) * g->r(cc) * j.coeff(it.col(), it.row());
            worst = std::max(worst, std::abs(a - b));
            scale = std::max(scale, std::abs(a));
        }
    }
    CHECK(worst <= 1e-10 * scale);
}

TEST_CASE("jacobian matches central finite differences") {
    std::mt19937_64 rng(7);
    for (double beta : {-0.4, 0.6, 3.5}) {
        CAPTURE(beta);
        StatePair s{beta, synchronized_point(w_of(2), 0.5).u, 0.8 * w_of(1).profile};
        CoupledJacobian jac(s);
        for (int trial = 0; trial < 3; ++trial) {
            const auto dp = smooth_random(s.grid(), rng);
            const auto dq = smooth_random(s.grid(), rng);
            const double eps = 1e-4 * std::max(s.u.sup_norm(), s.v.sup_norm());
            const auto fp = strong_residual({beta, s.u + eps * dp, s.v + eps * dq});
            const auto fm = strong_residual({beta, s.u - eps * dp, s.v - eps * dq});
            const Eigen::VectorXd fd = (fp - fm) / (2 * eps);
            const auto [a, b] = jac.apply(dp, dq);
            const Eigen::VectorXd exact = interleave(a, b);
            CHECK((fd - exact).norm() <= 1e-6 * exact.norm());
            CHECK((jac.sparse() * interleave(dp, dq) - exact).norm() <= 1e-10 * exact.norm());
        }
        // d/dbeta
        const double db = 1e-4;
        const Eigen::VectorXd fdb = (strong_residual({beta + db, s.u, s.v}) - strong_residual({beta - db, s.u, s.v})) / (2 * db);
        const Eigen::VectorXd exb = CoupledJacobian::beta_derivative(s);
        CHECK((fdb - exb).norm() <= 1e-6 * exb.norm());
    }
}

TEST_CASE("basis rotation at a synchronized point") {
    for (int k = 1; k <= 3; ++k) {
        for (double beta : {-0.5, 0.3, 2.0}) {
            CAPTURE(k);
            CAPTURE(beta);
            const auto& w = w_of(k);
            const auto& g = w.profile.grid();
            RadialFunction c1(g), c2(g);
            for (std::size_t j = 0; j < c1.size(); ++j) {
                const double w2 = w.profile[j] * w.profile[j];
                c1[j] = 1.0 - 3.0 * w2;
                c2[j] = 1.0 - moebius(beta) * w2;
            }
            const auto t1 = assemble_operator(g, c1).symmetric_form();
            const auto t2 = assemble_operator(g, c2).symmetric_form();
            std::vector<double> both;
            for (std::size_t i = 0; i < 8; ++i) {
                both.push_back(t1.eigenvalue(i));
                both.push_back(t2.eigenvalue(i));
            }
            std::sort(both.begin(), both.end());
            CoupledJacobian jac(synchronized_point(w, beta));
            for (std::size_t i = 0; i < 8; ++i) {
                CHECK(std::abs(jac.eigenvalue(i) - both[i]) <= 1e-8 * std::max(1.0, std::abs(both[i])));
            }
        }
    }
}

TEST_CASE("newton_solve examples") {
    SUBCASE("returns to the synchronized point after noise") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> nd;
        const auto target = synchronized_point(w_of(1), 0.5);
        auto s = target;
        for (std::size_t j = 0; j < s.u.size(); ++j) {
            s.u[j] += 1e-4 * nd(rng);
            s.v[j] += 1e-4 * nd(rng);
        }
        NewtonReport rep;
        const auto out = newton_solve(s, 0.5, {}, &rep);
        CHECK(rep.residual_sup <= 1e-10);
        CHECK(rep.iterations <= 6);
        CHECK((out.u - target.u).sup_norm() <= 1e-8);
        CHECK((out.v - target.v).sup_norm() <= 1e-8);
    }
    SUBCASE("beta = 0 decouples into two scalar problems") {
        const auto& g = grid2000();
        const auto bump = RadialFunction::sample(g, [](double r) { return 0.05 * (1.0 - r * r); });
        const auto out = newton_solve({0.0, w_of(2).profile + bump, w_of(3).profile + bump}, 0.0);
        CHECK((out.u - w_of(2).profile).sup_norm() <= 1e-8 * w_of(2).profile.sup_norm());
        CHECK((out.v - w_of(3).profile).sup_norm() <= 1e-8 * w_of(3).profile.sup_norm());
    }
    SUBCASE("exactly at a bifurcation parameter") {
        for (int k = 1; k <= 3; ++k) {
            const double b = table_of(k).row(k + 1).beta;
            CHECK_THROWS_AS(newton_solve(synchronized_point(w_of(k), b), b), SingularJacobian);
        }
    }
    SUBCASE("hopeless start") {
        const auto& g = grid2000();
        const auto wild = RadialFunction::sample(g, [](double r) { return 1e4 * std::sin(40 * r); });
        NewtonOptions o;
        o.check_singular = false;
        o.max_iter = 5;
        CHECK_THROWS_AS(newton_solve({1.0, wild, wild}, 1.0, o), NoConvergence);
    }
}

TEST_CASE("H_beta quadratic form") {
    for (int k = 1; k <= 3; ++k) {
        const auto& s = spectrum_of(k);
        const auto& t = table_of(k);
        for (int i = 1; i <= k + 2; ++i) {
            CAPTURE(k);
            CAPTURE(i);
            const auto& phi = s.eigenfunctions[static_cast<std::size_t>(i - 1)];
            const double b = t.row(i).beta;
            // kernel direction at beta_{k,i}
            CHECK(std::abs(h_beta_form(w_of(k), b, phi, -phi)) <= 1e-6);
            // (phi, phi): 2|phi|^2 - 6 int w^2 phi^2, negative exactly for i <= k
            const double pp = h_beta_form(w_of(k), 0.7, phi, phi);
            CHECK(pp == doctest::Approx(2.0 * inner_products(phi, phi).h1 - 6.0).epsilon(1e-9));
            CHECK((pp < 0.0) == (i <= k));
        }
    }
    const auto& g = grid2000();
    CHECK(h_beta_form(w_of(1), 0.3, RadialFunction(g), RadialFunction(g)) == 0.0);
    CHECK_THROWS_AS(h_beta_form(w_of(1), -1.0, RadialFunction(g), RadialFunction(g)), PoleAtMinusOne);
}

TEST_CASE("coupled Morse index along the synchronized branch") {
    const auto& t1 = table_of(1);
    REQUIRE(t1.row(2).beta < 0.0);
    REQUIRE(t1.row(1).beta > 0.0);
    CHECK(coupled_morse_index(w_of(1), 0.0, &t1) == 2);
    REQUIRE(t1.row(1).beta < 2.9);
    CHECK(coupled_morse_index(w_of(1), 2.9, &t1) == 1);
    CHECK(coupled_morse_index(w_of(2), 1.0 - 1e-3, &table_of(2)) == 4);
    for (int k = 1; k <= 3; ++k) {
        // decoupled at beta = 0: index k for each scalar block
        REQUIRE(table_of(k).row(k + 1).beta < 0.0);
        CHECK(coupled_morse_index(w_of(k), 0.0) == 2 * k);
        CHECK_THROWS_AS(coupled_morse_index(w_of(k), table_of(k).row(k).beta + 1e-9, &table_of(k)), AtBifurcation);
    }
}

TEST_CASE("symmetry maps T_1..T_4") {
    const auto& g = grid2000();
    const auto u = 0.5 * w_of(2).profile;
    const auto t = map_T(1, {0.2, u, u});
    CHECK(t.beta == doctest::Approx(moebius(0.2)).epsilon(1e-15));
    CHECK((t.u - std::sqrt(1.2) * u).sup_norm() <= 1e-14 * u.sup_norm());
    CHECK(t.v.sup_norm() == 0.0);

    for (int k = 1; k <= 3; ++k) {
        for (double beta : {-0.5, 0.4}) {
            const auto img = map_T(1, synchronized_point(w_of(k), beta));
            CHECK(img.beta == doctest::Approx(moebius(beta)).epsilon(1e-15));
            CHECK((img.u - w_of(k).profile).sup_norm() <= 1e-12 * w_of(k).profile.sup_norm());
            CHECK(img.v.sup_norm() <= 1e-12 * w_of(k).profile.sup_norm());
        }
    }

    // Any solution maps to a solution, for every l.
    const StatePair sol = newton_solve({0.0, w_of(1).profile, w_of(2).profile}, 0.0);
    for (int l = 1; l <= 4; ++l) {
        CAPTURE(l);
        const auto img = map_T(l, sol);
        CHECK(img.beta == 3.0);
        CHECK(residual(img).sup <= 1e-8);
    }

    // T_1 o T_1 is the identity: beta by the involution, and the profile
    // factors sqrt(1+f(beta))/2 * sqrt(1+beta)/2 * 2 = 1.
    const auto twice = map_T(1, map_T(1, sol));
    CHECK(twice.beta == doctest::Approx(sol.beta).epsilon(1e-14));
    CHECK((twice.u - sol.u).sup_norm() <= 1e-13 * sol.u.sup_norm());
    CHECK((twice.v - sol.v).sup_norm() <= 1e-13 * sol.v.sup_norm());

    CHECK_THROWS_AS(map_T(1, {-1.0, u, u}), PoleAtMinusOne);
    CHECK_THROWS_AS(map_T(5, {0.0, u, u}), std::invalid_argument);
    (void)g;
}

TEST_CASE("circle of solutions at beta = 1") {
    for (int k = 1; k <= 3; ++k) {
        double worst = 0.0;
        for (int s = 0; s < 64; ++s) worst = std::max(worst, residual(circle_solution(w_of(k), 2 * kPi * s / 64)).sup);
        CHECK(worst <= 1e-9);
    }
    const auto zero = circle_solution(w_of(2), 0.0);
    CHECK(zero.beta == 1.0);
    CHECK((zero.u - w_of(2).profile).sup_norm() == 0.0);
    CHECK(zero.v.sup_norm() == 0.0);
    const auto quarter = circle_solution(w_of(2), kPi / 4);
    const auto sync = synchronized_point(w_of(2), 1.0);
    CHECK((quarter.u - sync.u).sup_norm() <= 1e-14 * sync.u.sup_norm());
    CHECK((quarter.v - sync.v).sup_norm() <= 1e-14 * sync.v.sup_norm());
    CHECK(residual(circle_solution(w_of(3), kPi / 3)).sup <= 1e-9);
}

TEST_CASE("nodal signature") {
    const auto sig = nodal_signature({0.0, w_of(2).profile, w_of(1).profile});
    CHECK(sig.n_u == 1);
    CHECK(sig.n_v == 0);
    CHECK(sig.u0 > 0.0);
    CHECK(sig.str() == "(" + std::to_string(sig.n_u) + "," + std::to_string(sig.n_v) + "," +
                           std::to_string(sig.n_sum) + "," + std::to_string(sig.n_diff) + ")");
    // semi-trivial: zero component counts 0, and so does round-off noise
    auto st = semitrivial_point(w_of(3), 2.0);
    CHECK(nodal_signature(st).n_v == 0);
    for (std::size_t j = 0; j < st.v.size(); ++j) st.v[j] = 1e-17 * std::sin(50.0 * j);
    const auto noisy = nodal_signature(st);
    CHECK(noisy.n_v == 0);
    CHECK(noisy.n_u == 2);
    CHECK(noisy.n_sum >= 0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <regex>

#include "json.hpp"
#include "nodalbif/cli_report.hpp"
#include "nodalbif/errors.hpp"

using namespace nodalbif;

namespace {

std::vector<double> marker_betas(const std::string& svg, const std::string& kind, int k) {
    std::vector<std::pair<int, double>> found;
    const std::regex re("data-kind=\"" + kind + "\" data-k=\"" + std::to_string(k) +
                        "\" data-i=\"([0-9]+)\" data-beta=\"([-0-9.e+]+)\"");
    for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) {
        found.emplace_back(std::stoi((*it)[1]), std::stod((*it)[2]));
    }
    std::sort(found.begin(), found.end());
    std::vector<double> out;
    for (const auto& f : found) out.push_back(f.second);
    return out;
}

std::vector<double> document_order(const std::string& svg) {
    std::vector<double> out;
    const std::regex re("class=\"marker\"[^>]*data-beta=\"([-0-9.e+]+)\"");
    for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) out.push_back(std::stod((*it)[1]));
    return out;
}

BranchRecord toy_branch(const std::string& family, double b0, double b1) {
    BranchRecord r;
    r.family = family;
    r.k = 1;
    r.i = 2;
    r.signature = {0, 0, 0, 1};
    for (int j = 0; j <= 10; ++j) {
        const double b = b0 + (b1 - b0) * j / 10;
        r.points.push_back({b, 5.0 + j, 4.0 + j, 9.0 + j});
    }
    return r;
}

}  // namespace

TEST_CASE("config text") {
    RunConfig c;
    apply_config_text(c, "# comment\n n = 400\nk_hi=2 # trailing\n\ntol = 1e-9\nseed = 99\nout_dir = /tmp/x y\n");
    CHECK(c.n == 400);
    CHECK(c.k_hi == 2);
    CHECK(c.tol == 1e-9);
    CHECK(c.seed == 99);
    CHECK(c.out_dir == "/tmp/x y");
    CHECK(c.k_lo == 1);

    RunConfig d;
    CHECK_THROWS_AS(apply_config_text(d, "colour = red"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(d, "n = 12x"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(d, "n = -3"), ConfigError);
    CHECK_THROWS_AS(apply_config_text(d, "just words"), ConfigError);
    apply_config_text(d, "tol = 0");
    CHECK_THROWS_AS(d.validate(), ConfigError);
    RunConfig e;
    e.k_lo = 3;
    e.k_hi = 2;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    CHECK_THROWS_AS(apply_config_file(e, "/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("flags win over the config file") {
    const std::string path = "test_cli_config.cfg";
    {
        std::ofstream out(path);
        out << "n = 300\nseed = 5\ntol = 1e-9\n";
    }
    const auto file_only = resolve_config(path, {});
    CHECK(file_only.n == 300);
    CHECK(file_only.seed == 5);
    const auto flagged = resolve_config(path, {"n = 700", "tol = 2e-10"});
    CHECK(flagged.n == 700);
    CHECK(flagged.tol == 2e-10);
    CHECK(flagged.seed == 5);
    CHECK(resolve_config("", {}).n == 2000);
    CHECK_THROWS_AS(resolve_config(path, {"tol = -1"}), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("parallel_for runs every job once and rethrows") {
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), 4, [&](std::size_t j) { ++hits[j]; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(5, 3, [](std::size_t j) { if (j == 3) throw NoConvergence("job 3"); }), NoConvergence);
    parallel_for(0, 4, [](std::size_t) { FAIL("no jobs expected"); });
}

TEST_CASE("compare nodal counts of w_k +- w_i") {
    auto g = make_grid(2000);
    const auto a = cmd_compare_nodal(2, 1, g);
    CHECK(a.n_diff == 1);
    CHECK(a.n_sum == 1);
    const auto b = cmd_compare_nodal(4, 2, g);
    CHECK(b.n_diff == 3);
    CHECK(b.n_sum == 3);
    CHECK_THROWS_AS(cmd_compare_nodal(3, 3, g), std::invalid_argument);
    CHECK_THROWS_AS(cmd_compare_nodal(2, 0, g), std::invalid_argument);
}

TEST_CASE("diagram") {
    auto g = make_grid(2000);
    const auto table = bifurcation_table(weighted_eigs(find_w(1, g), 5));
    DiagramSpec spec;
    spec.markers.push_back(table);

    SUBCASE("no branches: axes and markers only") {
        const auto svg = cmd_diagram(spec, {});
        CHECK(svg.find("class=\"axes\"") != std::string::npos);
        CHECK(svg.find("<polyline") == std::string::npos);
        CHECK(svg.find("data-kind=\"circle\"") != std::string::npos);
        CHECK(svg.rfind("</svg>") != std::string::npos);
    }
    SUBCASE("marker order follows beta") {
        const auto svg = cmd_diagram(spec, {toy_branch("U", -0.3, -1.3), toy_branch("W", 4.7, 5.7)});
        const auto beta = marker_betas(svg, "beta", 1);
        const auto tilde = marker_betas(svg, "beta_tilde", 1);
        REQUIRE(beta.size() == 4);
        REQUIRE(tilde.size() == 4);
        // i = 2..5: beta_{1,i} decreasing, beta~_{1,i} increasing
        for (std::size_t j = 1; j < beta.size(); ++j) {
            CHECK(beta[j] < beta[j - 1]);
            CHECK(tilde[j] > tilde[j - 1]);
        }
        const auto order = document_order(svg);
        CHECK(std::is_sorted(order.begin(), order.end()));
        CHECK(std::count(order.begin(), order.end(), 1.0) == 1);
        CHECK(std::count(svg.begin(), svg.end(), '\n') > 20);
        CHECK(svg.find("data-family=\"U\"") < svg.find("data-family=\"W\""));
    }
    SUBCASE("deterministic") {
        const std::vector<BranchRecord> bs{toy_branch("U", -0.3, -1.3)};
        CHECK(cmd_diagram(spec, bs) == cmd_diagram(spec, bs));
    }
    SUBCASE("missing field") {
        auto b = toy_branch("U", -0.3, -1.3);
        b.points[3].h1 = std::numeric_limits<double>::quiet_NaN();
        spec.axis = DiagramAxis::H1;
        CHECK_THROWS_AS(cmd_diagram(spec, {b}), SchemaError);
        spec.axis = diagram_axis_from_string("sup_v");
        CHECK_NOTHROW(cmd_diagram(spec, {b}));
        CHECK_THROWS_AS(diagram_axis_from_string("pixels"), std::invalid_argument);
    }
}

TEST_CASE("spectrum JSON schema") {
    auto g = make_grid(1000);
    const auto t = bifurcation_table(weighted_eigs(find_w(2, g), 6));
    const auto j = nlohmann::json::parse(spectrum_to_json(t));
    CHECK(j.at("k") == 2);
    REQUIRE(j.at("rows").size() == 6);
    for (const auto& r : j.at("rows")) {
        for (const char* key : {"i", "lambda", "beta", "beta_tilde", "window"}) CHECK(r.contains(key));
    }
    CHECK(j["rows"][1]["window"] == "circle");
    CHECK(j["rows"][0]["window"] == "right");
    CHECK(j["rows"][2]["window"] == "left");
}

TEST_CASE("verify on a grid too coarse for w_4") {
    RunConfig c;
    c.n = 50;
    const auto rep = cmd_verify(c);
    REQUIRE(rep.criteria.size() == 12);
    CHECK_FALSE(rep.all_passed());
    REQUIRE(rep.first_failure() != nullptr);
    CHECK(rep.first_failure()->id == 1);
    CHECK(rep.first_failure()->detail.find("NoConvergence") != std::string::npos);
    CHECK(verify_summary(rep).find("first failing criterion: 1") != std::string::npos);
    const auto j = nlohmann::json::parse(verify_report_json(rep));
    CHECK(j.at("all_pass") == false);
    CHECK(j.at("first_failure") == 1);
}

TEST_CASE("verify subset for k = 1 is deterministic") {
    RunConfig c;
    c.n = 400;
    c.k_hi = 1;
    c.scalar_k_max = 2;
    c.probe_attempts = 5;
    c.asymptotics_beta = 20.0;
    const auto a = cmd_verify(c);
    const auto b = cmd_verify(c);
    CHECK(verify_report_json(a) == verify_report_json(b));
    for (const auto& cr : a.criteria) {
        CAPTURE(cr.id);
        CAPTURE(cr.detail);
        CHECK(cr.passed);
    }
    CHECK(a.all_passed());
}

// nodalbif: command-line front end.

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "nodalbif/cli_report.hpp"
#include "nodalbif/errors.hpp"

using namespace nodalbif;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
    std::size_t n = 0;
    std::string tol;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string config;
    bool json = false;
};

RunConfig resolve(const Globals& g, CLI::App& app) {
    std::vector<std::string> flags;
    if (app.count("--n")) flags.push_back("n = " + std::to_string(g.n));
    if (app.count("--tol")) flags.push_back("tol = " + g.tol);
    if (app.count("--seed")) flags.push_back("seed = " + std::to_string(g.seed));
    if (app.count("--out-dir")) flags.push_back("out_dir = " + g.out_dir);
    return resolve_config(g.config, flags);
}

FindOptions find_options(const RunConfig& cfg) {
    FindOptions o;
    o.newton_tol = cfg.tol;
    return o;
}

fs::path output_path(const RunConfig& cfg, const std::string& file) {
    fs::path p(file);
    if (p.is_relative() && cfg.out_dir != ".") p = fs::path(cfg.out_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::string read_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Window parse_window(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--window", "expected LO:HI");
    Window w;
    const auto lo = s.substr(0, colon), hi = s.substr(colon + 1);
    w.lo = lo.empty() || lo == "-inf" ? -std::numeric_limits<double>::infinity() : std::stod(lo);
    w.hi = hi.empty() || hi == "inf" ? std::numeric_limits<double>::infinity() : std::stod(hi);
    if (!(w.lo < w.hi)) throw CLI::ValidationError("--window", "LO must be below HI");
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nodal bifurcation analysis of a coupled cubic system on the unit ball"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--n", g.n, "interior grid points");
    app.add_option("--tol", g.tol, "Newton and corrector tolerance");
    app.add_option("--seed", g.seed, "probe seed");
    app.add_option("--out-dir", g.out_dir, "directory for output files");
    app.add_option("--config", g.config, "key = value config file; flags win")->check(CLI::ExistingFile);
    app.add_flag("--json", g.json, "print JSON on stdout");

    int k = 1, i = 2, m = 0, samples = 64, P = 0, Q = 1, attempts = 50;
    double beta = std::nan("");
    std::string out, family = "u", window_text, axis = "sup_u", probe_window = "3:3";
    bool no_profiles = false;
    std::vector<std::string> branch_files;
    std::vector<int> marker_ks;
    int k_hi = 0, k_lo = 0;

    auto* solve = app.add_subcommand("solve-scalar", "nodal radial solution w_k");
    solve->add_option("--k", k)->required()->check(CLI::PositiveNumber);
    solve->add_option("--out", out, "FILE.csv or FILE.json");

    auto* spectrum = app.add_subcommand("spectrum", "weighted eigenvalues and the bifurcation table");
    spectrum->add_option("--k", k)->required()->check(CLI::PositiveNumber);
    spectrum->add_option("--m", m, "eigenvalue count (default k + 4)");

    auto* morse = app.add_subcommand("morse", "Morse index of w_k, or of the synchronized pair at --beta");
    morse->add_option("--k", k)->required()->check(CLI::PositiveNumber);
    morse->add_option("--beta", beta);

    auto* circle = app.add_subcommand("verify-circle", "residual of (1, cos t w_k, sin t w_k)");
    circle->add_option("--k", k)->required()->check(CLI::PositiveNumber);
    circle->add_option("--samples", samples)->check(CLI::PositiveNumber);

    auto* cont = app.add_subcommand("continue", "switch onto and continue U(k,i) or W(k,i)");
    cont->add_option("--k", k)->required()->check(CLI::PositiveNumber);
    cont->add_option("--i", i)->required()->check(CLI::PositiveNumber);
    cont->add_option("--family", family)->check(CLI::IsMember({"u", "w", "U", "W"}));
    cont->add_option("--window", window_text, "LO:HI (default: width 1 past the bifurcation point)");
    cont->add_option("--out", out, "branch JSON file");
    cont->add_flag("--no-profiles", no_profiles);

    auto* diagram = app.add_subcommand("diagram", "SVG bifurcation diagram from branch files");
    diagram->add_option("branches", branch_files, "branch JSON files")->check(CLI::ExistingFile);
    diagram->add_option("--markers", marker_ks, "k values whose bifurcation parameters are marked");
    diagram->add_option("--axis", axis)->check(CLI::IsMember({"sup_u", "sup_v", "h1_norm"}));
    diagram->add_option("--out", out, "SVG file")->required();

    auto* compare = app.add_subcommand("compare-nodal", "sign changes of w_k - w_i and w_k + w_i");
    compare->add_option("--k", k)->required();
    compare->add_option("--i", i)->required();

    auto* verify = app.add_subcommand("verify", "run the acceptance criteria");
    verify->add_option("--k-lo", k_lo);
    verify->add_option("--k-hi", k_hi);
    verify->add_option("--out", out, "report JSON file (default verify.json)");

    auto* probe = app.add_subcommand("probe-nonexistence", "randomized search for (P,Q) nodal solutions");
    probe->add_option("--P", P)->check(CLI::NonNegativeNumber);
    probe->add_option("--Q", Q)->check(CLI::NonNegativeNumber);
    probe->add_option("--beta", probe_window, "BETA or LO:HI");
    probe->add_option("--attempts", attempts)->check(CLI::NonNegativeNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(g, app);
        const auto grid = make_grid(cfg.n);
        const auto find = find_options(cfg);

        if (*solve) {
            const auto w = find_w(k, grid, find);
            const auto morse_idx = scalar_morse_index(w);
            json meta{{"k", w.k},
                      {"amplitude", w.amplitude},
                      {"residual_sup", w.residual_sup},
                      {"morse_index", morse_idx.index}};
            if (!out.empty()) {
                const auto path = output_path(cfg, out);
                if (path.extension() == ".csv") {
                    std::ostringstream os;
                    write_csv(os, w.profile);
                    write_file(path, os.str());
                    auto side = path;
                    side.replace_extension(".meta.json");
                    write_file(side, meta.dump(2) + "\n");
                } else {
                    json doc = meta;
                    doc["profile"] = json::parse(to_json_text(w.profile));
                    write_file(path, doc.dump(2) + "\n");
                }
            }
            if (g.json) {
                std::cout << meta.dump(2) << "\n";
            } else {
                std::cout << "w_" << w.k << ": amplitude " << std::setprecision(12) << w.amplitude << ", residual "
                          << w.residual_sup << ", Morse index " << morse_idx.index << "\n";
            }
            return 0;
        }
        if (*spectrum) {
            const auto w = find_w(k, grid, find);
            const auto s = weighted_eigs(w, m > 0 ? m : k + 4);
            validate_spectrum(s, w);
            const auto t = bifurcation_table(s);
            if (g.json) {
                std::cout << spectrum_to_json(t) << "\n";
            } else {
                std::cout << "  i        lambda          beta    beta_tilde  window\n";
                for (const auto& r : t.rows) {
                    char line[160];
                    std::snprintf(line, sizeof line, "%3d %13.9f %13.9f %13.9f  %s\n", r.i, r.lambda, r.beta, r.beta_tilde,
                                  to_string(r.window).c_str());
                    std::cout << line;
                }
            }
            return 0;
        }
        if (*morse) {
            const auto w = find_w(k, grid, find);
            json j{{"k", k}};
            if (std::isnan(beta)) {
                const auto r = scalar_morse_index(w);
                j["index"] = r.index;
                j["min_abs_eig"] = r.min_abs_eig;
            } else {
                const auto table = bifurcation_table(weighted_eigs(w, k + 4));
                j["beta"] = beta;
                j["index"] = coupled_morse_index(w, beta, &table);
            }
            std::cout << (g.json ? j.dump(2) : "Morse index " + j["index"].dump()) << "\n";
            return 0;
        }
        if (*circle) {
            const auto w = find_w(k, grid, find);
            double worst = 0.0;
            for (int s = 0; s < samples; ++s) worst = std::max(worst, residual(circle_solution(w, 2 * kPi * s / samples)).sup);
            json j{{"k", k}, {"samples", samples}, {"max_residual", worst}};
            std::cout << (g.json ? j.dump(2) : "max residual " + j["max_residual"].dump()) << "\n";
            return worst <= 1e-9 ? 0 : 1;
        }
        if (*cont) {
            const Family f = family_from_string(family);
            const auto mode = prepare_mode(grid, k, std::max(k + 4, i + 1), find);
            validate_spectrum(mode.spectrum, mode.w);
            const Window win = window_text.empty() ? exploration_window(f, mode, i) : parse_window(window_text);
            ContinuationOptions copts;
            copts.corrector_tol = cfg.tol;
            const auto b = trace_branch(mode, i, f, win, copts);
            const auto text = branch_to_json(b, !no_profiles);
            if (!out.empty()) write_file(output_path(cfg, out), text + "\n");
            if (g.json && out.empty()) std::cout << text << "\n";
            std::cout << to_string(f) << "(" << k << "," << i << "): " << b.points.size() << " points, beta in ["
                      << b.points.front().beta << ", " << b.points.back().beta << "], stop: " << b.stop_reason << "\n";
            return 0;
        }
        if (*diagram) {
            DiagramSpec spec;
            spec.axis = diagram_axis_from_string(axis);
            for (int mk : marker_ks) {
                spec.markers.push_back(bifurcation_table(weighted_eigs(find_w(mk, grid, find), mk + 4)));
            }
            std::vector<BranchRecord> records;
            for (const auto& f : branch_files) records.push_back(branch_record_from_json(read_file(f)));
            write_file(output_path(cfg, out), cmd_diagram(spec, records));
            return 0;
        }
        if (*compare) {
            const auto c = cmd_compare_nodal(k, i, grid, find);
            json j{{"k", c.k}, {"i", c.i}, {"n_diff", c.n_diff}, {"n_sum", c.n_sum}};
            if (g.json) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "n(w_" << k << " - w_" << i << ") = " << c.n_diff << ", n(w_" << k << " + w_" << i
                          << ") = " << c.n_sum << "\n";
            }
            return c.n_diff == k - 1 && c.n_sum == k - 1 ? 0 : 1;
        }
        if (*verify) {
            RunConfig vc = cfg;
            if (k_lo > 0) vc.k_lo = k_lo;
            if (k_hi > 0) vc.k_hi = k_hi;
            if (vc.k_lo > vc.k_hi) vc.k_lo = vc.k_hi;
            const auto rep = cmd_verify(vc);
            const auto text = verify_report_json(rep);
            write_file(output_path(vc, out.empty() ? "verify.json" : out), text + "\n");
            if (g.json) std::cout << text << "\n";
            else std::cout << verify_summary(rep);
            return rep.all_passed() ? 0 : 1;
        }
        if (*probe) {
            Window w;
            if (probe_window.find(':') == std::string::npos) {
                w.lo = w.hi = std::stod(probe_window);
            } else {
                const auto c = probe_window.find(':');
                w.lo = std::stod(probe_window.substr(0, c));
                w.hi = std::stod(probe_window.substr(c + 1));
            }
            const auto rep = nonexistence_probe(P, Q, grid, w, attempts, cfg.seed, find);
            json sols = json::array();
            for (const auto& s : rep.solutions) {
                sols.push_back({{"beta", s.beta}, {"signature", {s.signature.n_u, s.signature.n_v, s.signature.n_sum, s.signature.n_diff}}});
            }
            json j{{"P", P}, {"Q", Q}, {"attempts", rep.attempts}, {"converged", rep.converged},
                   {"target_hits", rep.target_hits}, {"solutions", sols},
                   {"note", "absence of hits is evidence, not a proof"}};
            if (g.json) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "(" << P << "," << Q << "): " << rep.attempts << " seeds, " << rep.converged << " converged, "
                          << rep.target_hits << " with the target signature (evidence only)\n";
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "nodalbif: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nodalbif: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

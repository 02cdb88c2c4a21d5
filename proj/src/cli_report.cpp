#include "nodalbif/cli_report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include "json.hpp"

#include "nodalbif/errors.hpp"

namespace nodalbif {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    T out{};
    try {
        if constexpr (std::is_floating_point_v<T>) {
            out = static_cast<T>(std::stod(value, &used));
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
            out = static_cast<T>(std::stoull(value, &used));
        } else {
            out = static_cast<T>(std::stoll(value, &used));
        }
    } catch (const std::exception&) {
        throw ConfigError("bad value for " + key + ": '" + value + "'");
    }
    if (used != value.size()) throw ConfigError("bad value for " + key + ": '" + value + "'");
    return out;
}

std::string fmt(double x, const char* spec = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, x);
    return buf;
}

// Error::what() already leads with the kind.
std::string describe(const std::exception& e) {
    if (dynamic_cast<const Error*>(&e)) return e.what();
    return std::string("error: ") + e.what();
}

}  // namespace

void RunConfig::validate() const {
    if (n < 10) throw ConfigError("n must be at least 10");
    if (k_lo < 1 || k_hi < k_lo) throw ConfigError("k range must satisfy 1 <= k_lo <= k_hi");
    if (scalar_k_max < 1) throw ConfigError("scalar_k_max must be >= 1");
    if (i_max < 0 || m < 0) throw ConfigError("i_max and m must be >= 1 (or 0 for the default)");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (!(window_width > 0.0)) throw ConfigError("window_width must be positive");
    if (!(asymptotics_beta > 3.0)) throw ConfigError("asymptotics_beta must exceed 3");
    if (probe_attempts < 0) throw ConfigError("probe_attempts must be >= 0");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "n") cfg.n = parse_number<std::size_t>(key, value);
        else if (key == "k_lo") cfg.k_lo = parse_number<int>(key, value);
        else if (key == "k_hi") cfg.k_hi = parse_number<int>(key, value);
        else if (key == "scalar_k_max") cfg.scalar_k_max = parse_number<int>(key, value);
        else if (key == "i_max") cfg.i_max = parse_number<int>(key, value);
        else if (key == "m") cfg.m = parse_number<int>(key, value);
        else if (key == "tol") cfg.tol = parse_number<double>(key, value);
        else if (key == "window_width") cfg.window_width = parse_number<double>(key, value);
        else if (key == "asymptotics_beta") cfg.asymptotics_beta = parse_number<double>(key, value);
        else if (key == "probe_attempts") cfg.probe_attempts = parse_number<int>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "out_dir") cfg.out_dir = value;
        else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    apply_config_text(cfg, os.str());
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!path.empty()) apply_config_file(cfg, path);
    std::string lines;
    for (const auto& o : overrides) lines += o + "\n";
    apply_config_text(cfg, lines);
    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j{{"n", c.n},
                             {"k_lo", c.k_lo},
                             {"k_hi", c.k_hi},
                             {"scalar_k_max", c.scalar_k_max},
                             {"i_max", c.i_max},
                             {"m", c.m},
                             {"tol", c.tol},
                             {"window_width", c.window_width},
                             {"asymptotics_beta", c.asymptotics_beta},
                             {"probe_attempts", c.probe_attempts},
                             {"seed", c.seed}};
    return j.dump();
}

int worker_threads() {
    if (const char* env = std::getenv("NODALBIF_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = std::min<std::size_t>(jobs, static_cast<std::size_t>(std::max(1, threads)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex guard;
    auto run = [&] {
        for (std::size_t j; (j = next++) < jobs;) {
            try {
                fn(j);
            } catch (...) {
                std::lock_guard<std::mutex> lock(guard);
                if (!first) first = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

bool VerifyReport::all_passed() const { return first_failure() == nullptr; }

const CriterionResult* VerifyReport::first_failure() const {
    for (const auto& c : criteria) {
        if (!c.passed) return &c;
    }
    return nullptr;
}

namespace {

// Outcome of one job: a value or the error that replaced it.
template <class T>
struct Slot {
    std::optional<T> value;
    std::string error;
};

template <class T, class F>
void fill(Slot<T>& slot, F&& make) {
    try {
        slot.value.emplace(make());
    } catch (const std::exception& e) {
        slot.error = describe(e);
    }
}

struct Checker {
    CriterionResult r;
    std::ostringstream notes;
    bool first_note = true;

    Checker(int id, std::string name) {
        r.id = id;
        r.name = std::move(name);
        r.passed = true;
    }
    void note(const std::string& s) {
        notes << (first_note ? "" : "; ") << s;
        first_note = false;
    }
    void fail(const std::string& s) {
        note(s);
        r.passed = false;
    }
    void expect(bool ok, const std::string& what) {
        if (!ok) fail(what);
    }
    CriterionResult done() {
        r.detail = notes.str();
        return r;
    }
};

// Dense generalized eigenproblem M x = mu A x on the symmetric finite
// difference form; lambda = 1/mu from the largest mu.
std::vector<double> dense_weighted_eigs(const ScalarSolution& w, int m) {
    const auto& g = w.profile.grid();
    const auto t = assemble_operator(g, 1.0).symmetric_form();
    const auto n = static_cast<Eigen::Index>(g->size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        a(j, j) = t.diag[ju];
        if (j + 1 < n) a(j, j + 1) = a(j + 1, j) = t.off[ju];
        mm(j, j) = w.profile[ju] * w.profile[ju];
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(mm, a, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw InvariantViolated("dense generalized eigensolver failed");
    std::vector<double> out;
    for (int i = 0; i < m; ++i) out.push_back(1.0 / es.eigenvalues()[n - 1 - i]);
    return out;
}

struct BranchJob {
    Family f;
    int k;
    int i;
    Slot<Branch> result;
};

}  // namespace

VerifyReport cmd_verify(const RunConfig& cfg) {
    cfg.validate();
    VerifyReport rep;
    rep.config = cfg;
    const int threads = worker_threads();
    const auto grid = make_grid(cfg.n);
    FindOptions find;
    find.newton_tol = cfg.tol;
    ContinuationOptions copts;
    copts.corrector_tol = cfg.tol;

    const int k_scalar = std::max(cfg.scalar_k_max, cfg.k_hi);
    std::vector<Slot<ScalarSolution>> scalar(static_cast<std::size_t>(k_scalar));
    parallel_for(scalar.size(), threads, [&](std::size_t j) {
        fill(scalar[j], [&] { return find_w(static_cast<int>(j) + 1, grid, find); });
    });
    auto w_of = [&](int k) -> const Slot<ScalarSolution>& { return scalar[static_cast<std::size_t>(k - 1)]; };

    std::vector<int> ks;
    for (int k = cfg.k_lo; k <= cfg.k_hi; ++k) ks.push_back(k);
    std::map<int, Slot<ModeData>> modes;
    for (int k : ks) modes[k];
    parallel_for(ks.size(), threads, [&](std::size_t j) {
        const int k = ks[j];
        auto& slot = modes.at(k);
        if (!w_of(k).value) {
            slot.error = w_of(k).error;
            return;
        }
        fill(slot, [&] {
            ModeData md;
            md.w = *w_of(k).value;
            md.spectrum = weighted_eigs(md.w, std::max(cfg.m_for(k), cfg.i_limit(k) + 1));
            md.table = bifurcation_table(md.spectrum);
            return md;
        });
    });

    // Independent heavy jobs: branches, the long W(1,2) run, probes,
    // bifurcation detection.
    std::vector<BranchJob> branches;
    for (int k : ks) {
        for (int i = 1; i <= cfg.i_limit(k); ++i) {
            if (i == k) continue;
            for (Family f : {Family::U, Family::W}) branches.push_back({f, k, i, {}});
        }
    }
    const bool with_asymptotics = cfg.k_lo <= 1 && cfg.k_hi >= 1;
    Slot<Branch> long_w;
    std::vector<std::pair<int, int>> probe_pq{{0, 1}, {1, 2}};
    std::vector<Slot<ProbeReport>> probes(probe_pq.size());
    std::vector<Slot<std::vector<SyncCrossing>>> crossings(ks.size());

    const std::size_t n_jobs = branches.size() + 1 + probes.size() + crossings.size();
    parallel_for(n_jobs, threads, [&](std::size_t j) {
        if (j < branches.size()) {
            auto& b = branches[j];
            const auto& mode = modes.at(b.k);
            if (!mode.value) {
                b.result.error = mode.error;
                return;
            }
            fill(b.result, [&] {
                return trace_branch(*mode.value, b.i, b.f, exploration_window(b.f, *mode.value, b.i, cfg.window_width),
                                    copts);
            });
            return;
        }
        j -= branches.size();
        if (j == 0) {
            if (!with_asymptotics) return;
            const auto& mode = modes.at(1);
            if (!mode.value) {
                long_w.error = mode.error;
                return;
            }
            fill(long_w, [&] { return trace_branch(*mode.value, 2, Family::W, {3.0, cfg.asymptotics_beta}, copts); });
            return;
        }
        j -= 1;
        if (j < probes.size()) {
            const auto [P, Q] = probe_pq[j];
            fill(probes[j], [&] { return nonexistence_probe(P, Q, grid, {3.0, 3.0}, cfg.probe_attempts, cfg.seed, find); });
            return;
        }
        j -= probes.size();
        const auto& mode = modes.at(ks[j]);
        if (!mode.value) {
            crossings[j].error = mode.error;
            return;
        }
        const auto& t = mode.value->table;
        fill(crossings[j], [&] { return detect_sync_bifurcations(mode.value->w, t.rows.back().beta + 1e-3, 2.95, 400); });
    });

    // 1. scalar solutions
    {
        Checker c(1, "scalar solutions");
        double worst = 0.0;
        for (int k = 1; k <= cfg.scalar_k_max; ++k) {
            const auto& s = w_of(k);
            if (!s.value) {
                c.fail("k=" + std::to_string(k) + " " + s.error);
                continue;
            }
            const int nodes = nodal_count(s.value->profile);
            c.expect(nodes == k - 1, "k=" + std::to_string(k) + " has " + std::to_string(nodes) + " nodes");
            const auto ip = inner_products(s.value->profile, s.value->profile);
            const double rel = std::abs(ip.h1 - ip.l4_f) / ip.l4_f;
            worst = std::max(worst, rel);
            c.expect(rel <= 1e-6, "k=" + std::to_string(k) + " Nehari defect " + fmt(rel, "%.3e"));
        }
        c.note("k=1.." + std::to_string(cfg.scalar_k_max) + ", max Nehari defect " + fmt(worst, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 2. Morse index
    {
        Checker c(2, "scalar Morse index");
        double margin = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= cfg.scalar_k_max; ++k) {
            const auto& s = w_of(k);
            if (!s.value) {
                c.fail("k=" + std::to_string(k) + " " + s.error);
                continue;
            }
            const auto m = scalar_morse_index(*s.value);
            margin = std::min(margin, m.min_abs_eig);
            c.expect(m.index == k, "k=" + std::to_string(k) + " index " + std::to_string(m.index));
            c.expect(m.min_abs_eig > 1e-4, "k=" + std::to_string(k) + " eigenvalue margin " + fmt(m.min_abs_eig));
        }
        c.note("smallest |eigenvalue| " + fmt(margin));
        rep.criteria.push_back(c.done());
    }
    // 3. spectrum anchors and the dense oracle
    {
        Checker c(3, "spectrum anchors");
        double oracle = 0.0;
        for (int k : ks) {
            const auto& md = modes.at(k);
            if (!md.value) {
                c.fail("k=" + std::to_string(k) + " " + md.error);
                continue;
            }
            const auto& ev = md.value->spectrum.eigenvalues;
            try {
                validate_spectrum(md.value->spectrum, md.value->w);
            } catch (const std::exception& e) {
                c.fail("k=" + std::to_string(k) + " " + describe(e));
            }
            const double lkk = ev[static_cast<std::size_t>(k - 1)];
            c.expect(std::abs(lkk - 1.0) <= 1e-6, "k=" + std::to_string(k) + " lambda_kk " + fmt(lkk, "%.12g"));
            for (double l : ev) c.expect(!(l > 1.0 + 1e-6 && l < 3.0 - 1e-6), "eigenvalue " + fmt(l) + " in the gap");
            c.expect(ev[static_cast<std::size_t>(k)] > 3.0, "k=" + std::to_string(k) + " lambda_{k,k+1} <= 3");
        }
        const auto coarse = make_grid(400);
        for (int k : ks) {
            if (k > 3) break;
            try {
                const auto w = find_w(k, coarse, find);
                const auto s = weighted_eigs(w, k + 4);
                const auto d = dense_weighted_eigs(w, k + 4);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double rel = std::abs(s.eigenvalues[i] - d[i]) / std::max(1.0, std::abs(d[i]));
                    oracle = std::max(oracle, rel);
                }
            } catch (const std::exception& e) {
                c.fail("dense oracle k=" + std::to_string(k) + " " + describe(e));
            }
        }
        c.expect(oracle <= 1e-9, "dense oracle disagreement " + fmt(oracle, "%.3e"));
        c.note("dense oracle at n=400 agrees to " + fmt(oracle, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 4. bifurcation table
    {
        Checker c(4, "bifurcation table");
        c.expect(sync_bifurcation_parameter(1.0) == 1.0, "beta(lambda = 1) != 1");
        double worst = 0.0;
        for (int k : ks) {
            const auto& md = modes.at(k);
            if (!md.value) {
                c.fail("k=" + std::to_string(k) + " " + md.error);
                continue;
            }
            const auto& t = md.value->table;
            c.expect(std::abs(t.row(k).beta - 1.0) <= 4e-6, "k=" + std::to_string(k) + " beta_kk " + fmt(t.row(k).beta, "%.12g"));
            for (const auto& row : t.rows) {
                c.expect(row.beta > -1.0 && row.beta < 3.0, "beta_{k,i} outside (-1,3)");
                if (row.i > 1) c.expect(row.beta < t.row(row.i - 1).beta, "beta_{k,i} not decreasing");
                const double d = std::abs(row.beta_tilde - moebius(row.beta)) / std::max(1.0, row.beta_tilde);
                worst = std::max(worst, d);
            }
        }
        c.expect(worst <= 1e-14, "moebius defect " + fmt(worst, "%.3e"));
        c.note("max moebius defect " + fmt(worst, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 5. kernel alignment along the synchronized curve
    {
        Checker c(5, "jacobian kernel alignment");
        double worst = 0.0;
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const int k = ks[j];
            if (!crossings[j].value) {
                c.fail("k=" + std::to_string(k) + " " + crossings[j].error);
                continue;
            }
            const auto& found = *crossings[j].value;
            const auto& t = modes.at(k).value->table;
            const double lo = t.rows.back().beta + 1e-3;
            std::vector<double> expected;
            for (const auto& row : t.rows) {
                if (row.beta > lo && row.beta < 2.95) expected.push_back(row.beta);
            }
            std::sort(expected.begin(), expected.end());
            if (found.size() != expected.size()) {
                c.fail("k=" + std::to_string(k) + " found " + std::to_string(found.size()) + " crossings, table has " +
                       std::to_string(expected.size()));
                continue;
            }
            for (std::size_t q = 0; q < found.size(); ++q) {
                const double d = std::abs(found[q].beta - expected[q]);
                worst = std::max(worst, d);
                c.expect(d <= 1e-4, "k=" + std::to_string(k) + " crossing off by " + fmt(d, "%.3e"));
                c.expect(found[q].index_left - found[q].index_right == 1, "k=" + std::to_string(k) + " index jump " +
                                                                              std::to_string(found[q].index_left) + "->" +
                                                                              std::to_string(found[q].index_right));
            }
        }
        c.note("max |beta_found - beta_table| " + fmt(worst, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 6, 7. signatures and containment along every branch
    {
        Checker sig(6, "branch signatures");
        Checker cont(7, "window containment");
        std::size_t points = 0;
        for (const auto& b : branches) {
            const auto tag = to_string(b.f) + "(" + std::to_string(b.k) + "," + std::to_string(b.i) + ")";
            if (!b.result.value) {
                sig.fail(tag + " " + b.result.error);
                cont.fail(tag + " not traced");
                continue;
            }
            const auto& br = *b.result.value;
            const auto expected = expected_signature(b.f, b.k, b.i);
            const auto outer = containment_window(b.f, *modes.at(b.k).value, b.i);
            int bad_sig = 0, bad_win = 0;
            for (const auto& p : br.points) {
                const auto s = nodal_signature(p);
                if (!s.same_counts(expected) || !sign_class_ok(b.f, s) || residual(p).sup > 1e-8) ++bad_sig;
                if (!(p.beta > outer.lo && p.beta < outer.hi)) ++bad_win;
            }
            points += br.points.size();
            sig.expect(br.points.size() > 1, tag + " has no continuation points");
            sig.expect(bad_sig == 0, tag + " " + std::to_string(bad_sig) + " points off signature");
            cont.expect(bad_win == 0, tag + " " + std::to_string(bad_win) + " points outside the containment bound");
        }
        sig.note(std::to_string(branches.size()) + " branches, " + std::to_string(points) + " points");
        cont.note(std::to_string(points) + " points checked");
        rep.criteria.push_back(sig.done());
        rep.criteria.push_back(cont.done());
    }
    // 8. T_1 images of U points
    {
        Checker c(8, "symmetry map");
        std::vector<std::pair<const StatePair*, const BranchJob*>> pool;
        for (const auto& b : branches) {
            if (b.f != Family::U || !b.result.value) continue;
            for (const auto& p : b.result.value->points) {
                if (p.beta > -1.0 && p.beta < 1.0) pool.emplace_back(&p, &b);
            }
        }
        const std::size_t want = 20;
        double worst_res = 0.0, worst_beta = 0.0;
        if (pool.empty()) {
            c.expect(ks.empty(), "no U points with beta in (-1,1)");
        }
        const std::size_t take = std::min(want, pool.size());
        for (std::size_t q = 0; q < take; ++q) {
            const auto& [p, job] = pool[q * pool.size() / take];
            const auto img = map_T(1, *p);
            const double exact = (3.0 - p->beta) / (1.0 + p->beta);
            worst_beta = std::max(worst_beta, std::abs(img.beta - exact) / std::max(1.0, std::abs(exact)));
            worst_res = std::max(worst_res, residual(img).sup);
            const auto s = nodal_signature(img);
            c.expect(s.same_counts(expected_signature(Family::W, job->k, job->i)) && sign_class_ok(Family::W, s),
                     "image of a U(" + std::to_string(job->k) + "," + std::to_string(job->i) + ") point has signature " + s.str());
        }
        c.expect(ks.empty() || take == want, "only " + std::to_string(take) + " U points available");
        c.expect(worst_res <= 1e-8, "image residual " + fmt(worst_res, "%.3e"));
        c.expect(worst_beta <= 1e-12, "beta' defect " + fmt(worst_beta, "%.3e"));
        c.note(std::to_string(take) + " points, max residual " + fmt(worst_res, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 9. circle at beta = 1
    {
        Checker c(9, "circle at beta = 1");
        double worst = 0.0;
        for (int k : ks) {
            if (!w_of(k).value) {
                c.fail("k=" + std::to_string(k) + " " + w_of(k).error);
                continue;
            }
            for (int s = 0; s < 64; ++s) worst = std::max(worst, residual(circle_solution(*w_of(k).value, 2 * kPi * s / 64)).sup);
        }
        c.expect(worst <= 1e-9, "residual " + fmt(worst, "%.3e"));
        c.note("64 samples per k, max residual " + fmt(worst, "%.3e"));
        rep.criteria.push_back(c.done());
    }
    // 10. nodal comparison
    {
        Checker c(10, "nodal comparison");
        int pairs = 0;
        for (int k = 2; k <= cfg.scalar_k_max; ++k) {
            for (int i = 1; i < k; ++i) {
                if (!w_of(k).value || !w_of(i).value) {
                    c.fail("(" + std::to_string(k) + "," + std::to_string(i) + ") scalar solution missing");
                    continue;
                }
                const auto& wk = w_of(k).value->profile;
                const auto& wi = w_of(i).value->profile;
                const int nd = nodal_count(wk - wi), ns = nodal_count(wk + wi);
                c.expect(nd == k - 1 && ns == k - 1, "(" + std::to_string(k) + "," + std::to_string(i) + ") counts " +
                                                         std::to_string(nd) + "," + std::to_string(ns));
                ++pairs;
            }
        }
        c.note(std::to_string(pairs) + " pairs");
        rep.criteria.push_back(c.done());
    }
    // 11. asymptotics on W(1,2)
    {
        Checker c(11, "large-beta asymptotics");
        if (!with_asymptotics) {
            c.note("k=1 not in range, skipped");
        } else if (!long_w.value) {
            c.fail(long_w.error);
        } else {
            const double top = cfg.asymptotics_beta;
            try {
                const auto a = asymptotics_check(*long_w.value, {top / 4, top / 2, top});
                c.expect(a.spread < 0.25, "scaled sup-norm spread " + fmt(a.spread));
                c.expect(a.residual_decreasing, "limit residual not decreasing");
                std::string s = "scaled sup";
                for (const auto& x : a.samples) s += " " + fmt(x.scaled_sup, "%.4f");
                s += ", limit residual";
                for (const auto& x : a.samples) s += " " + fmt(x.limit_residual, "%.4g");
                c.note(s);
            } catch (const std::exception& e) {
                c.fail(describe(e));
            }
        }
        rep.criteria.push_back(c.done());
    }
    // 12. nonexistence probe
    {
        Checker c(12, "nonexistence probe");
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const auto tag = "(" + std::to_string(probe_pq[j].first) + "," + std::to_string(probe_pq[j].second) + ")";
            if (!probes[j].value) {
                c.fail(tag + " " + probes[j].error);
                continue;
            }
            const auto& p = *probes[j].value;
            c.expect(p.target_hits == 0, tag + " " + std::to_string(p.target_hits) + " hits");
            c.note(tag + " " + std::to_string(p.attempts) + " seeds, " + std::to_string(p.converged) + " converged, " +
                   std::to_string(p.target_hits) + " hits");
        }
        c.note("evidence only, not a proof");
        rep.criteria.push_back(c.done());
    }
    return rep;
}

std::string verify_report_json(const VerifyReport& r) {
    nlohmann::ordered_json j;
    j["config"] = nlohmann::ordered_json::parse(config_to_json(r.config));
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : r.criteria) arr.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.passed}, {"detail", c.detail}});
    j["criteria"] = std::move(arr);
    j["all_pass"] = r.all_passed();
    const auto* f = r.first_failure();
    j["first_failure"] = f ? nlohmann::ordered_json(f->id) : nlohmann::ordered_json(nullptr);
    return j.dump(2);
}

std::string verify_summary(const VerifyReport& r) {
    std::ostringstream os;
    for (const auto& c : r.criteria) {
        os << (c.passed ? "PASS" : "FAIL") << " " << (c.id < 10 ? " " : "") << c.id << " " << c.name << ": " << c.detail
           << "\n";
    }
    if (const auto* f = r.first_failure()) {
        os << "first failing criterion: " << f->id << " (" << f->name << ")\n";
    } else {
        os << "all " << r.criteria.size() << " criteria pass\n";
    }
    return os.str();
}

NodalComparison cmd_compare_nodal(int k, int i, const GridPtr& grid, const FindOptions& opts) {
    if (!(k > i && i >= 1)) throw std::invalid_argument("compare-nodal needs k > i >= 1");
    const auto wk = find_w(k, grid, opts).profile;
    const auto wi = find_w(i, grid, opts).profile;
    return {k, i, nodal_count(wk - wi), nodal_count(wk + wi)};
}

DiagramAxis diagram_axis_from_string(const std::string& s) {
    if (s == "sup_u") return DiagramAxis::SupU;
    if (s == "sup_v") return DiagramAxis::SupV;
    if (s == "h1_norm" || s == "h1") return DiagramAxis::H1;
    throw std::invalid_argument("axis must be sup_u, sup_v or h1_norm");
}

namespace {

struct Marker {
    double beta;
    int order;  // beta, beta~, circle
    int k;
    int i;
};

const char* family_color(const std::string& f) {
    if (f == "U") return "#1f77b4";
    if (f == "W") return "#d62728";
    if (f == "T") return "#444444";
    return "#888888";
}

}  // namespace

std::string cmd_diagram(const DiagramSpec& spec, const std::vector<BranchRecord>& branches) {
    auto yval = [&](const BranchRecord::Point& p) {
        switch (spec.axis) {
            case DiagramAxis::SupU: return p.sup_u;
            case DiagramAxis::SupV: return p.sup_v;
            case DiagramAxis::H1: return p.h1;
        }
        return p.sup_u;
    };
    std::vector<Marker> markers;
    for (const auto& t : spec.markers) {
        for (const auto& row : t.rows) {
            if (row.i == t.k) continue;
            markers.push_back({row.beta, 0, t.k, row.i});
            markers.push_back({row.beta_tilde, 1, t.k, row.i});
        }
    }
    if (spec.circle_marker) markers.push_back({1.0, 2, 0, 0});
    std::sort(markers.begin(), markers.end(), [](const Marker& a, const Marker& b) {
        return std::tie(a.beta, a.order, a.k, a.i) < std::tie(b.beta, b.order, b.k, b.i);
    });

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, yhi = 0.0;
    for (const auto& m : markers) {
        xlo = std::min(xlo, m.beta);
        xhi = std::max(xhi, m.beta);
    }
    for (const auto& b : branches) {
        for (const auto& p : b.points) {
            const double y = yval(p);
            if (!std::isfinite(y)) throw SchemaError("branch " + b.family + " lacks the plotted field");
            xlo = std::min(xlo, p.beta);
            xhi = std::max(xhi, p.beta);
            yhi = std::max(yhi, y);
        }
    }
    if (!std::isfinite(xlo)) {
        xlo = -1.0;
        xhi = 3.0;
    }
    if (xhi - xlo < 1e-9) {
        xlo -= 1.0;
        xhi += 1.0;
    }
    const double pad = 0.05 * (xhi - xlo);
    xlo -= pad;
    xhi += pad;
    if (yhi <= 0.0) yhi = 1.0;
    yhi *= 1.05;

    const double left = 60, right = spec.width - 20.0, top = 20, bottom = spec.height - 60.0;
    auto X = [&](double b) { return left + (b - xlo) / (xhi - xlo) * (right - left); };
    auto Y = [&](double y) { return bottom - y / yhi * (bottom - top); };
    const char* ylabel = spec.axis == DiagramAxis::SupU ? "sup |u|" : spec.axis == DiagramAxis::SupV ? "sup |v|" : "H1 norm";

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
       << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<g class=\"axes\" stroke=\"black\">\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(right) << "\" y2=\"" << fmt(bottom) << "\"/>\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(top) << "\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double b = xlo + (xhi - xlo) * t / 5;
        const double y = yhi * t / 5;
        os << "<line x1=\"" << fmt(X(b)) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(X(b)) << "\" y2=\"" << fmt(bottom + 4) << "\"/>\n";
        os << "<text x=\"" << fmt(X(b)) << "\" y=\"" << fmt(bottom + 16) << "\" text-anchor=\"middle\" stroke=\"none\">"
           << fmt(b, "%.3g") << "</text>\n";
        os << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(Y(y)) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(Y(y)) << "\"/>\n";
        os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(Y(y) + 4) << "\" text-anchor=\"end\" stroke=\"none\">"
           << fmt(y, "%.3g") << "</text>\n";
    }
    os << "<text x=\"" << fmt((left + right) / 2) << "\" y=\"" << fmt(bottom + 34) << "\" text-anchor=\"middle\" stroke=\"none\">&#946;</text>\n";
    os << "<text x=\"14\" y=\"" << fmt((top + bottom) / 2) << "\" text-anchor=\"middle\" stroke=\"none\" transform=\"rotate(-90 14 "
       << fmt((top + bottom) / 2) << ")\">" << ylabel << "</text>\n";
    os << "</g>\n";

    os << "<g class=\"branches\" fill=\"none\" stroke-width=\"1.5\">\n";
    for (const auto& b : branches) {
        os << "<polyline class=\"branch\" data-family=\"" << b.family << "\" data-k=\"" << b.k << "\" data-i=\"" << b.i
           << "\" stroke=\"" << family_color(b.family) << "\" points=\"";
        for (std::size_t j = 0; j < b.points.size(); ++j) {
            os << (j ? " " : "") << fmt(X(b.points[j].beta)) << "," << fmt(Y(yval(b.points[j])));
        }
        os << "\"/>\n";
    }
    os << "</g>\n";

    os << "<g class=\"markers\">\n";
    for (const auto& m : markers) {
        const double x = X(m.beta);
        if (m.order == 2) {
            os << "<g class=\"marker\" data-kind=\"circle\" data-beta=\"" << fmt(m.beta, "%.12g") << "\">"
               << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(bottom) << "\" r=\"5\" fill=\"none\" stroke=\"#2ca02c\"/>"
               << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(bottom + 48) << "\" text-anchor=\"middle\">circle</text></g>\n";
            continue;
        }
        const bool tilde = m.order == 1;
        os << "<g class=\"marker\" data-kind=\"" << (tilde ? "beta_tilde" : "beta") << "\" data-k=\"" << m.k
           << "\" data-i=\"" << m.i << "\" data-beta=\"" << fmt(m.beta, "%.12g") << "\">"
           << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(bottom - 6) << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(bottom + 6)
           << "\" stroke=\"" << (tilde ? "#d62728" : "#1f77b4") << "\"/>"
           << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(bottom - 9) << "\" text-anchor=\"middle\">"
           << (tilde ? "&#946;&#771;" : "&#946;") << "<tspan baseline-shift=\"sub\" font-size=\"8\">" << m.k << "," << m.i
           << "</tspan></text></g>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

std::string spectrum_to_json(const BifurcationTable& t) {
    nlohmann::ordered_json j;
    j["k"] = t.k;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"i", r.i}, {"lambda", r.lambda}, {"beta", r.beta}, {"beta_tilde", r.beta_tilde},
                        {"window", to_string(r.window)}});
    }
    j["rows"] = std::move(rows);
    return j.dump(2);
}

}  // namespace nodalbif

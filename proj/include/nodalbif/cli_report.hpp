#pragma once

// Run configuration, the verification suite behind `nodalbif verify`,
// nodal comparison of scalar solutions and the SVG bifurcation diagram.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nodalbif/continuation.hpp"

namespace nodalbif {

struct RunConfig {
    std::size_t n = 2000;          ///< interior grid points
    int k_lo = 1;                  ///< branch criteria cover k_lo..k_hi
    int k_hi = 3;
    int scalar_k_max = 4;          ///< scalar and nodal-comparison criteria cover 1..scalar_k_max
    int i_max = 3;                 ///< branches use i = 1..i_max, i != k; 0: k + 2
    int m = 0;                     ///< eigenvalues per mode; 0: k + 4
    double tol = 1e-10;            ///< Newton and corrector target
    double window_width = 1.0;
    double asymptotics_beta = 80.0;
    int probe_attempts = 50;
    std::uint64_t seed = 12345;
    std::string out_dir = ".";

    int i_limit(int k) const { return i_max > 0 ? i_max : k + 2; }
    int m_for(int k) const { return m > 0 ? m : k + 4; }
    /// Throws ConfigError on a non-positive tolerance, k or i < 1, n < 10.
    void validate() const;
};

/// Applies `key = value` lines (# comments, blank lines allowed) on top of
/// `cfg`. Unknown keys and malformed values throw ConfigError.
void apply_config_text(RunConfig& cfg, const std::string& text);
/// Reads and applies a config file. Throws ConfigError if unreadable.
void apply_config_file(RunConfig& cfg, const std::string& path);
/// Defaults, then the config file (if any), then `overrides` as key = value
/// lines: flags win. Validates the result.
RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides);
std::string config_to_json(const RunConfig& cfg);

/// NODALBIF_THREADS if set and positive, else the hardware concurrency.
int worker_threads();
/// Runs fn(0..jobs-1) on up to `threads` workers. The first exception thrown
/// by any job is rethrown after all workers finish.
void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn);

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    RunConfig config;
    std::vector<CriterionResult> criteria;

    bool all_passed() const;
    /// nullptr when everything passed.
    const CriterionResult* first_failure() const;
};

/// The twelve acceptance criteria at the configured resolution. Criteria
/// whose k range is empty pass vacuously with a note in the detail.
VerifyReport cmd_verify(const RunConfig& cfg);
/// Deterministic for a fixed config: no timings, fixed number formatting.
std::string verify_report_json(const VerifyReport& r);
/// One PASS/FAIL line per criterion.
std::string verify_summary(const VerifyReport& r);

struct NodalComparison {
    int k = 0;
    int i = 0;
    int n_diff = 0;  ///< sign changes of w_k - w_i
    int n_sum = 0;   ///< sign changes of w_k + w_i
};

/// Throws std::invalid_argument unless k > i >= 1.
NodalComparison cmd_compare_nodal(int k, int i, const GridPtr& grid, const FindOptions& opts = {});

enum class DiagramAxis { SupU, SupV, H1 };
DiagramAxis diagram_axis_from_string(const std::string& s);

struct DiagramSpec {
    DiagramAxis axis = DiagramAxis::SupU;
    std::vector<BifurcationTable> markers;  ///< beta_{k,i} and beta~_{k,i} for each table
    bool circle_marker = true;              ///< beta = 1
    int width = 800;
    int height = 500;
};

/// SVG with axes, one polyline per branch (file order), and the markers
/// sorted by beta. Throws SchemaError if a branch lacks the plotted field.
std::string cmd_diagram(const DiagramSpec& spec, const std::vector<BranchRecord>& branches);

/// {"k","rows":[{"i","lambda","beta","beta_tilde","window"}]}.
std::string spectrum_to_json(const BifurcationTable& t);

}  // namespace nodalbif

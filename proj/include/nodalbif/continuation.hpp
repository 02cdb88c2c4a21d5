#pragma once

// Branches bifurcating from the synchronized (T) and semi-trivial (ST)
// curves: Crandall-Rabinowitz branch switching, pseudo-arclength
// continuation in beta with nodal-signature monitoring, large-beta
// asymptotics and a randomized nonexistence probe.

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nodalbif/coupled.hpp"
#include "nodalbif/grid.hpp"
#include "nodalbif/scalar_field.hpp"
#include "nodalbif/spectral.hpp"

namespace nodalbif {

/// U: bifurcating from T_k at beta_{k,i}; W: from ST_k at beta~_{k,i};
/// T and ST are the reference curves themselves.
enum class Family { U, W, T, ST };

std::string to_string(Family f);
/// Accepts "u", "w", "t", "st" in either case. Throws std::invalid_argument.
Family family_from_string(const std::string& s);

/// Everything about w_k the branch operations need; immutable once built.
struct ModeData {
    ScalarSolution w;
    Spectrum spectrum;
    BifurcationTable table;

    int k() const { return w.k; }
};

/// find_w, weighted_eigs (m eigenvalues) and the bifurcation table.
ModeData prepare_mode(const GridPtr& grid, int k, int m, const FindOptions& opts = {});

struct Window {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double beta) const { return beta >= lo && beta <= hi; }
};

/// Counts (n_u, n_v, n_sum, n_diff) every point of the family must carry.
NodalSignature expected_signature(Family f, int k, int i);
/// u(0), v(0) > 0 for U; u(0) > |v(0)| for W.
bool sign_class_ok(Family f, const NodalSignature& s);

/// beta_{k,i} for U, beta~_{k,i} for W.
double bifurcation_beta(Family f, const ModeData& mode, int i);
/// The point of T_k or ST_k where the family branches off.
StatePair bifurcation_point(Family f, const ModeData& mode, int i);
/// Half-line predicted for the beta-projection, starting at the bifurcation
/// parameter: U: (-inf, beta) for i > k, (beta, inf) for i < k; W mirrored.
Window predicted_window(Family f, const ModeData& mode, int i);
/// Outer bound the projection never crosses: 0 / 1 for U, 3 / 1 for W.
Window containment_window(Family f, const ModeData& mode, int i);

/// Continuation window: `width` past the bifurcation parameter on the
/// predicted side, closed by the containment bound on the other.
Window exploration_window(Family f, const ModeData& mode, int i, double width = 1.0);

/// Kernel direction at the bifurcation point, unit in the L2 metric:
/// (phi_{k,i}, -phi_{k,i}) for U, (0, phi_{k,i}) for W.
std::pair<RadialFunction, RadialFunction> branch_tangent(const ModeData& mode, int i, Family f);

struct ContinuationOptions {
    double ds0 = 1e-3;             ///< branch-switch step in the tangent metric
    int switch_halvings = 5;
    double ds_min = 1e-5;
    double ds_max = 0.1;
    double grow = 1.3;
    int easy_streak = 3;           ///< consecutive easy steps before growing
    int easy_iterations = 3;       ///< corrector iterations counted as easy
    double corrector_tol = 1e-10;  ///< fixed-point residual sup
    int corrector_max_iter = 8;
    std::size_t max_points = 5000;
    double norm_overflow = 1e6;
};

struct BranchStats {
    int accepted = 0;
    int rejected = 0;
    int corrector_iterations = 0;
    double ds_smallest = 0.0;
    double ds_largest = 0.0;
};

struct Branch {
    Family family = Family::U;
    int k = 0;
    int i = 0;
    NodalSignature signature;
    std::vector<StatePair> points;
    double origin_beta = 0.0;
    BranchStats stats;
    std::string stop_reason;
};

/// First off-branch point: bifurcation point plus sigma*ds along the tangent,
/// corrected with beta free in the hyperplane orthogonal to the tangent.
/// Tries sigma = +1 then -1, halving ds up to switch_halvings times.
/// Throws SwitchFailed.
StatePair switch_branch(const ModeData& mode, int i, Family f, const ContinuationOptions& opts = {});

/// Secant pseudo-arclength continuation from `start`, with `prev` supplying
/// the first secant. Stops when beta leaves `window`, after max_points, or on
/// norm overflow. Throws SignatureBroken, CorrectorStalled.
Branch continue_branch(const StatePair& prev, const StatePair& start, Family f, int k, int i, Window window,
                       const ContinuationOptions& opts = {});

/// Samples of T_k (synchronized, beta > -1) or ST_k (semi-trivial) at the
/// given parameters.
Branch reference_branch(Family f, const ModeData& mode, const std::vector<double>& betas);

/// switch_branch followed by continue_branch from the bifurcation point.
Branch trace_branch(const ModeData& mode, int i, Family f, Window window, const ContinuationOptions& opts = {});

/// Solution on the branch at exactly `beta`: Newton at fixed beta from the
/// linear interpolation of the bracketing points. Throws std::out_of_range
/// if no pair of points brackets beta.
StatePair point_at_beta(const Branch& b, double beta);

struct AsymptoticsSample {
    double beta = 0.0;
    double scaled_sup = 0.0;       ///< sqrt(beta) * max(|u|_inf, |v|_inf)
    double limit_residual = 0.0;   ///< scaled pair in -Delta U + U = U V^2, -Delta V + V = U^2 V
    NodalSignature signature;
};

struct AsymptoticsReport {
    std::vector<AsymptoticsSample> samples;
    double spread = 0.0;           ///< max/min - 1 of scaled_sup
    bool residual_decreasing = false;
};

AsymptoticsReport asymptotics_check(const Branch& b, const std::vector<double>& betas = {20.0, 40.0, 80.0});

/// Fixed-point residual of the scaled pair in the large-beta limit system.
double limit_system_residual(const StatePair& s);

struct ProbeHit {
    double beta = 0.0;
    NodalSignature signature;
};

struct ProbeReport {
    int P = 0;
    int Q = 0;
    int attempts = 0;
    int converged = 0;
    int target_hits = 0;
    std::vector<ProbeHit> solutions;  ///< every converged run, in seed order
};

/// Newton from `attempts` seeded random initial pairs with P and Q sign
/// changes at betas drawn uniformly from `betas` (a degenerate window gives a
/// single beta). Evidence only: a miss does not prove nonexistence.
ProbeReport nonexistence_probe(int P, int Q, const GridPtr& grid, Window betas, int attempts, std::uint64_t seed,
                               const FindOptions& find = {});

struct SyncCrossing {
    double beta = 0.0;           ///< located parameter
    int index_left = 0;          ///< Morse index just below
    int index_right = 0;         ///< Morse index just above
    double min_abs_eig = 0.0;    ///< at the located parameter
};

/// Scans the Morse index of the synchronized solution over [lo, hi] and
/// bisects each jump down to `tol` in beta.
std::vector<SyncCrossing> detect_sync_bifurcations(const ScalarSolution& w, double lo, double hi, int samples,
                                                   double tol = 1e-9);

/// min over point pairs of max(|dbeta|, |du|_inf, |dv|_inf).
double branch_distance(const Branch& a, const Branch& b);

/// Branch JSON: {"family","k","i","signature":[4],"meta":{...},
/// "points":[{"beta","sup_u","sup_v","h1","u"?,"v"?}]}, h1 the norm of (u, v).
std::string branch_to_json(const Branch& b, bool with_profiles = true);

struct BranchRecord {
    std::string family;
    int k = 0;
    int i = 0;
    std::vector<int> signature;
    struct Point {
        double beta = 0.0;
        double sup_u = 0.0;
        double sup_v = 0.0;
        double h1 = std::numeric_limits<double>::quiet_NaN();  ///< optional field
    };
    std::vector<Point> points;
};

/// Parses the branch JSON (profiles ignored). Throws SchemaError.
BranchRecord branch_record_from_json(const std::string& text);

}  // namespace nodalbif

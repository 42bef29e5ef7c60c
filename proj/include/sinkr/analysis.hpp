#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sinkr {

enum class OracleMode { Head, GroupMean };

// Ground-truth sink label from full-attention mass on token 0.
struct OracleLabel {
    double alpha0 = 0.0;
    bool is_sink = false;  // alpha0 > gamma, strict
};

// Head mode: one label per weight row. GroupMean mode: one label for the
// group from the mean alpha0 over rows. Rows must sum to 1 within 1e-4.
std::vector<OracleLabel> oracle_labels(std::span<const float> weights,
                                       std::size_t heads, std::size_t len,
                                       double gamma, OracleMode mode);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // descending score threshold order
    double auprc = 0.0;
};

// Operating point at every distinct score (predict positive when score >=
// threshold); AUPRC via average-precision step summation over the
// descending-score sweep.
PrCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct ConcentrationStats {
    double bos_score = 0.0;
    double max_nonbos = 0.0;
    double mean_nonbos = 0.0;
    double ratio = 0.0;  // bos_score / max_nonbos
};

ConcentrationStats concentration_stats(std::span<const float> weight_row,
                                       std::size_t bos_index = 0);

// Field-wise means over many rows (so the aggregate ratio is the mean of
// per-row ratios, not a ratio of means).
ConcentrationStats mean_concentration(std::span<const ConcentrationStats> stats);

struct NormStats {
    double bos_norm = 0.0;
    double mean_nonbos_norm = 0.0;
};

NormStats norm_stats(std::span<const float> rows, std::size_t n, std::size_t dim,
                     std::size_t bos_index = 0);

struct KeyGeometryStats {
    double mean_cos_within_bos = 0.0;
    double mean_cos_bos_to_rest = 0.0;
    double centroid_distance = 0.0;  // BOS centroid to global mean
    std::size_t excluded_rows = 0;   // zero-norm rows dropped from cosines
};

KeyGeometryStats key_geometry_stats(std::span<const float> rows, std::size_t n,
                                    std::size_t dim,
                                    const std::vector<std::size_t>& bos_rows);

struct ResidualMetrics {
    double r_res = 0.0;    // |c| / (|r_in| + epsilon)
    double a_align = 0.0;  // cos(c, delta_r_attn)
    bool degenerate = false;
};

ResidualMetrics residual_metrics(std::span<const float> c, std::span<const float> r_in,
                                 std::span<const float> delta_r_attn,
                                 double epsilon = 1e-8);

struct BoundReport {
    double delta = 0.0;      // 1 - alpha0
    double epsilon_v = 0.0;
    double v_max = 0.0;      // max value norm over non-initial tokens
    double u_norm = 0.0;     // |sum_i alpha_i v_i|
    double bound = 0.0;      // epsilon_v + delta * v_max
    bool holds = false;      // u_norm <= bound + 1e-6
    bool precondition_ok = false;
};

// Triangle-inequality check on the head-update norm for a sink-dominant
// weight row. The |v0| <= epsilon_v precondition is reported, not asserted.
BoundReport check_update_bound(std::span<const float> weight_row,
                               std::span<const float> values,
                               std::size_t len, std::size_t dim,
                               double epsilon_v);

}  // namespace sinkr

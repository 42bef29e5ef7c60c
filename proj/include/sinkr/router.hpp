#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sinkr/attention.hpp"
#include "sinkr/calibration.hpp"
#include "sinkr/counters.hpp"
#include "sinkr/kv_cache.hpp"
#include "sinkr/parallel.hpp"

namespace sinkr {

struct RoutingConfig {
    double gamma = 0.65;
    ThresholdProfile profile;
    std::vector<std::size_t> excluded_layers{0, 1};
    // Test hook for fault injection: routes Sink on S_g == tau instead of
    // the strict-greater rule.
    bool sink_on_tie = false;

    static RoutingConfig from_profile(ThresholdProfile profile);
    bool layer_excluded(std::size_t layer) const;
};

struct RouteDecision {
    double group_score = 0.0;
    double threshold = 0.0;
    bool sink = false;
    bool degenerate = false;  // some query in the group had near-zero norm
    std::vector<double> head_scores;
};

struct ProxyScore {
    double value = 0.0;
    bool degenerate = false;
};

// cos(q, K0); exact cosine, invariant under positive scaling of q. A
// near-zero query norm yields score 0 with the degenerate flag set (the
// router then falls back to Active rather than crashing mid-decode).
ProxyScore proxy_score(std::span<const float> q, const GroupAnchor& anchor);

// Arithmetic mean of the r per-head scores.
double group_score(std::span<const double> head_scores, std::size_t group_width);

// tau = clamp(a x^3 + b x^2 + c x + d) at x = L / length_normalizer.
double threshold_for_length(std::size_t context_len, const ThresholdProfile& profile);

// Sink iff the layer is routable and S_g > tau(L); ties route Active.
RouteDecision route(std::size_t layer, double score, std::size_t context_len,
                    const RoutingConfig& config);

struct GroupStepInfo {
    std::size_t layer = 0;
    std::size_t kv_head = 0;
    RouteDecision decision;
    std::uint64_t kv_floats_loaded = 0;  // this group's historical traffic
};

struct LayerStepResult {
    std::vector<float> outputs;  // H_q x D, query-head order
    std::vector<GroupStepInfo> groups;
    LoadCounters counters;
};

struct EngineOptions {
    std::size_t num_splits = 0;  // 0 = derive from context length
    std::size_t block_size = kDefaultBlockSize;
    ThreadPool* pool = nullptr;
    // Score-collection mode: decisions are recorded but every group executes
    // full attention, so calibration populations are unbiased by skipping.
    bool observe_only = false;
};

std::size_t auto_num_splits(std::size_t context_len);

// One decode step for one layer: per KV group, read the anchor, score the
// proxy, and either emit the zero surrogate (Sink) or run split-K attention
// over the full cache (Active). Historical KV is only touched on the active
// path.
LayerStepResult routed_decode_step(std::span<const float> queries, std::size_t layer,
                                   const KvCache& cache, const RoutingConfig& config,
                                   const EngineOptions& options = {});

}  // namespace sinkr

#include "sinkr/router.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sinkr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr double kDegenerateQueryNorm = 1e-12;

}  // namespace

RoutingConfig RoutingConfig::from_profile(ThresholdProfile profile) {
    RoutingConfig config;
    config.gamma = profile.gamma;
    config.excluded_layers = profile.excluded_layers;
    config.profile = std::move(profile);
    return config;
}

bool RoutingConfig::layer_excluded(std::size_t layer) const {
    return std::find(excluded_layers.begin(), excluded_layers.end(), layer) !=
           excluded_layers.end();
}

ProxyScore proxy_score(std::span<const float> q, const GroupAnchor& anchor) {
    if (q.size() != anchor.k0.size())
        throw std::invalid_argument("query and anchor dimensions differ");
    double dot = 0.0, q_sq = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        dot += static_cast<double>(q[i]) * anchor.k0[i];
        q_sq += static_cast<double>(q[i]) * q[i];
    }
    const double q_norm = std::sqrt(q_sq);
    if (q_norm < kDegenerateQueryNorm) return {0.0, true};
    const double cos = dot / (q_norm * static_cast<double>(anchor.k0_norm));
    return {std::clamp(cos, -1.0, 1.0), false};
}

double group_score(std::span<const double> head_scores, std::size_t group_width) {
    if (head_scores.size() != group_width)
        throw std::invalid_argument("expected " + std::to_string(group_width) +
                                    " head scores, got " + std::to_string(head_scores.size()));
    double sum = 0.0;
    for (double s : head_scores) sum += s;
    return sum / static_cast<double>(group_width);
}

double threshold_for_length(std::size_t context_len, const ThresholdProfile& profile) {
    if (context_len == 0) throw std::invalid_argument("context length must be positive");
    const double x = static_cast<double>(context_len) / profile.length_normalizer;
    const auto& c = profile.coeffs;
    const double tau = ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
    return std::clamp(tau, profile.clamp_lo, profile.clamp_hi);
}

RouteDecision route(std::size_t layer, double score, std::size_t context_len,
                    const RoutingConfig& config) {
    RouteDecision d;
    d.group_score = score;
    d.threshold = threshold_for_length(context_len, config.profile);
    const bool over = config.sink_on_tie ? score >= d.threshold : score > d.threshold;
    d.sink = over && !config.layer_excluded(layer);
    return d;
}

std::size_t auto_num_splits(std::size_t context_len) {
    const std::size_t splits = (context_len + 8191) / 8192;
    return std::clamp<std::size_t>(splits, 1, 16);
}

LayerStepResult routed_decode_step(std::span<const float> queries, std::size_t layer,
                                   const KvCache& cache, const RoutingConfig& config,
                                   const EngineOptions& options) {
    const CacheConfig& cc = cache.config();
    if (layer >= cc.num_layers) throw std::out_of_range("layer index out of range");
    if (queries.size() != cc.num_q_heads * cc.head_dim)
        throw std::invalid_argument("queries span must be H_q x D for one layer");
    const std::size_t len = cache.token_count();
    if (len == 0) throw std::runtime_error("routed decode over an empty cache");

    const std::size_t r = cc.group_width();
    const std::size_t d = cc.head_dim;
    const std::size_t groups = cc.num_kv_heads;

    LayerStepResult result;
    result.outputs.assign(cc.num_q_heads * d, 0.0f);
    result.groups.resize(groups);

    // Routing: anchors only; historical rows stay untouched.
    const auto routing_start = Clock::now();
    std::vector<bool> run_attention(groups, false);
    for (std::size_t g = 0; g < groups; ++g) {
        const GroupAnchor& anchor = cache.anchor(layer, g, result.counters);
        std::vector<double> scores(r);
        bool degenerate = false;
        for (std::size_t i = 0; i < r; ++i) {
            const ProxyScore s =
                proxy_score(queries.subspan((g * r + i) * d, d), anchor);
            scores[i] = s.value;
            degenerate = degenerate || s.degenerate;
        }
        RouteDecision decision = route(layer, group_score(scores, r), len, config);
        if (degenerate) {
            decision.sink = false;  // fail-safe toward exact computation
            decision.degenerate = true;
        }
        decision.head_scores = std::move(scores);

        run_attention[g] = options.observe_only || !decision.sink;
        result.groups[g].layer = layer;
        result.groups[g].kv_head = g;
        result.groups[g].decision = std::move(decision);
    }
    result.counters.routing_seconds = seconds_since(routing_start);

    std::size_t splits = options.num_splits == 0 ? auto_num_splits(len) : options.num_splits;
    splits = std::clamp<std::size_t>(splits, 1, len);
    const auto ranges = split_ranges(len, splits);

    struct Task {
        std::size_t group;
        std::size_t chunk;
        std::size_t part_index;
    };
    std::vector<Task> tasks;
    std::vector<std::size_t> part_offset(groups, 0);
    std::size_t total_parts = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        if (!run_attention[g]) continue;
        part_offset[g] = total_parts;
        for (std::size_t c = 0; c < ranges.size(); ++c)
            tasks.push_back({g, c, total_parts + c});
        total_parts += ranges.size();
    }

    // Chunk execution: workers own their partial and counters.
    const auto attention_start = Clock::now();
    std::vector<SplitPartial> parts(total_parts);
    std::vector<LoadCounters> task_counters(total_parts);
    auto run_task = [&](std::size_t t) {
        const Task& task = tasks[t];
        const auto [from, to] = ranges[task.chunk];
        const KvView view =
            cache.historical(layer, task.group, from, to, task_counters[task.part_index]);
        const QueryGroup qg =
            QueryGroup::over(queries.subspan(task.group * r * d, r * d), r, d);
        parts[task.part_index] = attend_chunk(qg, view.k, view.v, view.rows,
                                              options.block_size);
    };
    if (options.pool != nullptr && tasks.size() > 1) {
        options.pool->parallel_for(tasks.size(), run_task);
    } else {
        for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
    }
    result.counters.attention_seconds = seconds_since(attention_start);

    // Merge per group; sink groups keep their zero surrogate rows.
    const auto merge_start = Clock::now();
    for (std::size_t g = 0; g < groups; ++g) {
        GroupStepInfo& info = result.groups[g];
        if (!run_attention[g]) {
            ++result.counters.groups_skipped;
            continue;
        }
        ++result.counters.groups_active;
        const std::span<const SplitPartial> group_parts(parts.data() + part_offset[g],
                                                        ranges.size());
        const std::vector<float> merged = merge_partials(group_parts, r, d);
        std::copy(merged.begin(), merged.end(), result.outputs.begin() + g * r * d);
        for (std::size_t c = 0; c < ranges.size(); ++c)
            info.kv_floats_loaded += task_counters[part_offset[g] + c].kv_floats_loaded;
    }
    result.counters.merge_seconds = seconds_since(merge_start);

    for (const auto& tc : task_counters) result.counters.kv_floats_loaded += tc.kv_floats_loaded;
    return result;
}

}  // namespace sinkr

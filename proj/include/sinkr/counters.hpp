#pragma once

#include <cstdint>

namespace sinkr {

// KV-traffic and phase-timing instrumentation. Counters are owned per worker
// (or per task) and merged once at the end of a step.
struct LoadCounters {
    std::uint64_t kv_floats_loaded = 0;      // historical K/V floats touched
    std::uint64_t anchor_floats_loaded = 0;  // anchor key floats touched
    std::uint64_t groups_active = 0;
    std::uint64_t groups_skipped = 0;
    double routing_seconds = 0.0;
    double attention_seconds = 0.0;
    double merge_seconds = 0.0;

    LoadCounters& operator+=(const LoadCounters& o) {
        kv_floats_loaded += o.kv_floats_loaded;
        anchor_floats_loaded += o.anchor_floats_loaded;
        groups_active += o.groups_active;
        groups_skipped += o.groups_skipped;
        routing_seconds += o.routing_seconds;
        attention_seconds += o.attention_seconds;
        merge_seconds += o.merge_seconds;
        return *this;
    }
};

}  // namespace sinkr

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "sinkr/counters.hpp"

namespace sinkr {

struct CacheConfig {
    std::size_t num_layers = 0;
    std::size_t num_q_heads = 0;   // H_q
    std::size_t num_kv_heads = 0;  // H_kv
    std::size_t head_dim = 0;      // D
    std::size_t capacity = 0;      // L_max, tokens per (layer, kv_head)

    // r = H_q / H_kv, query heads sharing one KV head
    std::size_t group_width() const { return num_q_heads / num_kv_heads; }
    void validate() const;
};

// First cached token's key per (layer, kv_head), captured at the first
// append. The cosine proxy divides by k0_norm, so zero-norm anchors are
// rejected up front.
struct GroupAnchor {
    std::vector<float> k0;
    float k0_norm = 0.0f;
};

struct KvView {
    std::span<const float> k;  // rows x dim, row-major
    std::span<const float> v;
    std::size_t rows = 0;
    std::size_t dim = 0;
};

// Grouped-query KV cache: contiguous K/V history per (layer, kv_head) plus
// the initial-token anchor. Storage is preallocated to capacity, so views
// stay valid across appends. Reads are instrumented through LoadCounters.
class KvCache {
public:
    explicit KvCache(CacheConfig config);

    const CacheConfig& config() const { return config_; }

    void append(std::size_t layer, std::size_t kv_head,
                std::span<const float> k, std::span<const float> v);

    std::size_t length(std::size_t layer, std::size_t kv_head) const;

    // Common length across all (layer, kv_head) slots; throws if ragged.
    std::size_t token_count() const;

    // Reads anchor metadata only; never touches historical rows.
    const GroupAnchor& anchor(std::size_t layer, std::size_t kv_head,
                              LoadCounters& counters) const;

    // Zero-copy views over rows [from, to). Counts (to-from)*D floats per
    // matrix into `counters`.
    KvView historical(std::size_t layer, std::size_t kv_head,
                      std::size_t from, std::size_t to,
                      LoadCounters& counters) const;

    // Snapshot: per-slot K/V SNKT tensors plus a JSON manifest.
    void save_snapshot(const std::filesystem::path& dir) const;
    static KvCache load_snapshot(const std::filesystem::path& dir);

private:
    std::size_t slot(std::size_t layer, std::size_t kv_head) const;
    std::size_t checked_slot(std::size_t layer, std::size_t kv_head) const;

    CacheConfig config_;
    std::size_t slot_stride_ = 0;  // capacity * head_dim
    std::vector<float> k_store_;
    std::vector<float> v_store_;
    std::vector<GroupAnchor> anchors_;
    std::vector<std::size_t> len_;
};

}  // namespace sinkr

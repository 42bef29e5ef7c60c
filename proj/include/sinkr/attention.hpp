#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sinkr/counters.hpp"
#include "sinkr/parallel.hpp"

namespace sinkr {

// One decode-step query tile: the r query heads that share a KV head.
// q is heads x dim row-major; scale is the logit scale (1/sqrt(dim)).
struct QueryGroup {
    std::span<const float> q;
    std::size_t heads = 0;
    std::size_t dim = 0;
    float scale = 0.0f;

    static QueryGroup over(std::span<const float> q, std::size_t heads, std::size_t dim);
};

// Running online-softmax state for one KV chunk: per-head max m, normalizer
// l, and the weighted value accumulator. tokens == 0 marks an empty chunk,
// which merge skips. State is kept in f64; tensor data stays f32.
struct SplitPartial {
    std::vector<double> m;    // heads
    std::vector<double> l;    // heads
    std::vector<double> acc;  // heads x dim
    std::size_t tokens = 0;

    bool empty() const { return tokens == 0; }
};

constexpr std::size_t kDefaultBlockSize = 128;

// Two-pass exact-softmax reference: out row g = softmax(scale * q_g K^T) V.
std::vector<float> dense_attention(const QueryGroup& qg,
                                   std::span<const float> keys,
                                   std::span<const float> values,
                                   std::size_t len);

// Softmax probability rows, heads x len.
std::vector<float> attention_weights(const QueryGroup& qg,
                                     std::span<const float> keys,
                                     std::size_t len);

// Single-pass online softmax visiting KV in contiguous blocks.
std::vector<float> online_attention(const QueryGroup& qg,
                                    std::span<const float> keys,
                                    std::span<const float> values,
                                    std::size_t len,
                                    std::size_t block_size = kDefaultBlockSize);

// Online-softmax state over one contiguous KV chunk.
SplitPartial attend_chunk(const QueryGroup& qg,
                          std::span<const float> keys,
                          std::span<const float> values,
                          std::size_t len,
                          std::size_t block_size = kDefaultBlockSize);

// Log-sum-exp combine of per-chunk states. Throws if every partial is empty.
std::vector<float> merge_partials(std::span<const SplitPartial> parts,
                                  std::size_t heads, std::size_t dim);

// Even-remainder chunking: the first len % num_splits chunks get one extra
// token. Returns [from, to) pairs covering [0, len).
std::vector<std::pair<std::size_t, std::size_t>> split_ranges(std::size_t len,
                                                              std::size_t num_splits);

struct SplitkResult {
    std::vector<float> out;  // heads x dim
    LoadCounters counters;
};

// Chunked split-K execution: each chunk builds a SplitPartial (in parallel
// when a pool is given), then one merge joins them. Counts 2 * len * dim
// kv floats for the fully-attended group.
SplitkResult splitk_attention(const QueryGroup& qg,
                              std::span<const float> keys,
                              std::span<const float> values,
                              std::size_t len,
                              std::size_t num_splits,
                              ThreadPool* pool = nullptr,
                              std::size_t block_size = kDefaultBlockSize);

}  // namespace sinkr

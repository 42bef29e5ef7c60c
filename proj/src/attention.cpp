#include "sinkr/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sinkr {

namespace {

void check_shapes(const QueryGroup& qg, std::span<const float> keys,
                  std::span<const float> values, std::size_t len, bool with_values) {
    if (qg.heads == 0 || qg.dim == 0) throw std::invalid_argument("empty query group");
    if (qg.q.size() != qg.heads * qg.dim)
        throw std::invalid_argument("query span size does not match heads x dim");
    if (len == 0) throw std::invalid_argument("attention needs at least one token");
    if (keys.size() != len * qg.dim)
        throw std::invalid_argument("key span size does not match len x dim");
    if (with_values && values.size() != len * qg.dim)
        throw std::invalid_argument("value span size does not match len x dim");
}

double dot(const float* a, const float* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

}  // namespace

QueryGroup QueryGroup::over(std::span<const float> q, std::size_t heads, std::size_t dim) {
    QueryGroup qg{q, heads, dim, 0.0f};
    if (dim == 0) throw std::invalid_argument("head_dim must be positive");
    qg.scale = 1.0f / std::sqrt(static_cast<float>(dim));
    if (q.size() != heads * dim)
        throw std::invalid_argument("query span size does not match heads x dim");
    return qg;
}

std::vector<float> dense_attention(const QueryGroup& qg,
                                   std::span<const float> keys,
                                   std::span<const float> values,
                                   std::size_t len) {
    check_shapes(qg, keys, values, len, true);
    const std::size_t d = qg.dim;
    std::vector<float> out(qg.heads * d, 0.0f);
    std::vector<double> logits(len);
    std::vector<double> row(d);

    for (std::size_t g = 0; g < qg.heads; ++g) {
        const float* q = qg.q.data() + g * d;
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < len; ++i) {
            logits[i] = qg.scale * dot(q, keys.data() + i * d, d);
            max_logit = std::max(max_logit, logits[i]);
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            logits[i] = std::exp(logits[i] - max_logit);
            denom += logits[i];
        }
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t i = 0; i < len; ++i) {
            const double w = logits[i] / denom;
            const float* v = values.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) row[j] += w * v[j];
        }
        for (std::size_t j = 0; j < d; ++j) out[g * d + j] = static_cast<float>(row[j]);
    }
    return out;
}

std::vector<float> attention_weights(const QueryGroup& qg,
                                     std::span<const float> keys,
                                     std::size_t len) {
    check_shapes(qg, keys, {}, len, false);
    const std::size_t d = qg.dim;
    std::vector<float> out(qg.heads * len);
    std::vector<double> logits(len);

    for (std::size_t g = 0; g < qg.heads; ++g) {
        const float* q = qg.q.data() + g * d;
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < len; ++i) {
            logits[i] = qg.scale * dot(q, keys.data() + i * d, d);
            max_logit = std::max(max_logit, logits[i]);
        }
        double denom = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            logits[i] = std::exp(logits[i] - max_logit);
            denom += logits[i];
        }
        for (std::size_t i = 0; i < len; ++i)
            out[g * len + i] = static_cast<float>(logits[i] / denom);
    }
    return out;
}

SplitPartial attend_chunk(const QueryGroup& qg,
                          std::span<const float> keys,
                          std::span<const float> values,
                          std::size_t len,
                          std::size_t block_size) {
    check_shapes(qg, keys, values, len, true);
    if (block_size == 0) throw std::invalid_argument("block_size must be positive");

    const std::size_t d = qg.dim;
    SplitPartial part;
    part.m.assign(qg.heads, -std::numeric_limits<double>::infinity());
    part.l.assign(qg.heads, 0.0);
    part.acc.assign(qg.heads * d, 0.0);
    part.tokens = len;

    std::vector<double> z(std::min(block_size, len));

    for (std::size_t b0 = 0; b0 < len; b0 += block_size) {
        const std::size_t b1 = std::min(b0 + block_size, len);
        for (std::size_t g = 0; g < qg.heads; ++g) {
            const float* q = qg.q.data() + g * d;
            double block_max = -std::numeric_limits<double>::infinity();
            for (std::size_t i = b0; i < b1; ++i) {
                z[i - b0] = qg.scale * dot(q, keys.data() + i * d, d);
                block_max = std::max(block_max, z[i - b0]);
            }
            const double new_m = std::max(part.m[g], block_max);
            const double rescale = std::exp(part.m[g] - new_m);  // 0 on first block
            part.l[g] *= rescale;
            double* acc = part.acc.data() + g * d;
            for (std::size_t j = 0; j < d; ++j) acc[j] *= rescale;
            for (std::size_t i = b0; i < b1; ++i) {
                const double p = std::exp(z[i - b0] - new_m);
                part.l[g] += p;
                const float* v = values.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) acc[j] += p * v[j];
            }
            part.m[g] = new_m;
        }
    }
    return part;
}

std::vector<float> online_attention(const QueryGroup& qg,
                                    std::span<const float> keys,
                                    std::span<const float> values,
                                    std::size_t len,
                                    std::size_t block_size) {
    const SplitPartial part = attend_chunk(qg, keys, values, len, block_size);
    std::vector<float> out(qg.heads * qg.dim);
    for (std::size_t g = 0; g < qg.heads; ++g) {
        const double* acc = part.acc.data() + g * qg.dim;
        for (std::size_t j = 0; j < qg.dim; ++j)
            out[g * qg.dim + j] = static_cast<float>(acc[j] / part.l[g]);
    }
    return out;
}

std::vector<float> merge_partials(std::span<const SplitPartial> parts,
                                  std::size_t heads, std::size_t dim) {
    std::vector<const SplitPartial*> live;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        if (p.m.size() != heads || p.l.size() != heads || p.acc.size() != heads * dim)
            throw std::invalid_argument("partial shape does not match heads x dim");
        live.push_back(&p);
    }
    if (live.empty()) throw std::invalid_argument("merge needs at least one non-empty partial");

    std::vector<float> out(heads * dim);
    for (std::size_t g = 0; g < heads; ++g) {
        double m_star = -std::numeric_limits<double>::infinity();
        for (const auto* p : live) m_star = std::max(m_star, p->m[g]);
        double l_star = 0.0;
        for (const auto* p : live) l_star += p->l[g] * std::exp(p->m[g] - m_star);
        for (std::size_t j = 0; j < dim; ++j) {
            double s = 0.0;
            for (const auto* p : live) s += p->acc[g * dim + j] * std::exp(p->m[g] - m_star);
            out[g * dim + j] = static_cast<float>(s / l_star);
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> split_ranges(std::size_t len,
                                                              std::size_t num_splits) {
    if (num_splits == 0 || num_splits > len)
        throw std::invalid_argument("num_splits must be in [1, len], got " +
                                    std::to_string(num_splits) + " for len " +
                                    std::to_string(len));
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    ranges.reserve(num_splits);
    const std::size_t base = len / num_splits;
    const std::size_t rem = len % num_splits;
    std::size_t start = 0;
    for (std::size_t c = 0; c < num_splits; ++c) {
        const std::size_t sz = base + (c < rem ? 1 : 0);
        ranges.emplace_back(start, start + sz);
        start += sz;
    }
    return ranges;
}

SplitkResult splitk_attention(const QueryGroup& qg,
                              std::span<const float> keys,
                              std::span<const float> values,
                              std::size_t len,
                              std::size_t num_splits,
                              ThreadPool* pool,
                              std::size_t block_size) {
    check_shapes(qg, keys, values, len, true);
    const auto ranges = split_ranges(len, num_splits);
    const std::size_t d = qg.dim;

    std::vector<SplitPartial> parts(ranges.size());
    std::vector<LoadCounters> chunk_counters(ranges.size());
    auto run_chunk = [&](std::size_t c) {
        const auto [from, to] = ranges[c];
        chunk_counters[c].kv_floats_loaded += 2 * (to - from) * d;
        parts[c] = attend_chunk(qg,
                                keys.subspan(from * d, (to - from) * d),
                                values.subspan(from * d, (to - from) * d),
                                to - from, block_size);
    };
    if (pool != nullptr && ranges.size() > 1) {
        pool->parallel_for(ranges.size(), run_chunk);
    } else {
        for (std::size_t c = 0; c < ranges.size(); ++c) run_chunk(c);
    }

    SplitkResult result;
    result.out = merge_partials(parts, qg.heads, d);
    for (const auto& c : chunk_counters) result.counters += c;
    return result;
}

}  // namespace sinkr

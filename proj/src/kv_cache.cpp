#include "sinkr/kv_cache.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "sinkr/tensor.hpp"

#include "json.hpp"

namespace sinkr {

namespace {

constexpr double kDegenerateNorm = 1e-12;

double l2_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

std::string slot_file(const char* prefix, std::size_t layer, std::size_t head) {
    return std::string(prefix) + "_l" + std::to_string(layer) + "_h" + std::to_string(head) +
           ".snkt";
}

}  // namespace

void CacheConfig::validate() const {
    if (num_layers == 0) throw std::invalid_argument("num_layers must be positive");
    if (num_kv_heads == 0) throw std::invalid_argument("num_kv_heads must be positive");
    if (num_q_heads == 0 || num_q_heads % num_kv_heads != 0)
        throw std::invalid_argument("num_q_heads must be a positive multiple of num_kv_heads");
    if (head_dim == 0) throw std::invalid_argument("head_dim must be positive");
    if (capacity == 0) throw std::invalid_argument("capacity must be positive");
}

KvCache::KvCache(CacheConfig config) : config_(config) {
    config_.validate();
    slot_stride_ = config_.capacity * config_.head_dim;
    const std::size_t slots = config_.num_layers * config_.num_kv_heads;
    k_store_.assign(slots * slot_stride_, 0.0f);
    v_store_.assign(slots * slot_stride_, 0.0f);
    anchors_.resize(slots);
    len_.assign(slots, 0);
}

std::size_t KvCache::slot(std::size_t layer, std::size_t kv_head) const {
    return layer * config_.num_kv_heads + kv_head;
}

std::size_t KvCache::checked_slot(std::size_t layer, std::size_t kv_head) const {
    if (layer >= config_.num_layers) throw std::out_of_range("layer index out of range");
    if (kv_head >= config_.num_kv_heads) throw std::out_of_range("kv_head index out of range");
    return slot(layer, kv_head);
}

void KvCache::append(std::size_t layer, std::size_t kv_head,
                     std::span<const float> k, std::span<const float> v) {
    const std::size_t s = checked_slot(layer, kv_head);
    const std::size_t d = config_.head_dim;
    if (k.size() != d || v.size() != d)
        throw std::invalid_argument("k/v row size does not match head_dim");
    if (len_[s] >= config_.capacity)
        throw std::runtime_error("kv cache overflow: slot at capacity " +
                                 std::to_string(config_.capacity));

    if (len_[s] == 0) {
        const double norm = l2_norm(k);
        if (norm < kDegenerateNorm)
            throw std::runtime_error("degenerate anchor: first-token key norm below 1e-12");
        anchors_[s].k0.assign(k.begin(), k.end());
        anchors_[s].k0_norm = static_cast<float>(norm);
    }

    float* krow = k_store_.data() + s * slot_stride_ + len_[s] * d;
    float* vrow = v_store_.data() + s * slot_stride_ + len_[s] * d;
    std::memcpy(krow, k.data(), d * sizeof(float));
    std::memcpy(vrow, v.data(), d * sizeof(float));
    ++len_[s];
}

std::size_t KvCache::length(std::size_t layer, std::size_t kv_head) const {
    return len_[checked_slot(layer, kv_head)];
}

std::size_t KvCache::token_count() const {
    const std::size_t n = len_[0];
    for (std::size_t l : len_) {
        if (l != n) throw std::logic_error("kv cache lengths are ragged across slots");
    }
    return n;
}

const GroupAnchor& KvCache::anchor(std::size_t layer, std::size_t kv_head,
                                   LoadCounters& counters) const {
    const std::size_t s = checked_slot(layer, kv_head);
    if (len_[s] == 0) throw std::runtime_error("anchor requested from empty cache slot");
    counters.anchor_floats_loaded += config_.head_dim;
    return anchors_[s];
}

KvView KvCache::historical(std::size_t layer, std::size_t kv_head,
                           std::size_t from, std::size_t to,
                           LoadCounters& counters) const {
    const std::size_t s = checked_slot(layer, kv_head);
    if (from > to || to > len_[s])
        throw std::out_of_range("historical range [" + std::to_string(from) + ", " +
                                std::to_string(to) + ") exceeds length " +
                                std::to_string(len_[s]));
    const std::size_t d = config_.head_dim;
    const std::size_t rows = to - from;
    counters.kv_floats_loaded += 2 * rows * d;
    const float* kbase = k_store_.data() + s * slot_stride_ + from * d;
    const float* vbase = v_store_.data() + s * slot_stride_ + from * d;
    return KvView{std::span<const float>(kbase, rows * d),
                  std::span<const float>(vbase, rows * d), rows, d};
}

void KvCache::save_snapshot(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const std::size_t len = token_count();

    nlohmann::ordered_json manifest;
    manifest["version"] = 1;
    manifest["config"] = {{"num_layers", config_.num_layers},
                          {"num_q_heads", config_.num_q_heads},
                          {"num_kv_heads", config_.num_kv_heads},
                          {"head_dim", config_.head_dim},
                          {"capacity", config_.capacity}};
    manifest["length"] = len;

    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        for (std::size_t h = 0; h < config_.num_kv_heads; ++h) {
            const std::size_t s = slot(l, h);
            Tensor kt, vt;
            kt.dims = {len, config_.head_dim};
            vt.dims = {len, config_.head_dim};
            const float* kbase = k_store_.data() + s * slot_stride_;
            const float* vbase = v_store_.data() + s * slot_stride_;
            kt.data.assign(kbase, kbase + len * config_.head_dim);
            vt.data.assign(vbase, vbase + len * config_.head_dim);
            write_tensor(dir / slot_file("k", l, h), kt);
            write_tensor(dir / slot_file("v", l, h), vt);
        }
    }

    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write snapshot manifest");
    out << manifest.dump(2) << "\n";
}

KvCache KvCache::load_snapshot(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("cannot open snapshot manifest in '" + dir.string() + "'");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("snapshot manifest parse error: ") + e.what());
    }

    const auto& jc = manifest.at("config");
    CacheConfig config{jc.at("num_layers").get<std::size_t>(),
                       jc.at("num_q_heads").get<std::size_t>(),
                       jc.at("num_kv_heads").get<std::size_t>(),
                       jc.at("head_dim").get<std::size_t>(),
                       jc.at("capacity").get<std::size_t>()};
    const std::size_t len = manifest.at("length").get<std::size_t>();

    KvCache cache(config);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        for (std::size_t h = 0; h < config.num_kv_heads; ++h) {
            const Tensor kt = read_tensor(dir / slot_file("k", l, h));
            const Tensor vt = read_tensor(dir / slot_file("v", l, h));
            if (kt.dims != std::vector<std::uint64_t>{len, config.head_dim} ||
                vt.dims != std::vector<std::uint64_t>{len, config.head_dim})
                throw std::runtime_error("snapshot tensor shape does not match manifest");
            for (std::size_t t = 0; t < len; ++t) {
                const std::size_t off = t * config.head_dim;
                cache.append(l, h,
                             std::span<const float>(kt.data.data() + off, config.head_dim),
                             std::span<const float>(vt.data.data() + off, config.head_dim));
            }
        }
    }
    return cache;
}

}  // namespace sinkr

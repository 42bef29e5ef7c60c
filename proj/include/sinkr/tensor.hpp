#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace sinkr {

// splitmix64, used to expand a single u64 seed into generator state.
struct SplitMix64 {
    std::uint64_t state;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

// xoshiro256** seeded via splitmix64. Normal variates come from the
// Box-Muller transform so streams are identical on every platform.
class Xoshiro256ss {
public:
    explicit Xoshiro256ss(std::uint64_t seed) {
        SplitMix64 sm{seed};
        for (auto& w : state_) w = sm.next();
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    float uniform01() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }
    double uniform01d() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    float normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const auto [z0, z1] = normal_pair();
        spare_ = z1;
        has_spare_ = true;
        return z0;
    }

    std::pair<float, float> normal_pair() {
        const double u1 = 1.0 - uniform01d();  // (0, 1], keeps log finite
        const double u2 = uniform01d();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        return {static_cast<float>(r * std::cos(theta)),
                static_cast<float>(r * std::sin(theta))};
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    float spare_ = 0.0f;
    bool has_spare_ = false;
};

// Deterministic stream splitting: hash the base seed with a tag sequence.
std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

enum class Dist { Uniform01, StandardNormal };

// Dense row-major f32 tensor; the carrier for Q/K/V data and file dumps.
struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::uint64_t numel() const;
    static Tensor zeros(std::vector<std::uint64_t> dims);
};

std::uint64_t element_count(std::span<const std::uint64_t> dims);

// SNKT file format, little-endian:
//   "SNKT" | u32 version=1 | u32 dtype=1 (f32) | u32 ndim | ndim x u64 dims |
//   row-major f32 payload. No padding, no checksum.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// Expected file size for a given shape; handy for format checks.
std::uint64_t snkt_file_size(std::span<const std::uint64_t> dims);

Tensor random_tensor(std::vector<std::uint64_t> dims, std::uint64_t seed, Dist dist);

}  // namespace sinkr

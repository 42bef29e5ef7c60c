#include "sinkr/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace sinkr {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'N', 'K', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 1;
constexpr std::uint32_t kMaxNdim = 64;

static_assert(std::endian::native == std::endian::little,
              "SNKT I/O assumes a little-endian host");

[[noreturn]] void parse_error(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("SNKT parse error in '" + path.string() + "': " + what);
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

bool read_u32(std::ifstream& in, std::uint32_t& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return in.gcount() == sizeof(v);
}

bool read_u64(std::ifstream& in, std::uint64_t& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return in.gcount() == sizeof(v);
}

void validate_dims(std::span<const std::uint64_t> dims) {
    if (dims.empty()) throw std::invalid_argument("tensor needs at least one dimension");
    for (auto d : dims) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
    }
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    SplitMix64 sm{seed};
    std::uint64_t h = sm.next();
    for (auto t : tags) {
        SplitMix64 inner{h ^ (t + 0x9E3779B97F4A7C15ull)};
        h = inner.next();
    }
    return h;
}

std::uint64_t element_count(std::span<const std::uint64_t> dims) {
    std::uint64_t n = 1;
    for (auto d : dims) {
        if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
            throw std::invalid_argument("tensor element count overflows u64");
        n *= d;
    }
    return n;
}

std::uint64_t Tensor::numel() const { return element_count(dims); }

Tensor Tensor::zeros(std::vector<std::uint64_t> dims) {
    validate_dims(dims);
    Tensor t;
    t.data.assign(element_count(dims), 0.0f);
    t.dims = std::move(dims);
    return t;
}

std::uint64_t snkt_file_size(std::span<const std::uint64_t> dims) {
    return 4 + 4 + 4 + 4 + 8 * dims.size() + 4 * element_count(dims);
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    validate_dims(t.dims);
    if (t.data.size() != element_count(t.dims))
        throw std::invalid_argument("tensor data length does not match dims");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

    out.write(kMagic.data(), kMagic.size());
    write_u32(out, kVersion);
    write_u32(out, kDtypeF32);
    write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) write_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");

    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic)
        parse_error(path, "bad magic");

    std::uint32_t version = 0, dtype = 0, ndim = 0;
    if (!read_u32(in, version)) parse_error(path, "truncated header (version)");
    if (version != kVersion)
        parse_error(path, "unsupported version " + std::to_string(version));
    if (!read_u32(in, dtype)) parse_error(path, "truncated header (dtype)");
    if (dtype != kDtypeF32) parse_error(path, "unsupported dtype " + std::to_string(dtype));
    if (!read_u32(in, ndim)) parse_error(path, "truncated header (ndim)");
    if (ndim == 0 || ndim > kMaxNdim) parse_error(path, "bad ndim " + std::to_string(ndim));

    Tensor t;
    t.dims.resize(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) {
        if (!read_u64(in, t.dims[i])) parse_error(path, "truncated dims");
        if (t.dims[i] == 0) parse_error(path, "zero dim " + std::to_string(i));
    }

    const std::uint64_t n = element_count(t.dims);
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
        parse_error(path, "short payload");
    if (in.peek() != std::ifstream::traits_type::eof()) parse_error(path, "trailing bytes");
    return t;
}

Tensor random_tensor(std::vector<std::uint64_t> dims, std::uint64_t seed, Dist dist) {
    validate_dims(dims);
    const std::uint64_t n = element_count(dims);
    Tensor t;
    t.dims = std::move(dims);
    t.data.resize(n);

    Xoshiro256ss rng(seed);
    if (dist == Dist::Uniform01) {
        for (auto& x : t.data) x = rng.uniform01();
    } else {
        std::uint64_t i = 0;
        for (; i + 1 < n; i += 2) {
            const auto [z0, z1] = rng.normal_pair();
            t.data[i] = z0;
            t.data[i + 1] = z1;
        }
        if (i < n) t.data[i] = rng.normal_pair().first;
    }
    return t;
}

}  // namespace sinkr

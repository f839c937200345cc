#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "vgot/error.hpp"
#include "vgot/latent.hpp"

namespace vgot {

/// Dense float32 tensor with row-major storage.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline constexpr std::array<char, 4> kTensorMagic = {'V', 'G', 'O', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kMaxTensorRank = 8;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

} // namespace detail

/// "VGOT", version, rank, rank × u32 LE dims, then f32 LE payload.
inline std::string encode_tensor(const Tensor& t) {
    if (t.dims.size() > kMaxTensorRank) {
        throw ShapeError("tensor rank " + std::to_string(t.dims.size()) + " exceeds " + std::to_string(kMaxTensorRank));
    }
    if (t.element_count() != t.data.size()) {
        throw ShapeError("tensor has " + std::to_string(t.data.size()) + " values for " +
                         std::to_string(t.element_count()) + " elements");
    }
    std::string out(kTensorMagic.begin(), kTensorMagic.end());
    out.push_back(static_cast<char>(kTensorVersion));
    out.push_back(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(out, d);
    out.reserve(out.size() + 4 * t.data.size());
    for (float f : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

inline Tensor decode_tensor(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 6) throw LengthError("tensor file truncated in header (" + std::to_string(bytes.size()) + " bytes)");
    if (std::memcmp(p, kTensorMagic.data(), 4) != 0) throw FormatError("tensor file has bad magic");
    if (p[4] != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(p[4]));
    const std::size_t rank = p[5];
    if (rank > kMaxTensorRank) throw FormatError("tensor rank " + std::to_string(rank) + " exceeds 8");
    const std::size_t header = 6 + 4 * rank;
    if (bytes.size() < header) throw LengthError("tensor file truncated in dims");
    Tensor t;
    for (std::size_t i = 0; i < rank; ++i) t.dims.push_back(detail::get_u32(p + 6 + 4 * i));
    const std::size_t n = t.element_count();
    const std::size_t payload = bytes.size() - header;
    if (payload < 4 * n) {
        throw LengthError("tensor payload truncated: " + std::to_string(payload) + " of " + std::to_string(4 * n) +
                          " bytes");
    }
    if (payload > 4 * n) throw LengthError("tensor file has " + std::to_string(payload - 4 * n) + " trailing bytes");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(detail::get_u32(p + header + 4 * i));
    return t;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_tensor_file(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

inline Tensor read_tensor_file(const std::filesystem::path& path) {
    try {
        return decode_tensor(read_file(path));
    } catch (const Error&) {
        detail::rethrow_with_prefix(path.string() + ": ");
    }
}

inline Tensor frames_to_tensor(const std::vector<FrameLatent>& frames) {
    if (frames.empty()) throw InputError("frames_to_tensor: no frames");
    const LatentShape s = frames.front().shape();
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(frames.size()), static_cast<std::uint32_t>(s.h),
              static_cast<std::uint32_t>(s.w), static_cast<std::uint32_t>(s.d)};
    t.data.reserve(frames.size() * s.size());
    for (const auto& f : frames) {
        if (f.shape() != s) throw ShapeError("frames_to_tensor: mixed frame shapes");
        for (double v : f.values()) t.data.push_back(static_cast<float>(v));
    }
    return t;
}

inline Tensor latent_to_tensor(const FrameLatent& x) {
    Tensor t = frames_to_tensor({x});
    t.dims.erase(t.dims.begin());
    return t;
}

inline std::vector<FrameLatent> tensor_to_frames(const Tensor& t) {
    if (t.dims.size() != 4) throw ShapeError("expected a [F,h,w,d] tensor, got rank " + std::to_string(t.dims.size()));
    const LatentShape s{t.dims[1], t.dims[2], t.dims[3]};
    std::vector<FrameLatent> out;
    out.reserve(t.dims[0]);
    for (std::size_t f = 0; f < t.dims[0]; ++f) {
        std::vector<double> v(t.data.begin() + static_cast<std::ptrdiff_t>(f * s.size()),
                              t.data.begin() + static_cast<std::ptrdiff_t>((f + 1) * s.size()));
        out.emplace_back(s, std::move(v));
    }
    return out;
}

inline FrameLatent tensor_to_latent(const Tensor& t) {
    if (t.dims.size() != 3) throw ShapeError("expected a [h,w,d] tensor, got rank " + std::to_string(t.dims.size()));
    const LatentShape s{t.dims[0], t.dims[1], t.dims[2]};
    return FrameLatent(s, std::vector<double>(t.data.begin(), t.data.end()));
}

} // namespace vgot

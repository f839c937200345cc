#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vgot/error.hpp"
#include "vgot/random.hpp"

namespace vgot {

struct LatentShape {
    std::size_t h = 8;
    std::size_t w = 8;
    std::size_t d = 8;

    constexpr std::size_t size() const noexcept { return h * w * d; }
    constexpr std::size_t pixels() const noexcept { return h * w; }
    friend constexpr bool operator==(const LatentShape&, const LatentShape&) = default;

    std::string str() const {
        return "(" + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(d) + ")";
    }
};

/// A per-frame latent of shape (h, w, d), stored row-major with channels last.
class FrameLatent {
public:
    FrameLatent() = default;

    explicit FrameLatent(LatentShape shape, double fill = 0.0)
        : shape_(shape), data_(shape.size(), fill) {
        if (shape.size() == 0) throw ShapeError("latent shape must be positive, got " + shape.str());
    }

    FrameLatent(LatentShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (shape.size() == 0) throw ShapeError("latent shape must be positive, got " + shape.str());
        if (data_.size() != shape.size()) {
            throw ShapeError("latent data has " + std::to_string(data_.size()) + " values, shape " +
                             shape.str() + " needs " + std::to_string(shape.size()));
        }
    }

    const LatentShape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t y, std::size_t x, std::size_t c) noexcept {
        return data_[(y * shape_.w + x) * shape_.d + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c) const noexcept {
        return data_[(y * shape_.w + x) * shape_.d + c];
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const FrameLatent&, const FrameLatent&) = default;

private:
    LatentShape shape_{};
    std::vector<double> data_;
};

/// Decoded frames share the latent representation in the toy backend.
using Frame = FrameLatent;

inline void require_same_shape(const FrameLatent& a, const FrameLatent& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

/// i.i.d. N(0, 1) latent from `seed`.
inline FrameLatent gaussian_latent(LatentShape shape, std::uint64_t seed) {
    FrameLatent out(shape);
    GaussianStream(seed).fill(out.values());
    return out;
}

/// Rounds every entry through float32, matching what the tensor file stores.
inline FrameLatent quantize_to_float(const FrameLatent& x) {
    FrameLatent out = x;
    for (auto& v : out.values()) v = static_cast<double>(static_cast<float>(v));
    return out;
}

} // namespace vgot

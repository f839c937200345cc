#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vgot/error.hpp"
#include "vgot/latent.hpp"
#include "vgot/random.hpp"

namespace vgot {

enum class EmbeddingKind { text, image };

struct Embedding {
    std::vector<double> values;
    EmbeddingKind kind = EmbeddingKind::text;
    /// Prompt hash or keyframe id the embedding was computed from.
    std::string source;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Everything a denoiser call sees besides the latent and the step.
struct Condition {
    Embedding text;
    std::optional<Embedding> ip;
    double ip_scale = 0.0;

    friend bool operator==(const Condition&, const Condition&) = default;
};

inline Condition make_condition(Embedding text, std::optional<Embedding> ip = std::nullopt,
                                double ip_scale = 0.0) {
    if (!(ip_scale >= 0.0) || !std::isfinite(ip_scale)) {
        throw ConfigError("ip_scale must be a finite non-negative number, got " + std::to_string(ip_scale));
    }
    if (text.kind != EmbeddingKind::text) throw InputError("condition text embedding must have kind=text");
    if (ip && ip->kind != EmbeddingKind::image) throw InputError("condition ip embedding must have kind=image");
    if (!ip) ip_scale = 0.0;
    return Condition{std::move(text), std::move(ip), ip_scale};
}

// ---------------------------------------------------------------------------
// Vector helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Cosine similarity; defined as 0 when either vector has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

/// Unit-norm copy of `v`; the zero vector maps to the first basis vector.
inline std::vector<double> normalized_or_basis(std::vector<double> v) {
    const double n = norm2(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
        std::fill(v.begin(), v.end(), 0.0);
        if (!v.empty()) v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= n;
    return v;
}

// ---------------------------------------------------------------------------
// Attention

using TokenMatrix = Eigen::MatrixXd;

/// Softmax(Q Kᵀ / √d_k) V, row-wise.
inline TokenMatrix attention(const TokenMatrix& q, const TokenMatrix& k, const TokenMatrix& v) {
    if (k.rows() != v.rows()) {
        throw ShapeError("attention: K has " + std::to_string(k.rows()) + " rows, V has " +
                         std::to_string(v.rows()));
    }
    if (q.cols() != k.cols()) {
        throw ShapeError("attention: Q has " + std::to_string(q.cols()) + " columns, K has " +
                         std::to_string(k.cols()));
    }
    if (k.rows() == 0 || k.cols() == 0) throw ShapeError("attention: empty key matrix");

    TokenMatrix logits = (q * k.transpose()) / std::sqrt(static_cast<double>(k.cols()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        logits.row(r) = (logits.row(r).array() - m).exp().matrix();
        logits.row(r) /= logits.row(r).sum();
    }
    return logits * v;
}

struct TokenPair {
    TokenMatrix keys;
    TokenMatrix values;
};

/// Decoupled cross-attention: Attn(q, K_text, V_text) + ip_scale · Attn(q, K_ip, V_ip).
inline Eigen::VectorXd compose_condition(const Eigen::RowVectorXd& query, const TokenPair& text,
                                         const std::optional<TokenPair>& ip, double ip_scale) {
    if (!(ip_scale >= 0.0)) throw ConfigError("compose_condition: ip_scale must be >= 0");
    const TokenMatrix q = query;
    Eigen::VectorXd out = attention(q, text.keys, text.values).row(0).transpose();
    if (ip) {
        const Eigen::VectorXd ip_term = attention(q, ip->keys, ip->values).row(0).transpose();
        if (ip_term.size() != out.size()) throw ShapeError("compose_condition: text/ip value width differs");
        out += ip_scale * ip_term;
    }
    return out;
}

inline constexpr std::size_t kTokensPerEmbedding = 4;

/// Splits an embedding into contiguous tokens (one row each).
inline TokenMatrix tokenize(const Embedding& e, std::size_t tokens = kTokensPerEmbedding) {
    if (tokens == 0 || e.dim() % tokens != 0 || e.dim() == 0) {
        throw ShapeError("tokenize: embedding dimension " + std::to_string(e.dim()) +
                         " is not divisible into " + std::to_string(tokens) + " tokens");
    }
    const std::size_t width = e.dim() / tokens;
    TokenMatrix m(static_cast<Eigen::Index>(tokens), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < tokens; ++r)
        for (std::size_t c = 0; c < width; ++c) m(r, c) = e.values[r * width + c];
    return m;
}

/// Text tokens: keys are the contiguous tokens; each value spreads its token
/// into that token's block of a d_e-wide vector, so the attended result stays
/// in embedding space.
inline TokenPair text_tokens(const Embedding& e) {
    TokenMatrix keys = tokenize(e);
    const Eigen::Index width = keys.cols();
    TokenMatrix values = TokenMatrix::Zero(keys.rows(), static_cast<Eigen::Index>(e.dim()));
    for (Eigen::Index r = 0; r < keys.rows(); ++r) values.block(r, r * width, 1, width) = keys.row(r);
    return TokenPair{keys, values};
}

/// The image embedding enters as a single token whose value is the whole
/// embedding, so Attn(q, K_ip, V_ip) returns it unchanged.
inline TokenPair ip_tokens(const Embedding& e) {
    const TokenMatrix t = tokenize(e);
    TokenPair p;
    p.keys = t.colwise().mean();
    p.values = Eigen::Map<const Eigen::RowVectorXd>(e.values.data(), static_cast<Eigen::Index>(e.dim()));
    return p;
}

// ---------------------------------------------------------------------------
// Text encoding

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual Embedding encode(std::string_view prompt) const = 0;
    virtual std::size_t dim() const = 0;
};

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
}

/// Hash the UTF-8 bytes with `seed` into a Gaussian stream, then normalize.
inline Embedding encode_text_mock(std::string_view prompt, std::size_t dim, std::uint64_t seed) {
    if (trim(prompt).empty()) throw InputError("encode_text_mock: prompt is empty");
    if (dim == 0) throw ConfigError("encode_text_mock: embedding dimension must be positive");
    const std::uint64_t key = hash_bytes(prompt, seed);
    std::vector<double> v(dim);
    GaussianStream(key).fill(v);
    return Embedding{normalized_or_basis(std::move(v)), EmbeddingKind::text, "text:" + hex64(key)};
}

class MockTextEncoder final : public TextEncoder {
public:
    MockTextEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
    Embedding encode(std::string_view prompt) const override { return encode_text_mock(prompt, dim_, seed_); }
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Condition → latent mean

/// Fixed seeded map from a Condition to the mean latent μ(c) of the toy world.
///
/// A seeded query attends over the text tokens and the IP token with
/// decoupled attention; the composed d_e-vector goes through a seeded linear
/// projector into the latent. The first `identity_channels` channels see only
/// the IP term ip_scale · ip, the rest see the full composed vector. Rows of
/// one channel share a spatially constant base, so spatial means carry the
/// signal.
class ConditionProjector {
public:
    ConditionProjector(LatentShape shape, std::size_t identity_channels, std::size_t embed_dim,
                       std::uint64_t seed)
        : shape_(shape), identity_channels_(identity_channels), embed_dim_(embed_dim) {
        if (shape.size() == 0) throw ShapeError("projector: empty latent shape");
        if (identity_channels > shape.d) {
            throw ConfigError("projector: identity channels (" + std::to_string(identity_channels) +
                              ") exceed latent channels (" + std::to_string(shape.d) + ")");
        }
        if (embed_dim == 0 || embed_dim % kTokensPerEmbedding != 0) {
            throw ConfigError("projector: embedding dimension must be a positive multiple of " +
                              std::to_string(kTokensPerEmbedding));
        }
        const auto dim = static_cast<Eigen::Index>(embed_dim);
        const auto width = static_cast<Eigen::Index>(embed_dim / kTokensPerEmbedding);

        GaussianStream qs(derive_seed(seed, "projector-query"));
        query_.resize(width);
        for (Eigen::Index i = 0; i < width; ++i) query_(i) = kQueryGain * qs.next();

        GaussianStream ws(derive_seed(seed, "projector-weights"));
        Eigen::MatrixXd base(static_cast<Eigen::Index>(shape.d), dim);
        for (Eigen::Index c = 0; c < base.rows(); ++c)
            for (Eigen::Index j = 0; j < dim; ++j) base(c, j) = ws.next();

        weights_.resize(static_cast<Eigen::Index>(shape.size()), dim);
        for (std::size_t p = 0; p < shape.pixels(); ++p) {
            for (std::size_t c = 0; c < shape.d; ++c) {
                const auto row = static_cast<Eigen::Index>(p * shape.d + c);
                for (Eigen::Index j = 0; j < dim; ++j) {
                    weights_(row, j) = kProjectorGain * (base(static_cast<Eigen::Index>(c), j) +
                                                         kSpatialJitter * ws.next());
                }
            }
        }

        // Least-squares readouts back into embedding space.
        identity_readout_ = readout(0, identity_channels);
        composed_readout_ = readout(identity_channels, shape.d);
    }

    const LatentShape& shape() const noexcept { return shape_; }
    std::size_t identity_channels() const noexcept { return identity_channels_; }
    std::size_t embed_dim() const noexcept { return embed_dim_; }
    const Eigen::RowVectorXd& query() const noexcept { return query_; }

    /// Attn(q, text tokens of e): the text term of the composed vector.
    Eigen::VectorXd text_term(const Embedding& e) const {
        check_dim(e);
        const TokenPair t = text_tokens(e);
        return attention(TokenMatrix(query_), t.keys, t.values).row(0).transpose();
    }

    /// ip_scale · Attn(q, IP token); zero when ip is absent.
    Eigen::VectorXd identity_term(const Condition& c) const {
        if (!c.ip) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(embed_dim_));
        check_dim(*c.ip);
        const TokenPair t = ip_tokens(*c.ip);
        return c.ip_scale * attention(TokenMatrix(query_), t.keys, t.values).row(0).transpose();
    }

    Eigen::VectorXd composed(const Condition& c) const {
        check_dim(c.text);
        std::optional<TokenPair> ip;
        if (c.ip) {
            check_dim(*c.ip);
            ip = ip_tokens(*c.ip);
        }
        return compose_condition(query_, text_tokens(c.text), ip, c.ip_scale);
    }

    FrameLatent mean(const Condition& c) const {
        const Eigen::VectorXd full = composed(c);
        const Eigen::VectorXd id = identity_term(c);
        FrameLatent out(shape_);
        for (std::size_t p = 0; p < shape_.pixels(); ++p) {
            for (std::size_t ch = 0; ch < shape_.d; ++ch) {
                const auto row = static_cast<Eigen::Index>(p * shape_.d + ch);
                const Eigen::VectorXd& src = ch < identity_channels_ ? id : full;
                out[p * shape_.d + ch] = weights_.row(row).dot(src);
            }
        }
        return out;
    }

    /// Linear map latent → embedding space recovering the identity term from
    /// the identity channels (other entries zero). Empty when underdetermined.
    const Eigen::MatrixXd& identity_readout() const noexcept { return identity_readout_; }
    /// Same for the composed vector from the non-identity channels.
    const Eigen::MatrixXd& composed_readout() const noexcept { return composed_readout_; }

    /// Recovers the composed vector from a frame's non-identity channels.
    Eigen::VectorXd read_composed(const FrameLatent& frame) const {
        if (frame.shape() != shape_) throw ShapeError("projector readout: latent shape " + frame.shape().str());
        if (composed_readout_.size() == 0) {
            throw ConfigError("projector readout needs enough non-identity channels to determine the embedding");
        }
        return composed_readout_ * Eigen::Map<const Eigen::VectorXd>(frame.values().data(),
                                                                    static_cast<Eigen::Index>(frame.size()));
    }

private:
    static constexpr double kQueryGain = 2.0;
    static constexpr double kProjectorGain = 4.0;
    static constexpr double kSpatialJitter = 0.5;

    void check_dim(const Embedding& e) const {
        if (e.dim() != embed_dim_) {
            throw ShapeError("projector: embedding has dimension " + std::to_string(e.dim()) + ", expected " +
                             std::to_string(embed_dim_));
        }
    }

    // (AᵀA)⁻¹Aᵀ over the rows of channels [first, last), scattered back to full latent columns.
    Eigen::MatrixXd readout(std::size_t first, std::size_t last) const {
        const std::size_t rows = shape_.pixels() * (last - first);
        if (rows < embed_dim_) return {};
        Eigen::MatrixXd a(static_cast<Eigen::Index>(rows), weights_.cols());
        std::vector<Eigen::Index> index;
        index.reserve(rows);
        for (std::size_t p = 0; p < shape_.pixels(); ++p) {
            for (std::size_t c = first; c < last; ++c) {
                const auto row = static_cast<Eigen::Index>(p * shape_.d + c);
                a.row(static_cast<Eigen::Index>(index.size())) = weights_.row(row);
                index.push_back(row);
            }
        }
        const Eigen::MatrixXd pinv = (a.transpose() * a).ldlt().solve(a.transpose());
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(weights_.cols(), static_cast<Eigen::Index>(shape_.size()));
        for (std::size_t i = 0; i < index.size(); ++i) full.col(index[i]) = pinv.col(static_cast<Eigen::Index>(i));
        return full;
    }

    LatentShape shape_;
    std::size_t identity_channels_;
    std::size_t embed_dim_;
    Eigen::RowVectorXd query_;
    Eigen::MatrixXd weights_;
    Eigen::MatrixXd identity_readout_;
    Eigen::MatrixXd composed_readout_;
};

/// μ(c) for a one-off projector built from `projector_seed`.
inline FrameLatent condition_mean(const Condition& c, std::uint64_t projector_seed, LatentShape shape,
                                  std::size_t identity_channels) {
    return ConditionProjector(shape, identity_channels, c.text.dim(), projector_seed).mean(c);
}

} // namespace vgot

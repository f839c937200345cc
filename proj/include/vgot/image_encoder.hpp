#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vgot/conditioning.hpp"
#include "vgot/latent.hpp"
#include "vgot/random.hpp"

namespace vgot {

/// Frame → image embedding (the CLIP-vision slot).
class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual Embedding encode(const FrameLatent& latent, std::string source = {}) const = 0;
    virtual std::size_t dim() const = 0;
};

/// Fixed linear map of the latent followed by normalization. The map reads
/// the identity term back out of the identity channels and adds a seeded
/// random mix of the scene (the composed vector read from the other
/// channels) weighted by `scene_weight`, so keyframes that share an avatar
/// but differ in scene get nearby, not equal, embeddings.
/// The zero latent maps to the first basis vector.
class MockImageEncoder final : public ImageEncoder {
public:
    MockImageEncoder(std::shared_ptr<const ConditionProjector> projector, double scene_weight, std::uint64_t seed)
        : shape_(projector ? projector->shape() : LatentShape{}) {
        if (!projector) throw ConfigError("image encoder needs a projector");
        if (!(scene_weight >= 0.0) || !std::isfinite(scene_weight)) {
            throw ConfigError("image encoder scene weight must be finite and >= 0");
        }
        const auto dim = static_cast<Eigen::Index>(projector->embed_dim());
        const auto n = static_cast<Eigen::Index>(shape_.size());
        map_ = projector->identity_readout();
        if (map_.size() == 0) map_ = Eigen::MatrixXd::Zero(dim, n);
        if (scene_weight > 0.0 && projector->composed_readout().size() > 0) {
            GaussianStream g(derive_seed(seed, "image-encoder"));
            Eigen::MatrixXd mix(dim, dim);
            const double scale = scene_weight / std::sqrt(static_cast<double>(dim));
            for (Eigen::Index r = 0; r < dim; ++r)
                for (Eigen::Index c = 0; c < dim; ++c) mix(r, c) = scale * g.next();
            map_ += mix * projector->composed_readout();
        }
    }

    Embedding encode(const FrameLatent& latent, std::string source = {}) const override {
        if (latent.shape() != shape_) {
            throw ShapeError("image encoder expects shape " + shape_.str() + ", got " + latent.shape().str());
        }
        if (!latent.all_finite()) throw NumericError("image encoder: non-finite latent");
        const Eigen::VectorXd v =
            map_ * Eigen::Map<const Eigen::VectorXd>(latent.values().data(), static_cast<Eigen::Index>(latent.size()));
        std::vector<double> out(v.data(), v.data() + v.size());
        return Embedding{normalized_or_basis(std::move(out)), EmbeddingKind::image, std::move(source)};
    }

    std::size_t dim() const override { return static_cast<std::size_t>(map_.rows()); }

private:
    LatentShape shape_;
    Eigen::MatrixXd map_;
};

inline Embedding encode_image_mock(const FrameLatent& latent, std::shared_ptr<const ConditionProjector> projector,
                                   double scene_weight, std::uint64_t seed) {
    return MockImageEncoder(std::move(projector), scene_weight, seed).encode(latent);
}

} // namespace vgot

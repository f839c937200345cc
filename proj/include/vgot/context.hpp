#pragma once

#include <memory>

#include "vgot/conditioning.hpp"
#include "vgot/diffusion.hpp"
#include "vgot/image_encoder.hpp"
#include "vgot/latent.hpp"

namespace vgot {

/// The models and tables every generation stage shares.
struct GenerationContext {
    LatentShape shape;
    NoiseSchedule schedule;
    double eta = 0.0;
    std::shared_ptr<const TextEncoder> text_encoder;
    std::shared_ptr<const ImageEncoder> image_encoder;
    std::shared_ptr<const DenoiserBackend> denoiser;
    /// Present for the toy backend; scorers use it to read frames back into
    /// the conditioning space.
    std::shared_ptr<const ConditionProjector> projector;

    void check() const {
        if (!text_encoder || !image_encoder || !denoiser) throw ConfigError("generation context is incomplete");
    }

    FrameLatent sample(const Condition& c, std::uint64_t seed) const {
        check();
        return sample_reverse(*denoiser, c, schedule, seed, shape, eta);
    }
};

struct ToyWorldOptions {
    LatentShape shape{};
    std::size_t identity_channels = 4;
    std::size_t embed_dim = 16;
    double prior_std = 0.5;
    int steps = 50;
    double beta_start = 0.002;
    double beta_end = 0.4;
    double eta = 0.0;
    /// Weight of the scene view in the mock image encoder.
    double scene_weight = 0.3;
};

/// Wires the analytic Gaussian backend: mock encoders, the condition
/// projector and the exact denoiser, all seeded from `seed`.
inline GenerationContext make_toy_context(const ToyWorldOptions& opt, std::uint64_t seed) {
    GenerationContext ctx;
    ctx.shape = opt.shape;
    ctx.schedule = make_schedule(opt.steps, opt.beta_start, opt.beta_end);
    ctx.eta = opt.eta;
    ctx.text_encoder = std::make_shared<MockTextEncoder>(opt.embed_dim, derive_seed(seed, "text-encoder"));
    auto projector = std::make_shared<const ConditionProjector>(opt.shape, opt.identity_channels, opt.embed_dim,
                                                                derive_seed(seed, "projector"));
    ctx.projector = projector;
    ctx.image_encoder =
        std::make_shared<MockImageEncoder>(projector, opt.scene_weight, derive_seed(seed, "image-encoder"));
    ctx.denoiser = std::make_shared<AnalyticDenoiser>(
        GaussianWorld{opt.prior_std, [projector](const Condition& c) { return projector->mean(c); }});
    return ctx;
}

} // namespace vgot

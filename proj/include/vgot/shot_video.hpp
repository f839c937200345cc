#pragma once

#include <cstdint>
#include <vector>

#include "vgot/casting.hpp"
#include "vgot/context.hpp"
#include "vgot/script.hpp"

namespace vgot {

struct ShotClip {
    int shot_index = 0;
    std::vector<FrameLatent> frames;
    Condition condition;
    std::size_t k = 0;
};

/// Per-shot condition: text from the SHORT description, IP from the keyframe.
inline Condition shot_condition(const ShotDescription& shot, const Keyframe& keyframe, double ip_scale,
                                const GenerationContext& ctx) {
    ctx.check();
    return make_condition(ctx.text_encoder->encode(shot.text),
                          ctx.image_encoder->encode(keyframe.latent, "keyframe:" + std::to_string(keyframe.shot_index)),
                          ip_scale);
}

inline std::uint64_t frame_seed(std::uint64_t seed, int shot, std::size_t frame) {
    return derive_seed(seed, "shot-frame", {shot, static_cast<std::int64_t>(frame)});
}

/// k independent frames sampled under one shot condition.
inline ShotClip generate_shot_clip(const ShotDescription& shot, const Keyframe& keyframe, std::size_t k,
                                   double ip_scale, const GenerationContext& ctx, std::uint64_t seed) {
    if (k < 1) throw ConfigError("generate_shot_clip: frames per shot must be >= 1");
    ShotClip clip;
    clip.shot_index = shot.index;
    clip.k = k;
    clip.condition = shot_condition(shot, keyframe, ip_scale, ctx);
    clip.frames.reserve(k);
    for (std::size_t f = 0; f < k; ++f) clip.frames.push_back(ctx.sample(clip.condition, frame_seed(seed, shot.index, f)));
    return clip;
}

} // namespace vgot

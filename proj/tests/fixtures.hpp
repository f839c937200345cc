#pragma once

// Small builders shared by the suites that need a story and a toy world.

#include <cstdint>
#include <string>
#include <vector>

#include "vgot/pipeline.hpp"

namespace fixture {

inline vgot::PipelineConfig config(int shots = 4, std::uint64_t seed = 0) {
    vgot::PipelineConfig cfg;
    cfg.n_shots = shots;
    cfg.seed = seed;
    return cfg;
}

inline vgot::Story story(const vgot::PipelineConfig& cfg) {
    auto llm = vgot::make_llm(cfg);
    return vgot::build_story(cfg.user_input, cfg, *llm);
}

/// Per-channel spatial mean of the first `channels` channels.
inline std::vector<double> channel_means(const vgot::FrameLatent& x, std::size_t channels) {
    const auto& s = x.shape();
    std::vector<double> out(channels, 0.0);
    for (std::size_t p = 0; p < s.pixels(); ++p)
        for (std::size_t c = 0; c < channels; ++c) out[c] += x[p * s.d + c];
    for (auto& v : out) v /= static_cast<double>(s.pixels());
    return out;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

} // namespace fixture

#pragma once

#include <cstdint>
#include <regex>
#include <string>
#include <vector>

#include "vgot/context.hpp"
#include "vgot/error.hpp"
#include "vgot/image_encoder.hpp"
#include "vgot/random.hpp"
#include "vgot/script.hpp"

namespace vgot {

struct Keyframe {
    FrameLatent latent;
    int shot_index = 0;
    std::string avatar_id;

    friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct AvatarPlan {
    std::vector<AvatarProfile> avatars;
    /// avatar id per shot, indexed by shot.
    std::vector<std::string> assignment;
};

enum class AssignmentSource {
    /// Shot i goes to avatar ⌊i / shots_per_avatar⌋.
    floor_division,
    /// The LLM returns "shot <n>: <id>" lines; coverage is validated.
    llm,
};

inline std::string avatar_id_for(std::size_t index) { return "a" + std::to_string(index); }

namespace detail {

inline std::vector<std::string> parse_assignment(std::string_view completion, std::size_t shots,
                                                 const std::vector<AvatarProfile>& avatars) {
    static const std::regex line_re(R"(shot\s+(\d+)\s*:\s*([A-Za-z0-9_\-]+))", std::regex::icase);
    std::vector<std::string> out(shots);
    const std::string text(completion);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), line_re); it != std::sregex_iterator(); ++it) {
        const long n = std::stol((*it)[1].str());
        if (n < 1 || static_cast<std::size_t>(n) > shots) {
            throw ValidationError("avatar assignment names shot " + std::to_string(n) + " outside 1.." +
                                  std::to_string(shots));
        }
        const std::string id = (*it)[2].str();
        bool known = false;
        for (const auto& a : avatars) known = known || a.id == id;
        if (!known) throw ValidationError("avatar assignment uses unknown avatar '" + id + "'");
        out[static_cast<std::size_t>(n - 1)] = id;
    }
    for (std::size_t i = 0; i < shots; ++i) {
        if (out[i].empty()) throw ValidationError("avatar assignment leaves shot " + std::to_string(i) + " without an avatar");
    }
    return out;
}

} // namespace detail

/// Proposes ⌈N / shots_per_avatar⌉ avatar prompts and assigns one avatar to every shot.
inline AvatarPlan derive_avatars(const std::vector<ShotDescription>& descriptions, LlmClient& llm,
                                 std::size_t shots_per_avatar, std::uint64_t seed,
                                 AssignmentSource source = AssignmentSource::floor_division) {
    if (descriptions.empty()) throw InputError("derive_avatars: no shot descriptions");
    if (shots_per_avatar < 1) throw ConfigError("derive_avatars: shots_per_avatar must be >= 1");

    const std::size_t n = descriptions.size();
    const std::size_t count = (n + shots_per_avatar - 1) / shots_per_avatar;
    AvatarPlan plan;
    for (std::size_t a = 0; a < count; ++a) {
        std::string context;
        const std::size_t first = a * shots_per_avatar;
        const std::size_t last = std::min(n, first + shots_per_avatar);
        for (std::size_t i = first; i < last; ++i) context += descriptions[i].text + "\n";
        AvatarProfile profile;
        profile.id = avatar_id_for(a);
        profile.seed = derive_seed(seed, "avatar", {static_cast<std::int64_t>(a)});
        try {
            profile.prompt = parse_domains(llm.complete(prompts::avatar(static_cast<int>(a), static_cast<int>(count)), context));
        } catch (const Error&) {
            detail::rethrow_with_prefix("avatar " + profile.id + ": ");
        }
        plan.avatars.push_back(std::move(profile));
    }

    if (source == AssignmentSource::floor_division) {
        plan.assignment.reserve(n);
        for (std::size_t i = 0; i < n; ++i) plan.assignment.push_back(plan.avatars[i / shots_per_avatar].id);
    } else {
        std::vector<std::string> ids;
        for (const auto& a : plan.avatars) ids.push_back(a.id);
        plan.assignment = detail::parse_assignment(
            llm.complete(prompts::assignment(static_cast<int>(n), ids), std::string{}), n, plan.avatars);
    }
    return plan;
}

/// Renders the avatar portrait from its text prompt and encodes it into the IP embedding.
inline AvatarProfile render_avatar(AvatarProfile profile, const GenerationContext& ctx) {
    ctx.check();
    if (!profile.prompt.complete()) throw InputError("render_avatar: avatar '" + profile.id + "' has an incomplete prompt");
    const Condition c = make_condition(ctx.text_encoder->encode(profile.prompt.full_text()));
    const FrameLatent portrait = ctx.sample(c, profile.seed);
    profile.ip_embedding = ctx.image_encoder->encode(portrait, "avatar:" + profile.id);
    return profile;
}

/// I_i = 𝓜_I(e^T_i, e^I_j): full five-domain text plus the avatar's IP embedding.
inline Keyframe generate_keyframe(const ShotScript& script, const AvatarProfile& avatar, double ip_scale,
                                  const GenerationContext& ctx, std::uint64_t seed, int shot_index = 0) {
    ctx.check();
    if (!avatar.ip_embedding) throw StateError("generate_keyframe: avatar '" + avatar.id + "' has not been rendered");
    const Condition c =
        make_condition(ctx.text_encoder->encode(script.domains.full_text()), avatar.ip_embedding, ip_scale);
    return Keyframe{ctx.sample(c, seed), shot_index, avatar.id};
}

} // namespace vgot

#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vgot/conditioning.hpp"
#include "vgot/error.hpp"
#include "vgot/random.hpp"

namespace vgot {

// ---------------------------------------------------------------------------
// Story data model

enum class Domain { character, background, relations, camera, hdr };

inline constexpr std::array<Domain, 5> kDomains = {Domain::character, Domain::background, Domain::relations,
                                                    Domain::camera, Domain::hdr};

/// JSON key of a domain.
constexpr std::string_view domain_key(Domain d) noexcept {
    switch (d) {
        case Domain::character: return "character";
        case Domain::background: return "background";
        case Domain::relations: return "relations";
        case Domain::camera: return "camera";
        case Domain::hdr: return "hdr";
    }
    return "";
}

/// Section label used in free-text scripts.
constexpr std::string_view domain_label(Domain d) noexcept {
    switch (d) {
        case Domain::character: return "Character";
        case Domain::background: return "Background";
        case Domain::relations: return "Relation";
        case Domain::camera: return "Camera Pose";
        case Domain::hdr: return "HDR Description";
    }
    return "";
}

inline std::optional<Domain> domain_from_key(std::string_view key) {
    for (Domain d : kDomains)
        if (domain_key(d) == key) return d;
    return std::nullopt;
}

/// The five-domain prompt: character, background, relations, camera pose, HDR lighting.
struct DomainText {
    std::string character;
    std::string background;
    std::string relations;
    std::string camera;
    std::string hdr;

    const std::string& get(Domain d) const {
        switch (d) {
            case Domain::character: return character;
            case Domain::background: return background;
            case Domain::relations: return relations;
            case Domain::camera: return camera;
            case Domain::hdr: return hdr;
        }
        return character;
    }
    std::string& get(Domain d) { return const_cast<std::string&>(std::as_const(*this).get(d)); }

    bool complete() const {
        for (Domain d : kDomains)
            if (trim(get(d)).empty()) return false;
        return true;
    }

    /// Labeled multi-line rendering, parseable by parse_domains().
    std::string full_text() const {
        std::string out;
        for (Domain d : kDomains) {
            out += domain_label(d);
            out += ": ";
            out += get(d);
            out += '\n';
        }
        return out;
    }

    friend bool operator==(const DomainText&, const DomainText&) = default;
};

struct ShotDescription {
    int index = 0;
    std::string text;

    friend bool operator==(const ShotDescription&, const ShotDescription&) = default;
};

struct ShotScript {
    DomainText domains;
    std::string avatar_id;
    /// The short description this script was expanded from.
    std::string short_text;

    friend bool operator==(const ShotScript&, const ShotScript&) = default;
};

struct AvatarProfile {
    std::string id;
    DomainText prompt;
    std::uint64_t seed = 0;
    /// Populated by render_avatar().
    std::optional<Embedding> ip_embedding;

    friend bool operator==(const AvatarProfile&, const AvatarProfile&) = default;
};

struct Story {
    std::string user_input;
    int n_shots = 0;
    std::vector<ShotDescription> descriptions;
    std::vector<ShotScript> scripts;
    std::vector<AvatarProfile> avatars;

    const AvatarProfile* find_avatar(std::string_view id) const {
        for (const auto& a : avatars)
            if (a.id == id) return &a;
        return nullptr;
    }

    friend bool operator==(const Story&, const Story&) = default;
};

/// Checks the fully-populated story invariants.
inline void validate_story(const Story& story) {
    if (story.n_shots < 1) throw ValidationError("story: n_shots must be >= 1");
    const auto n = static_cast<std::size_t>(story.n_shots);
    if (story.descriptions.size() != n || story.scripts.size() != n) {
        throw ValidationError("story: expected " + std::to_string(n) + " descriptions and scripts, got " +
                              std::to_string(story.descriptions.size()) + " and " +
                              std::to_string(story.scripts.size()));
    }
    for (std::size_t i = 0; i < story.avatars.size(); ++i)
        for (std::size_t j = i + 1; j < story.avatars.size(); ++j)
            if (story.avatars[i].id == story.avatars[j].id)
                throw ValidationError("story: duplicate avatar id '" + story.avatars[i].id + "'");
    for (std::size_t i = 0; i < n; ++i) {
        if (story.descriptions[i].index != static_cast<int>(i))
            throw ValidationError("story: shot indices must be contiguous from 0 (shot " + std::to_string(i) + ")");
        if (trim(story.descriptions[i].text).empty())
            throw ValidationError("story: shot " + std::to_string(i) + " has an empty description");
        const auto& s = story.scripts[i];
        for (Domain d : kDomains)
            if (trim(s.domains.get(d)).empty())
                throw ValidationError("scripts[" + std::to_string(i) + "]." + std::string(domain_key(d)) +
                                      " is empty");
        if (!story.find_avatar(s.avatar_id))
            throw ValidationError("scripts[" + std::to_string(i) + "].avatar_id '" + s.avatar_id +
                                  "' does not resolve to an avatar");
    }
}

// ---------------------------------------------------------------------------
// Labeled-section parsing

/// Extracts the five domains from free text labeled "Character:",
/// "Background:", "Relation:", "Camera Pose:" and "HDR Description:".
/// Labels are case-insensitive, may appear in any order, inline or one per
/// line, and may be wrapped in markdown bold markers.
inline DomainText parse_domains(std::string_view text) {
    static const std::regex label_re(
        R"((^|[^A-Za-z])\**(character|background|relations?|camera[ \t]+pose|camera|hdr[ \t]+description|hdr)\**[ \t]*:\**)",
        std::regex::icase);

    struct Hit {
        Domain domain;
        std::size_t label_begin;
        std::size_t body_begin;
    };
    std::vector<Hit> hits;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), label_re); it != std::sregex_iterator(); ++it) {
        std::string name = (*it)[2].str();
        for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        Domain d = Domain::character;
        if (name.starts_with("background")) d = Domain::background;
        else if (name.starts_with("relation")) d = Domain::relations;
        else if (name.starts_with("camera")) d = Domain::camera;
        else if (name.starts_with("hdr")) d = Domain::hdr;
        hits.push_back({d, static_cast<std::size_t>(it->position(2)),
                        static_cast<std::size_t>(it->position(0) + it->length(0))});
    }

    DomainText out;
    std::array<bool, 5> seen{};
    for (std::size_t h = 0; h < hits.size(); ++h) {
        const auto slot = static_cast<std::size_t>(hits[h].domain);
        if (seen[slot]) throw SchemaError(std::string(domain_key(hits[h].domain)) + ": domain appears twice");
        seen[slot] = true;
        const std::size_t end = h + 1 < hits.size() ? hits[h + 1].label_begin : s.size();
        std::string body(trim(std::string_view(s).substr(hits[h].body_begin, end - hits[h].body_begin)));
        while (!body.empty() && body.back() == '*') body.pop_back();
        out.get(hits[h].domain) = std::string(trim(body));
    }
    for (Domain d : kDomains) {
        if (trim(out.get(d)).empty()) {
            throw SchemaError(std::string(domain_key(d)) + ": missing domain \"" + std::string(domain_label(d)) +
                              "\" in completion");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// LLM client

/// 𝓜_LLM: (instruction, context) → completion.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(std::string_view instruction, std::string_view context) = 0;
    virtual bool deterministic() const { return false; }
};

/// Instruction texts sent to the LLM. The mock client keys off these phrasings.
namespace prompts {

inline std::string shot_description(int index, int total) {
    return "Write a one-sentence description of shot " + std::to_string(index + 1) + " of " + std::to_string(total) +
           " for the story in the context. Begin with a short title followed by a colon. Reply with the sentence only.";
}

inline std::string shot_script(int index) {
    return "Expand shot " + std::to_string(index + 1) +
           " into a five-domain script with the labeled sections Character:, Background:, Relation:, "
           "Camera Pose: and HDR Description:. Keep continuity with the previous script when one is given.";
}

inline std::string avatar(int index, int total) {
    return "Describe avatar " + std::to_string(index + 1) + " of " + std::to_string(total) +
           " for the shots in the context, with the labeled sections Character:, Background:, Relation:, "
           "Camera Pose: and HDR Description:.";
}

inline std::string assignment(int shots, const std::vector<std::string>& ids) {
    std::string list;
    for (std::size_t i = 0; i < ids.size(); ++i) list += (i ? ", " : "") + ids[i];
    return "Assign each of the " + std::to_string(shots) + " shots to exactly one of the avatars [" + list +
           "]. Reply with one line per shot in the form 'shot <number>: <avatar id>'.";
}

inline std::string script_context(const ShotDescription& s, const ShotScript* prev) {
    std::string ctx = "Shot description: " + s.text + "\n";
    if (prev) ctx += "Previous script:\n" + prev->domains.full_text();
    else ctx += "Previous script: none\n";
    return ctx;
}

} // namespace prompts

/// Deterministic template engine standing in for a chat model.
///
/// Every completion is a pure function of (seed, instruction, context): the
/// story hash, shot index and domain select entries from fixed phrase tables.
class MockLlmClient : public LlmClient {
public:
    explicit MockLlmClient(std::uint64_t seed = 0) : seed_(seed) {}

    bool deterministic() const override { return true; }

    std::string complete(std::string_view instruction, std::string_view context) override {
        static const std::regex describe_re(R"(description of shot (\d+) of (\d+))");
        static const std::regex expand_re(R"(Expand shot (\d+) into a five-domain script)");
        static const std::regex avatar_re(R"(Describe avatar (\d+) of (\d+))");
        static const std::regex assign_re(R"(Assign each of the (\d+) shots to exactly one of the avatars \[([^\]]*)\])");

        const std::string instr(instruction);
        std::smatch m;
        if (std::regex_search(instr, m, describe_re)) {
            return describe(context, std::stoi(m[1].str()) - 1);
        }
        if (std::regex_search(instr, m, expand_re)) {
            return expand(context, std::stoi(m[1].str()) - 1);
        }
        if (std::regex_search(instr, m, avatar_re)) {
            return avatar(context, std::stoi(m[1].str()) - 1, std::stoi(m[2].str()));
        }
        if (std::regex_search(instr, m, assign_re)) {
            return assign(std::stoi(m[1].str()), m[2].str());
        }
        throw TransportError("mock LLM: unrecognized instruction");
    }

private:
    template <std::size_t N>
    const char* pick(const std::array<const char*, N>& table, std::uint64_t story, int index,
                     std::string_view domain) const {
        return table[derive_seed(seed_ ^ story, domain, {index}) % N];
    }

    static std::string subject_of(std::string_view text) {
        static const std::array<std::string_view, 14> skip = {"A",     "An",    "The",   "In",     "On",
                                                               "At",    "Of",    "Set",   "Describe", "Story",
                                                               "Shot",  "Shots", "Write", "Previous"};
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
            std::size_t j = i;
            while (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '-')) ++j;
            const std::string_view word = text.substr(i, j - i);
            const bool upper = !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
            bool skipped = false;
            for (auto s : skip) skipped = skipped || s == word;
            if (upper && word.size() >= 2 && !skipped) return std::string(word);
            i = j;
        }
        return "The traveler";
    }

    static std::string after_colon(std::string_view text) {
        const auto pos = text.find(':');
        std::string body(trim(pos == std::string_view::npos ? text : text.substr(pos + 1)));
        if (!body.empty() && body.back() == '.') body.pop_back();
        return body;
    }

    std::string describe(std::string_view user_input, int index) const {
        static constexpr std::array<const char*, 12> titles = {
            "Beginnings", "Discovery", "Departure", "Encounter",  "Trial",   "Reunion",
            "Turning Point", "Celebration", "Loss", "Reflection", "Journey", "Homecoming"};
        static constexpr std::array<const char*, 10> actions = {
            "examines an ancient map with intense focus",
            "walks through a crowded market at dawn",
            "meets a stranger at a quiet crossroads",
            "studies an old photograph by lantern light",
            "laughs with friends around a long wooden table",
            "stands alone on a windswept hill",
            "opens a sealed letter with trembling hands",
            "races down a narrow cobblestone street",
            "plants a young tree in the family garden",
            "watches the sunset from a creaking porch"};
        static constexpr std::array<const char*, 6> outcomes = {
            "revealing the path ahead",          "hinting at what lies ahead",
            "changing the course of the story",  "bringing back old memories",
            "setting the next chapter in motion", "leaving a question unanswered"};
        const std::uint64_t story = hash_bytes(user_input);
        const std::string who = subject_of(user_input);
        return who + "'s " + pick(titles, story, index, "title") + ": " + who + " " +
               pick(actions, story, index, "action") + ", " + pick(outcomes, story, index, "outcome") + ".";
    }

    std::string expand(std::string_view context, int index) const {
        static constexpr std::array<const char*, 6> looks = {
            "in a weathered travel coat", "wearing a simple linen shirt", "with a worn leather satchel",
            "in a bright red scarf",      "with tousled dark hair",       "in a neatly pressed suit"};
        static constexpr std::array<const char*, 8> backgrounds = {
            "A dense jungle filled with mist and towering trees.",
            "A sunlit village square lined with stone houses.",
            "A narrow alley glistening after the rain.",
            "A quiet kitchen with morning light on the table.",
            "A vast desert under a pale sky.",
            "A crowded train station with high iron arches.",
            "A hillside meadow scattered with wildflowers.",
            "A dim library with towering shelves."};
        static constexpr std::array<const char*, 6> relations = {
            "points toward the horizon while companions follow the gesture",
            "keeps a careful distance from the figure ahead",
            "shares a knowing look with an old friend",
            "holds the object close as the crowd moves past",
            "turns away from the others to think",
            "reaches out to steady a companion"};
        static constexpr std::array<const char*, 6> cameras = {
            "Medium shot at eye level.",           "Slow push-in close-up on the face.",
            "Wide establishing shot from above.",  "Over-the-shoulder shot.",
            "Low-angle tracking shot.",            "Static long shot with shallow depth."};
        static constexpr std::array<const char*, 6> lights = {
            "Soft light filters through the trees, creating dynamic shadows.",
            "Warm golden-hour light with long shadows.",
            "Cool overcast light with gentle contrast.",
            "Flickering candlelight with deep blacks.",
            "Harsh midday sun with bright highlights.",
            "Neon reflections on wet surfaces."};

        const std::uint64_t story = hash_bytes(context);
        std::string shot = "the scene";
        std::string prev_character;
        {
            const std::string_view marker = "Shot description:";
            const auto p = context.find(marker);
            if (p != std::string_view::npos) {
                auto end = context.find('\n', p);
                shot = std::string(trim(context.substr(p + marker.size(), end - p - marker.size())));
            }
            const std::string_view prev_marker = "Previous script:\n";
            const auto q = context.find(prev_marker);
            if (q != std::string_view::npos) {
                const auto line_end = context.find('\n', q + prev_marker.size());
                prev_character = after_colon(context.substr(q + prev_marker.size(), line_end - q - prev_marker.size()));
            }
        }
        const std::string who = subject_of(shot);
        std::string relation = who + " " + pick(relations, story, index, "relations");
        if (prev_character.empty()) relation += ", opening the story.";
        else relation += ", continuing from the previous shot where " + prev_character + ".";

        std::string out;
        out += "Character: " + who + ", " + pick(looks, story, index, "character") + ", " + after_colon(shot) + ".\n";
        out += std::string("Background: ") + pick(backgrounds, story, index, "background") + "\n";
        out += "Relation: " + relation + "\n";
        out += std::string("Camera Pose: ") + pick(cameras, story, index, "camera") + "\n";
        out += std::string("HDR Description: ") + pick(lights, story, index, "hdr") + "\n";
        return out;
    }

    std::string avatar(std::string_view context, int index, int total) const {
        static constexpr std::array<const char*, 5> stages = {"as a child", "as a teenager", "in middle age",
                                                              "in later years", "in old age"};
        static constexpr std::array<const char*, 6> features = {
            "with bright curious eyes", "with a calm steady gaze", "with freckles and a quick smile",
            "with silver-streaked hair", "with a thoughtful frown",  "with weathered kind hands"};
        const std::uint64_t story = hash_bytes(context);
        const std::string who = subject_of(context);
        const char* stage = stages[static_cast<std::size_t>(index) * stages.size() /
                                   static_cast<std::size_t>(std::max(total, 1)) % stages.size()];
        std::string out;
        out += "Character: " + who + " " + stage + ", " + pick(features, story, index, "avatar-character") + ".\n";
        out += "Background: Neutral studio backdrop.\n";
        out += "Relation: " + who + " faces the camera alone.\n";
        out += "Camera Pose: Frontal portrait, head and shoulders.\n";
        out += "HDR Description: Even soft key light with a gentle rim light.\n";
        return out;
    }

    static std::string assign(int shots, const std::string& id_list) {
        std::vector<std::string> ids;
        std::size_t start = 0;
        while (start <= id_list.size()) {
            const auto comma = id_list.find(',', start);
            const auto piece = trim(std::string_view(id_list).substr(start, comma == std::string::npos ? std::string::npos
                                                                                                         : comma - start));
            if (!piece.empty()) ids.emplace_back(piece);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (ids.empty()) throw TransportError("mock LLM: no avatars to assign");
        const auto per = (static_cast<std::size_t>(shots) + ids.size() - 1) / ids.size();
        std::string out;
        for (int i = 0; i < shots; ++i) out += "shot " + std::to_string(i + 1) + ": " + ids[static_cast<std::size_t>(i) / per] + "\n";
        return out;
    }

    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Script generation

namespace detail {

template <typename F>
decltype(auto) with_shot_context(int index, F&& f) {
    try {
        return f();
    } catch (const Error&) {
        rethrow_with_prefix("shot " + std::to_string(index) + ": ");
    } catch (const std::exception& e) {
        throw TransportError("shot " + std::to_string(index) + ": LLM client failed: " + e.what());
    }
}

} // namespace detail

/// S → S′: N one-sentence shot descriptions.
inline std::vector<ShotDescription> expand_story(std::string_view user_input, int n_shots, LlmClient& llm) {
    if (n_shots < 1) throw InputError("expand_story: number of shots must be >= 1, got " + std::to_string(n_shots));
    if (trim(user_input).empty()) throw InputError("expand_story: user input is empty");

    std::vector<ShotDescription> out;
    out.reserve(static_cast<std::size_t>(n_shots));
    for (int i = 0; i < n_shots; ++i) {
        std::string text = detail::with_shot_context(i, [&] {
            const std::string completion = llm.complete(prompts::shot_description(i, n_shots), user_input);
            // First non-empty line; an optional "Shot k:" label is dropped.
            std::string_view rest = completion;
            std::string_view line;
            while (!rest.empty() && line.empty()) {
                const auto nl = rest.find('\n');
                line = trim(rest.substr(0, nl));
                rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
            }
            static const std::regex shot_label(R"(^\s*shot\s+\d+\s*[:.-]\s*)", std::regex::icase);
            std::string cleaned = std::regex_replace(std::string(line), shot_label, "");
            if (trim(cleaned).empty()) throw ParseError("empty description in LLM completion");
            return std::string(trim(cleaned));
        });
        out.push_back(ShotDescription{i, std::move(text)});
    }
    return out;
}

/// p_i = 𝓜_LLM(s_i, p_{i−1}). `prev` is passed to the model as context.
inline ShotScript generate_shot_script(const ShotDescription& s, const ShotScript* prev, LlmClient& llm) {
    if (trim(s.text).empty()) throw InputError("generate_shot_script: shot description is empty");
    if (s.index < 0) throw InputError("generate_shot_script: negative shot index");
    const std::string completion = llm.complete(prompts::shot_script(s.index), prompts::script_context(s, prev));
    ShotScript out;
    out.domains = parse_domains(completion);
    out.short_text = s.text;
    return out;
}

inline ShotScript generate_shot_script(const ShotDescription& s, const std::optional<ShotScript>& prev,
                                       LlmClient& llm) {
    return generate_shot_script(s, prev ? &*prev : nullptr, llm);
}

/// Iterates over the descriptions in order, carrying the previous script.
/// Existing avatar assignments on story.scripts are kept.
inline Story generate_script_sequence(Story story, LlmClient& llm) {
    if (story.descriptions.empty()) throw StateError("generate_script_sequence: story has no shot descriptions");
    for (std::size_t i = 0; i < story.descriptions.size(); ++i) {
        if (story.descriptions[i].index != static_cast<int>(i)) {
            throw ValidationError("generate_script_sequence: description indices must be contiguous from 0");
        }
    }
    std::vector<ShotScript> scripts;
    scripts.reserve(story.descriptions.size());
    for (const auto& s : story.descriptions) {
        const ShotScript* prev = scripts.empty() ? nullptr : &scripts.back();
        ShotScript p = detail::with_shot_context(s.index, [&] { return generate_shot_script(s, prev, llm); });
        if (static_cast<std::size_t>(s.index) < story.scripts.size()) p.avatar_id = story.scripts[static_cast<std::size_t>(s.index)].avatar_id;
        scripts.push_back(std::move(p));
    }
    story.scripts = std::move(scripts);
    story.n_shots = static_cast<int>(story.descriptions.size());
    return story;
}

} // namespace vgot

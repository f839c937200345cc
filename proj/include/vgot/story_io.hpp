#pragma once

#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vgot/error.hpp"
#include "vgot/script.hpp"

namespace vgot {

using ordered_json = nlohmann::ordered_json;

/// Canonical JSON text: 2-space indent, LF newlines, trailing newline.
inline std::string dump_canonical(const ordered_json& j) {
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::strict) + "\n";
}

namespace detail {

inline ordered_json domains_to_json(const DomainText& d) {
    ordered_json j = ordered_json::object();
    for (Domain dom : kDomains) j[std::string(domain_key(dom))] = d.get(dom);
    return j;
}

inline const ordered_json& require(const ordered_json& obj, std::string_view key, const std::string& path,
                                   ordered_json::value_t type, std::string_view alias = {}) {
    const std::string where = path.empty() ? std::string(key) : path + "." + std::string(key);
    const std::string named = alias.empty() ? where : std::string(alias) + " (at " + where + ")";
    auto it = obj.find(std::string(key));
    if (it == obj.end()) throw SchemaError(named + ": missing required field");
    const bool ok = type == ordered_json::value_t::number_integer ? it->is_number_integer() : it->type() == type;
    if (!ok) throw SchemaError(named + ": wrong type");
    return *it;
}

inline DomainText domains_from_json(const ordered_json& obj, const std::string& path, const std::string& alias_base) {
    if (!obj.is_object()) throw SchemaError(path + ": expected an object");
    DomainText d;
    for (Domain dom : kDomains) {
        const std::string key(domain_key(dom));
        const std::string alias = alias_base.empty() ? std::string{} : alias_base + "." + key;
        d.get(dom) = require(obj, key, path, ordered_json::value_t::string, alias).get<std::string>();
    }
    return d;
}

} // namespace detail

inline std::string serialize_story(const Story& story) {
    ordered_json j = ordered_json::object();
    j["user_input"] = story.user_input;
    j["n_shots"] = story.n_shots;
    ordered_json avatars = ordered_json::array();
    for (const auto& a : story.avatars) {
        ordered_json aj = ordered_json::object();
        aj["id"] = a.id;
        aj["prompt"] = detail::domains_to_json(a.prompt);
        aj["seed"] = a.seed;
        avatars.push_back(std::move(aj));
    }
    j["avatars"] = std::move(avatars);
    ordered_json shots = ordered_json::array();
    for (std::size_t i = 0; i < story.descriptions.size(); ++i) {
        ordered_json sj = ordered_json::object();
        sj["index"] = story.descriptions[i].index;
        sj["short"] = story.descriptions[i].text;
        const ShotScript empty{};
        const ShotScript& s = i < story.scripts.size() ? story.scripts[i] : empty;
        sj["script"] = detail::domains_to_json(s.domains);
        sj["avatar_id"] = s.avatar_id;
        shots.push_back(std::move(sj));
    }
    j["shots"] = std::move(shots);
    return dump_canonical(j);
}

/// Parses and validates a story document. Schema violations name the
/// offending path; referential and index problems raise ValidationError.
inline Story parse_story(std::string_view bytes) {
    ordered_json j;
    try {
        j = ordered_json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("story: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("story: top level must be an object");

    using vt = ordered_json::value_t;
    Story story;
    story.user_input = detail::require(j, "user_input", "", vt::string).get<std::string>();
    story.n_shots = detail::require(j, "n_shots", "", vt::number_integer).get<int>();

    const auto& avatars = detail::require(j, "avatars", "", vt::array);
    for (std::size_t i = 0; i < avatars.size(); ++i) {
        const std::string path = "avatars[" + std::to_string(i) + "]";
        const auto& aj = avatars[i];
        if (!aj.is_object()) throw SchemaError(path + ": expected an object");
        AvatarProfile a;
        a.id = detail::require(aj, "id", path, vt::string).get<std::string>();
        a.prompt = detail::domains_from_json(detail::require(aj, "prompt", path, vt::object), path + ".prompt", "");
        const auto& seed = aj.find("seed");
        if (seed == aj.end()) throw SchemaError(path + ".seed: missing required field");
        if (!seed->is_number_integer()) throw SchemaError(path + ".seed: wrong type");
        a.seed = seed->is_number_unsigned() ? seed->get<std::uint64_t>()
                                            : static_cast<std::uint64_t>(seed->get<std::int64_t>());
        story.avatars.push_back(std::move(a));
    }

    const auto& shots = detail::require(j, "shots", "", vt::array);
    std::set<int> seen;
    for (std::size_t i = 0; i < shots.size(); ++i) {
        const std::string path = "shots[" + std::to_string(i) + "]";
        const std::string alias = "scripts[" + std::to_string(i) + "]";
        const auto& sj = shots[i];
        if (!sj.is_object()) throw SchemaError(path + ": expected an object");
        ShotDescription d;
        const auto& idx = sj.find("index");
        if (idx == sj.end()) throw SchemaError(path + ".index: missing required field");
        if (!idx->is_number_integer()) throw SchemaError(path + ".index: wrong type");
        d.index = idx->get<int>();
        d.text = detail::require(sj, "short", path, vt::string).get<std::string>();
        ShotScript s;
        s.domains = detail::domains_from_json(detail::require(sj, "script", path, vt::object), path + ".script", alias);
        s.avatar_id = detail::require(sj, "avatar_id", path, vt::string, alias + ".avatar_id").get<std::string>();
        s.short_text = d.text;
        if (!seen.insert(d.index).second) {
            throw ValidationError(path + ".index: duplicate shot index " + std::to_string(d.index));
        }
        story.descriptions.push_back(std::move(d));
        story.scripts.push_back(std::move(s));
    }
    if (story.n_shots != static_cast<int>(shots.size())) {
        throw ValidationError("n_shots is " + std::to_string(story.n_shots) + " but the document has " +
                              std::to_string(shots.size()) + " shots");
    }
    validate_story(story);
    return story;
}

} // namespace vgot

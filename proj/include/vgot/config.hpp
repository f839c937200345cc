#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "vgot/context.hpp"
#include "vgot/error.hpp"
#include "vgot/metrics.hpp"
#include "vgot/smooth.hpp"
#include "vgot/story_io.hpp"

namespace vgot {

inline constexpr std::string_view kDefaultUserInput =
    "A lighthouse keeper's daughter grows up on a stormy island and becomes a ship captain.";

struct LlmSettings {
    std::string backend = "mock";
    std::string endpoint;
    double timeout_s = 30.0;
};

/// Every run-level knob. The output directory is deliberately not part of the
/// serialized form so identical runs into different directories hash equal.
struct PipelineConfig {
    std::string user_input{kDefaultUserInput};
    int n_shots = 4;
    std::size_t frames_per_shot = 8;
    SmoothMode mode = SmoothMode::fifo_reset;
    /// Defaults to frames_per_shot when unset.
    std::optional<std::size_t> reset_boundary;
    int steps = 50;
    double beta_start = 0.002;
    double beta_end = 0.4;
    double eta = 0.0;
    LatentShape shape{};
    std::size_t identity_channels = 4;
    std::size_t embed_dim = 16;
    double prior_std = 0.5;
    double scene_weight = 0.3;
    double ip_scale = 1.0;
    std::size_t shots_per_avatar = 6;
    std::uint64_t seed = 0;
    LlmSettings llm;
    std::string encoder = "mock";
    std::string face_extractor = "identity-channels";
    std::string style_extractor = "gram";
    std::size_t style_channels = 4;
    CrossPairing cross_pairing = CrossPairing::consecutive;
    double psnr_peak = 10.0;
    bool batched = false;

    std::filesystem::path output_dir;

    std::size_t effective_reset_boundary() const { return reset_boundary.value_or(frames_per_shot); }

    SmoothConfig smooth() const {
        SmoothConfig s;
        s.mode = mode;
        s.frames_per_shot = frames_per_shot;
        s.reset_boundary = effective_reset_boundary();
        s.eta = eta;
        s.batched = batched;
        return s;
    }

    ToyWorldOptions world() const {
        ToyWorldOptions w;
        w.shape = shape;
        w.identity_channels = identity_channels;
        w.embed_dim = embed_dim;
        w.prior_std = prior_std;
        w.steps = steps;
        w.beta_start = beta_start;
        w.beta_end = beta_end;
        w.eta = eta;
        w.scene_weight = scene_weight;
        return w;
    }

    void validate() const {
        if (trim(user_input).empty()) throw ConfigError("config: user_input is empty");
        if (n_shots < 1) throw ConfigError("config: n_shots must be >= 1");
        if (steps < 1) throw ConfigError("config: steps must be >= 1");
        if (shape.h < 1 || shape.w < 1 || shape.d < 1) throw ConfigError("config: latent dims must be >= 1");
        if (identity_channels < 1 || identity_channels >= shape.d) {
            throw ConfigError("config: identity_channels must lie in [1, d - 1]");
        }
        if (shots_per_avatar < 1) throw ConfigError("config: shots_per_avatar must be >= 1");
        if (style_channels < 1) throw ConfigError("config: style_channels must be >= 1");
        if (!(prior_std >= 0.0)) throw ConfigError("config: prior_std must be >= 0");
        if (!(ip_scale >= 0.0)) throw ConfigError("config: ip_scale must be >= 0");
        if (!(psnr_peak > 0.0)) throw ConfigError("config: psnr_peak must be > 0");
        if (llm.backend != "mock" && llm.backend != "http") {
            throw ConfigError("config: llm.backend must be mock or http, got '" + llm.backend + "'");
        }
        if (llm.backend == "http" && llm.endpoint.empty()) throw ConfigError("config: llm.endpoint is required for http");
        if (!(llm.timeout_s > 0.0)) throw ConfigError("config: llm.timeout_s must be > 0");
        if (encoder != "mock" && encoder != "external") {
            throw ConfigError("config: encoder must be mock or external, got '" + encoder + "'");
        }
        if (face_extractor != "identity-channels") throw ConfigError("config: unknown face extractor '" + face_extractor + "'");
        if (style_extractor != "gram") throw ConfigError("config: unknown style extractor '" + style_extractor + "'");
        smooth().validate();
        // Catches bad beta ranges with the schedule's own message.
        (void)make_schedule(steps, beta_start, beta_end);
    }
};

inline ordered_json config_to_json(const PipelineConfig& c) {
    ordered_json j = ordered_json::object();
    j["user_input"] = c.user_input;
    j["n_shots"] = c.n_shots;
    j["frames_per_shot"] = c.frames_per_shot;
    j["mode"] = std::string(to_string(c.mode));
    j["reset_boundary"] = c.effective_reset_boundary();
    j["steps"] = c.steps;
    j["beta_start"] = c.beta_start;
    j["beta_end"] = c.beta_end;
    j["eta"] = c.eta;
    j["latent"] = ordered_json{{"h", c.shape.h}, {"w", c.shape.w}, {"d", c.shape.d}, {"identity_channels", c.identity_channels}};
    j["embed_dim"] = c.embed_dim;
    j["prior_std"] = c.prior_std;
    j["scene_weight"] = c.scene_weight;
    j["ip_scale"] = c.ip_scale;
    j["shots_per_avatar"] = c.shots_per_avatar;
    j["seed"] = c.seed;
    j["llm"] = ordered_json{{"backend", c.llm.backend}, {"endpoint", c.llm.endpoint}, {"timeout_s", c.llm.timeout_s}};
    j["encoder"] = c.encoder;
    j["extractors"] =
        ordered_json{{"face", c.face_extractor}, {"style", c.style_extractor}, {"style_channels", c.style_channels}};
    j["cross_pairing"] = std::string(to_string(c.cross_pairing));
    j["psnr_peak"] = c.psnr_peak;
    j["batched"] = c.batched;
    return j;
}

inline std::string serialize_config(const PipelineConfig& c) { return dump_canonical(config_to_json(c)); }

namespace detail {

class ConfigReader {
public:
    ConfigReader(const ordered_json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(where("") + "expected an object");
    }

    template <class T>
    void get(std::string_view key, T& out) {
        seen_.insert(std::string(key));
        auto it = obj_.find(std::string(key));
        if (it == obj_.end()) return;
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
                if constexpr (!std::is_same_v<T, int>) {
                    if (!it->is_number_unsigned() && it->template get<std::int64_t>() < 0) {
                        throw ConfigError(where(key) + "must be non-negative");
                    }
                }
            } else if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ConfigError(where(key) + "expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ConfigError(where(key) + "expected a boolean");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw ConfigError(where(key) + "expected a string");
            }
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where(key) + e.what());
        }
    }

    void accept(std::string_view key) { seen_.insert(std::string(key)); }

    const ordered_json* object(std::string_view key) {
        seen_.insert(std::string(key));
        auto it = obj_.find(std::string(key));
        if (it == obj_.end()) return nullptr;
        if (!it->is_object()) throw ConfigError(where(key) + "expected an object");
        return &*it;
    }

    std::string child_path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    void reject_unknown() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + child_path(it.key()) + "'");
        }
    }

private:
    std::string where(std::string_view key) const { return "config: " + child_path(key) + ": "; }

    const ordered_json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace detail

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline PipelineConfig config_from_json(const ordered_json& j, PipelineConfig base = {}) {
    detail::ConfigReader r(j, "");
    PipelineConfig& c = base;
    r.get("user_input", c.user_input);
    r.get("n_shots", c.n_shots);
    r.get("frames_per_shot", c.frames_per_shot);
    std::string mode(to_string(c.mode));
    r.get("mode", mode);
    c.mode = parse_smooth_mode(mode);
    if (j.contains("reset_boundary") && !j["reset_boundary"].is_null()) {
        std::size_t l = 0;
        r.get("reset_boundary", l);
        c.reset_boundary = l;
    } else {
        r.accept("reset_boundary");
    }
    r.get("steps", c.steps);
    r.get("beta_start", c.beta_start);
    r.get("beta_end", c.beta_end);
    r.get("eta", c.eta);
    if (const auto* lat = r.object("latent")) {
        detail::ConfigReader lr(*lat, "latent");
        lr.get("h", c.shape.h);
        lr.get("w", c.shape.w);
        lr.get("d", c.shape.d);
        lr.get("identity_channels", c.identity_channels);
        lr.reject_unknown();
    }
    r.get("embed_dim", c.embed_dim);
    r.get("prior_std", c.prior_std);
    r.get("scene_weight", c.scene_weight);
    r.get("ip_scale", c.ip_scale);
    r.get("shots_per_avatar", c.shots_per_avatar);
    r.get("seed", c.seed);
    if (const auto* llm = r.object("llm")) {
        detail::ConfigReader lr(*llm, "llm");
        lr.get("backend", c.llm.backend);
        lr.get("endpoint", c.llm.endpoint);
        lr.get("timeout_s", c.llm.timeout_s);
        lr.reject_unknown();
    }
    r.get("encoder", c.encoder);
    if (const auto* ex = r.object("extractors")) {
        detail::ConfigReader er(*ex, "extractors");
        er.get("face", c.face_extractor);
        er.get("style", c.style_extractor);
        er.get("style_channels", c.style_channels);
        er.reject_unknown();
    }
    std::string pairing(to_string(c.cross_pairing));
    r.get("cross_pairing", pairing);
    c.cross_pairing = parse_cross_pairing(pairing);
    r.get("psnr_peak", c.psnr_peak);
    r.get("batched", c.batched);
    r.reject_unknown();
    return c;
}

inline PipelineConfig parse_config(std::string_view text, PipelineConfig base = {}) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return config_from_json(j, std::move(base));
}

} // namespace vgot

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "vgot/casting.hpp"
#include "vgot/config.hpp"
#include "vgot/context.hpp"
#include "vgot/llm_http.hpp"
#include "vgot/metrics.hpp"
#include "vgot/script.hpp"
#include "vgot/smooth.hpp"
#include "vgot/story_io.hpp"
#include "vgot/tensor_io.hpp"

namespace vgot {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Component wiring

inline GenerationContext make_context(const PipelineConfig& cfg) {
    if (cfg.encoder != "mock") {
        throw ConfigError("encoder '" + cfg.encoder + "' has no implementation in this build; use the adapter API");
    }
    return make_toy_context(cfg.world(), cfg.seed);
}

inline std::unique_ptr<LlmClient> make_llm(const PipelineConfig& cfg) {
    if (cfg.llm.backend == "http") {
        return std::make_unique<HttpLlmClient>(cfg.llm.endpoint, HttpLlmClient::env_key(),
                                               static_cast<int>(std::ceil(cfg.llm.timeout_s)));
    }
    if (cfg.llm.backend != "mock") throw ConfigError("unknown llm backend '" + cfg.llm.backend + "'");
    return std::make_unique<MockLlmClient>(derive_seed(cfg.seed, "llm"));
}

inline MetricExtractors make_extractors(const PipelineConfig& cfg, const GenerationContext& ctx) {
    if (!ctx.projector) throw ConfigError("metrics need the toy projector for the CLIP readout");
    MetricExtractors ex;
    ex.face = std::make_shared<IdentityChannelExtractor>(cfg.shape, cfg.identity_channels);
    ex.style = std::make_shared<GramStyleExtractor>(cfg.shape, cfg.style_channels, derive_seed(cfg.seed, "style"));
    ex.clip = std::make_shared<MockClipScorer>(ctx.projector, ctx.text_encoder);
    return ex;
}

// ---------------------------------------------------------------------------
// Stages

/// S → descriptions → avatars and assignment → five-domain scripts.
inline Story build_story(std::string_view user_input, const PipelineConfig& cfg, LlmClient& llm) {
    Story story;
    story.user_input = std::string(user_input);
    story.n_shots = cfg.n_shots;
    story.descriptions = expand_story(user_input, cfg.n_shots, llm);
    AvatarPlan plan = derive_avatars(story.descriptions, llm, cfg.shots_per_avatar, cfg.seed);
    story.avatars = std::move(plan.avatars);
    story.scripts.resize(story.descriptions.size());
    for (std::size_t i = 0; i < story.scripts.size(); ++i) story.scripts[i].avatar_id = plan.assignment[i];
    story = generate_script_sequence(std::move(story), llm);
    validate_story(story);
    return story;
}

inline std::uint64_t keyframe_seed(std::uint64_t seed, int shot) { return derive_seed(seed, "keyframe", {shot}); }

/// Renders every avatar, then one keyframe per shot. Keyframes are rounded
/// through float32 so they match what the tensor files hold.
inline std::vector<Keyframe> build_keyframes(const Story& story, const PipelineConfig& cfg,
                                             const GenerationContext& ctx) {
    validate_story(story);
    std::map<std::string, AvatarProfile> rendered;
    for (const auto& a : story.avatars) rendered.emplace(a.id, render_avatar(a, ctx));
    std::vector<Keyframe> out;
    out.reserve(story.scripts.size());
    for (std::size_t i = 0; i < story.scripts.size(); ++i) {
        const auto& script = story.scripts[i];
        const int shot = story.descriptions[i].index;
        Keyframe kf = generate_keyframe(script, rendered.at(script.avatar_id), cfg.ip_scale, ctx,
                                        keyframe_seed(cfg.seed, shot), shot);
        kf.latent = quantize_to_float(kf.latent);
        out.push_back(std::move(kf));
    }
    return out;
}

inline VideoTimeline build_timeline(const Story& story, const std::vector<Keyframe>& keyframes,
                                    const PipelineConfig& cfg, const GenerationContext& ctx) {
    VideoTimeline tl = run_timeline(story, keyframes, cfg.smooth(), cfg.ip_scale, ctx, derive_seed(cfg.seed, "video"));
    for (auto& f : tl.frames) f = quantize_to_float(f);
    return tl;
}

inline MetricsReport evaluate(const VideoTimeline& timeline, const Story& story, const PipelineConfig& cfg,
                              const GenerationContext& ctx) {
    return build_report(timeline, story, make_extractors(cfg, ctx), MetricsOptions{cfg.cross_pairing, cfg.psnr_peak});
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string keyframe_file_name(int shot) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shot_%04d.vgt", shot);
    return buf;
}

inline ordered_json timeline_to_json(const VideoTimeline& tl) {
    ordered_json j = ordered_json::object();
    j["mode"] = std::string(to_string(tl.mode));
    j["frames_per_shot"] = tl.frames_per_shot;
    ordered_json frames = ordered_json::array();
    for (std::size_t i = 0; i < tl.frames.size(); ++i) {
        ordered_json f = ordered_json::object();
        f["global_frame"] = tl.global_frames.at(i);
        f["shot"] = tl.shots.at(i);
        f["mode"] = std::string(to_string(tl.mode));
        if (!tl.emit_ticks.empty()) f["emit_tick"] = tl.emit_ticks.at(i);
        frames.push_back(std::move(f));
    }
    j["frames"] = std::move(frames);
    ordered_json switches = ordered_json::array();
    for (auto t : tl.shot_entry_ticks) switches.push_back(t);
    j["shot_entry_ticks"] = std::move(switches);
    return j;
}

inline std::string serialize_timeline(const VideoTimeline& tl) { return dump_canonical(timeline_to_json(tl)); }

/// Rebuilds a timeline from stored frames: frame f belongs to shot ⌊f / k⌋
/// with k = frames / shots.
inline VideoTimeline timeline_from_frames(std::vector<Frame> frames, const Story& story) {
    const auto n = static_cast<std::size_t>(story.n_shots);
    if (n == 0 || frames.empty() || frames.size() % n != 0) {
        throw ValidationError("frames.vgt holds " + std::to_string(frames.size()) + " frames, not a multiple of " +
                              std::to_string(n) + " shots");
    }
    VideoTimeline tl;
    tl.frames_per_shot = frames.size() / n;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        tl.shots.push_back(static_cast<int>(i / tl.frames_per_shot));
        tl.global_frames.push_back(static_cast<std::int64_t>(i));
    }
    tl.frames = std::move(frames);
    return tl;
}

/// Holds the run directory for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / ".vgot.lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) {
            if (fs::exists(path_)) throw IoError("run directory " + dir.string() + " is locked by another process");
            throw IoError("run directory " + dir.string() + " is not writable");
        }
        std::fclose(f);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
};

/// Creates `dir` if needed and claims it.
inline std::unique_ptr<RunLock> claim_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    return std::make_unique<RunLock>(dir);
}

struct RunArtifacts {
    fs::path dir;
    /// Relative path → SHA-256, sorted by path.
    std::map<std::string, std::string> hashes;
    Story story;
    VideoTimeline timeline;
    MetricsReport report;
};

/// Records every artifact written so a failed run can move them aside.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

    void write(const std::string& rel, std::string_view bytes) {
        const fs::path p = dir_ / rel;
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
        write_file(p, bytes);
        hashes_[rel] = sha256_hex(bytes);
    }

    const std::map<std::string, std::string>& hashes() const noexcept { return hashes_; }

    /// Moves written files under failed/ next to an error record.
    void quarantine(std::string_view stage, const std::exception& e) const {
        const fs::path failed = dir_ / "failed";
        std::error_code ec;
        fs::create_directories(failed, ec);
        for (const auto& [rel, _] : hashes_) {
            const fs::path target = failed / rel;
            fs::create_directories(target.parent_path(), ec);
            fs::rename(dir_ / rel, target, ec);
        }
        ordered_json j = ordered_json::object();
        j["stage"] = std::string(stage);
        j["error"] = e.what();
        std::ofstream(failed / "error.json") << dump_canonical(j);
    }

private:
    fs::path dir_;
    std::map<std::string, std::string> hashes_;
};

inline std::string manifest_json(const std::map<std::string, std::string>& hashes) {
    ordered_json files = ordered_json::object();
    for (const auto& [rel, h] : hashes) files[rel] = h;
    ordered_json j = ordered_json::object();
    j["algorithm"] = "sha256";
    j["files"] = std::move(files);
    return dump_canonical(j);
}

inline void write_keyframes(ArtifactWriter& w, const std::vector<Keyframe>& keyframes) {
    for (const auto& kf : keyframes) {
        w.write("keyframes/" + keyframe_file_name(kf.shot_index), encode_tensor(latent_to_tensor(kf.latent)));
    }
}

/// End-to-end run into cfg.output_dir. The directory is claimed before any
/// model work; a failing stage moves its partial artifacts under failed/ and
/// rethrows with the stage name.
inline RunArtifacts run_pipeline(std::string_view user_input, PipelineConfig cfg) {
    cfg.user_input = std::string(user_input);
    cfg.validate();
    if (cfg.output_dir.empty()) throw ConfigError("run_pipeline: output directory is not set");
    const auto lock = claim_directory(cfg.output_dir);
    {
        std::error_code ec;
        fs::remove_all(cfg.output_dir / "failed", ec);
    }

    RunArtifacts out;
    out.dir = cfg.output_dir;
    ArtifactWriter w(cfg.output_dir);
    std::string stage = "setup";
    auto run_stage = [&](const char* name, auto&& body) {
        stage = name;
        body();
    };
    try {
        w.write("config.json", serialize_config(cfg));
        GenerationContext ctx = make_context(cfg);
        auto llm = make_llm(cfg);
        std::vector<Keyframe> keyframes;

        run_stage("script", [&] {
            out.story = build_story(user_input, cfg, *llm);
            w.write("story.json", serialize_story(out.story));
        });
        run_stage("keyframes", [&] {
            keyframes = build_keyframes(out.story, cfg, ctx);
            write_keyframes(w, keyframes);
        });
        run_stage("video", [&] {
            out.timeline = build_timeline(out.story, keyframes, cfg, ctx);
            w.write("frames.vgt", encode_tensor(frames_to_tensor(out.timeline.frames)));
            w.write("timeline.json", serialize_timeline(out.timeline));
        });
        run_stage("metrics", [&] {
            out.report = evaluate(out.timeline, out.story, cfg, ctx);
            w.write("report.json", serialize_report(out.report));
        });
        run_stage("manifest", [&] {
            const std::string manifest = manifest_json(w.hashes());
            write_file(cfg.output_dir / "manifest.json", manifest);
        });
    } catch (const std::exception& e) {
        w.quarantine(stage, e);
        try {
            throw;
        } catch (const Error&) {
            detail::rethrow_with_prefix("stage " + stage + ": ");
        } catch (const fs::filesystem_error& fe) {
            throw IoError("stage " + stage + ": " + fe.what());
        }
    }
    out.hashes = w.hashes();
    return out;
}

/// Recomputes report.json content from a run directory's frames.vgt and story.json.
inline MetricsReport evaluate_run_dir(const fs::path& dir, const PipelineConfig& cfg) {
    const Story story = parse_story(read_file(dir / "story.json"));
    VideoTimeline tl = timeline_from_frames(tensor_to_frames(read_tensor_file(dir / "frames.vgt")), story);
    const GenerationContext ctx = make_context(cfg);
    return evaluate(tl, story, cfg, ctx);
}

} // namespace vgot

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vgot/pipeline.hpp"

namespace vgot::cli {

namespace fs = std::filesystem;

/// Flags shared by the subcommands that can override config values.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> shots;
    std::optional<std::size_t> frames_per_shot;
    std::optional<std::size_t> reset_boundary;
    std::optional<std::string> mode;
    std::optional<std::string> llm;
    std::optional<std::string> endpoint;
    std::optional<double> ip_scale;
    std::optional<std::size_t> shots_per_avatar;
    bool batched = false;
};

/// Default → config file → flags.
inline PipelineConfig resolve_config(const Overrides& o, const fs::path& fallback_config = {}) {
    PipelineConfig cfg;
    fs::path path = o.config_path;
    if (path.empty() && !fallback_config.empty() && fs::exists(fallback_config)) path = fallback_config;
    if (!path.empty()) cfg = parse_config(read_file(path));
    if (o.seed) cfg.seed = *o.seed;
    if (o.shots) cfg.n_shots = *o.shots;
    if (o.frames_per_shot) cfg.frames_per_shot = *o.frames_per_shot;
    if (o.reset_boundary) cfg.reset_boundary = *o.reset_boundary;
    if (o.mode) cfg.mode = parse_smooth_mode(*o.mode);
    if (o.llm) cfg.llm.backend = *o.llm;
    if (o.endpoint) cfg.llm.endpoint = *o.endpoint;
    if (o.ip_scale) cfg.ip_scale = *o.ip_scale;
    if (o.shots_per_avatar) cfg.shots_per_avatar = *o.shots_per_avatar;
    if (o.batched) cfg.batched = true;
    return cfg;
}

inline void add_config_flag(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config_path, "JSON config file (flags override it)");
}

inline void add_seed_flag(CLI::App* app, Overrides& o) {
    app->add_option("--seed", o.seed, "root seed (default 0)");
}

inline void add_video_flags(CLI::App* app, Overrides& o) {
    app->add_option("--mode", o.mode, "fifo-reset | windowed")->check(CLI::IsMember({"fifo-reset", "windowed"}));
    app->add_option("--frames-per-shot", o.frames_per_shot, "frames per shot k");
    app->add_option("--reset-boundary", o.reset_boundary, "reset boundary length L (default k)");
    app->add_option("--ip-scale", o.ip_scale, "IP embedding weight");
    app->add_flag("--batched", o.batched, "evaluate each FIFO tick as one parallel batch");
}

inline Story load_story(const fs::path& path) { return parse_story(read_file(path)); }

/// Story metadata wins over config for the story's own fields.
inline void adopt_story(PipelineConfig& cfg, const Story& story) {
    cfg.user_input = story.user_input;
    cfg.n_shots = story.n_shots;
}

inline std::vector<Keyframe> load_or_build_keyframes(const Story& story, const PipelineConfig& cfg,
                                                     const GenerationContext& ctx, ArtifactWriter& w,
                                                     const fs::path& dir) {
    std::vector<Keyframe> keyframes;
    bool complete = true;
    for (const auto& d : story.descriptions) {
        const fs::path p = dir / "keyframes" / keyframe_file_name(d.index);
        if (!fs::exists(p)) {
            complete = false;
            break;
        }
        keyframes.push_back(Keyframe{tensor_to_latent(read_tensor_file(p)), d.index,
                                     story.scripts[static_cast<std::size_t>(d.index)].avatar_id});
    }
    if (complete) return keyframes;
    keyframes = build_keyframes(story, cfg, ctx);
    write_keyframes(w, keyframes);
    return keyframes;
}

inline int cmd_script(const std::string& input, const fs::path& out_path, const Overrides& o, std::ostream& out) {
    PipelineConfig cfg = resolve_config(o);
    cfg.user_input = input;
    cfg.validate();
    auto llm = make_llm(cfg);
    const Story story = build_story(input, cfg, *llm);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_file(out_path, serialize_story(story));
    out << "wrote " << out_path.string() << " (" << story.n_shots << " shots, " << story.avatars.size()
        << " avatars)\n";
    return 0;
}

inline int cmd_keyframes(const fs::path& story_path, const fs::path& dir, const Overrides& o, std::ostream& out) {
    const Story story = load_story(story_path);
    PipelineConfig cfg = resolve_config(o);
    adopt_story(cfg, story);
    cfg.validate();
    const auto lock = claim_directory(dir);
    const GenerationContext ctx = make_context(cfg);
    ArtifactWriter w(dir);
    const auto keyframes = build_keyframes(story, cfg, ctx);
    w.write("config.json", serialize_config(cfg));
    w.write("story.json", serialize_story(story));
    write_keyframes(w, keyframes);
    out << "wrote " << keyframes.size() << " keyframes to " << (dir / "keyframes").string() << "\n";
    return 0;
}

inline int cmd_generate(const fs::path& story_path, const fs::path& dir, const Overrides& o, std::ostream& out) {
    const Story story = load_story(story_path);
    PipelineConfig cfg = resolve_config(o);
    adopt_story(cfg, story);
    cfg.validate();
    const auto lock = claim_directory(dir);
    const GenerationContext ctx = make_context(cfg);
    ArtifactWriter w(dir);
    const auto keyframes = load_or_build_keyframes(story, cfg, ctx, w, dir);
    const VideoTimeline tl = build_timeline(story, keyframes, cfg, ctx);
    w.write("config.json", serialize_config(cfg));
    w.write("story.json", serialize_story(story));
    w.write("frames.vgt", encode_tensor(frames_to_tensor(tl.frames)));
    w.write("timeline.json", serialize_timeline(tl));
    out << "wrote " << tl.frames.size() << " frames (" << to_string(tl.mode) << ") to " << dir.string() << "\n";
    return 0;
}

inline int cmd_metrics(const fs::path& dir, const fs::path& report_path, const Overrides& o, std::ostream& out) {
    const PipelineConfig cfg = resolve_config(o, dir / "config.json");
    cfg.validate();
    const MetricsReport r = evaluate_run_dir(dir, cfg);
    const fs::path target = report_path.empty() ? dir / "report.json" : report_path;
    write_file(target, serialize_report(r));
    out << render_report_table(r);
    return 0;
}

inline int cmd_run(const std::optional<std::string>& input, const fs::path& dir, const Overrides& o,
                   std::ostream& out) {
    PipelineConfig cfg = resolve_config(o);
    cfg.output_dir = dir;
    const std::string text = input ? *input : cfg.user_input;
    const RunArtifacts a = run_pipeline(text, cfg);
    out << render_report_table(a.report);
    out << "artifacts in " << dir.string() << " (manifest.json lists " << a.hashes.size() << " files)\n";
    return 0;
}

/// Exit codes: 0 success; 1 usage, validation or configuration error; 2 I/O or transport error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Multi-shot video generation pipeline on a toy diffusion backend", "vgot"};
    app.require_subcommand(1);
    Overrides o;

    std::string input;
    std::optional<std::string> run_input;
    std::string story_path, out_path, run_dir, report_path;

    auto* script = app.add_subcommand("script", "expand a one-line story into shot scripts");
    script->add_option("--input", input, "one-sentence story")->required();
    script->add_option("--shots", o.shots, "number of shots N");
    script->add_option("--llm", o.llm, "mock | http")->check(CLI::IsMember({"mock", "http"}));
    script->add_option("--endpoint", o.endpoint, "chat endpoint for --llm http");
    script->add_option("--shots-per-avatar", o.shots_per_avatar, "shots sharing one avatar");
    script->add_option("--out", out_path, "story file to write")->required();
    add_seed_flag(script, o);
    add_config_flag(script, o);

    auto* keyframes = app.add_subcommand("keyframes", "render avatars and one keyframe per shot");
    keyframes->add_option("--story", story_path, "story file")->required();
    keyframes->add_option("--out", out_path, "output directory")->required();
    keyframes->add_option("--ip-scale", o.ip_scale, "IP embedding weight");
    add_seed_flag(keyframes, o);
    add_config_flag(keyframes, o);

    auto* generate = app.add_subcommand("generate", "generate the smoothed frame timeline");
    generate->add_option("--story", story_path, "story file")->required();
    generate->add_option("--out", out_path, "output directory (reuses keyframes/ if present)")->required();
    add_video_flags(generate, o);
    add_seed_flag(generate, o);
    add_config_flag(generate, o);

    auto* metrics = app.add_subcommand("metrics", "score a generated run");
    metrics->add_option("--run", run_dir, "run directory with frames.vgt and story.json")->required();
    metrics->add_option("--report", report_path, "report file (default <run>/report.json)");
    add_config_flag(metrics, o);

    auto* run = app.add_subcommand("run", "end-to-end pipeline");
    run->add_option("--input", run_input, "one-sentence story (default: config user_input)");
    run->add_option("--out", out_path, "run directory")->default_val("vgot-run");
    run->add_option("--shots", o.shots, "number of shots N");
    run->add_option("--llm", o.llm, "mock | http")->check(CLI::IsMember({"mock", "http"}));
    run->add_option("--endpoint", o.endpoint, "chat endpoint for --llm http");
    add_video_flags(run, o);
    add_seed_flag(run, o);
    add_config_flag(run, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (*script) return cmd_script(input, out_path, o, out);
        if (*keyframes) return cmd_keyframes(story_path, out_path, o, out);
        if (*generate) return cmd_generate(story_path, out_path, o, out);
        if (*metrics) return cmd_metrics(run_dir, report_path, o, out);
        if (*run) return cmd_run(run_input, out_path, o, out);
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "io error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace vgot::cli

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "vgot/pipeline.hpp"

using namespace vgot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vgot-test-pipeline-" + name);
    fs::remove_all(p);
    return p;
}

std::string hex(std::string_view bytes) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : bytes) {
        if (!out.empty()) out += ' ';
        out += digits[c >> 4];
        out += digits[c & 0xF];
    }
    return out;
}

Tensor random_tensor(std::uint64_t seed) {
    GaussianStream g(seed);
    Tensor t;
    const auto rank = static_cast<std::size_t>(seed % 4) + 1;
    for (std::size_t i = 0; i < rank; ++i) t.dims.push_back(static_cast<std::uint32_t>(1 + (seed + 3 * i) % 5));
    for (std::size_t i = 0; i < t.element_count(); ++i) t.data.push_back(static_cast<float>(g.next() * 1e3));
    return t;
}

} // namespace

TEST(TensorFormat, RankOneHeaderBytes) {
    const std::string bytes = encode_tensor(Tensor{{1}, {1.0f}});
    EXPECT_EQ(hex(bytes), "56 47 4F 54 01 01 01 00 00 00 00 00 80 3F");
}

TEST(TensorFormat, RoundTripIsBitwise) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        Tensor t = random_tensor(s);
        if (s == 7 && !t.data.empty()) t.data[0] = -0.0f;
        const Tensor back = decode_tensor(encode_tensor(t));
        ASSERT_EQ(back.dims, t.dims);
        ASSERT_EQ(back.data.size(), t.data.size());
        EXPECT_EQ(std::memcmp(back.data.data(), t.data.data(), 4 * t.data.size()), 0);
    }
}

TEST(TensorFormat, Errors) {
    std::string bytes = encode_tensor(Tensor{{2}, {1.0f, 2.0f}});
    std::string bad = bytes;
    bad[3] = 'X';
    EXPECT_THROW(decode_tensor(bad), FormatError);
    bad = bytes;
    bad[4] = 2;
    EXPECT_THROW(decode_tensor(bad), FormatError);
    EXPECT_THROW(decode_tensor(bytes.substr(0, bytes.size() - 1)), LengthError);
    EXPECT_THROW(decode_tensor(bytes.substr(0, 7)), LengthError);
    EXPECT_THROW(decode_tensor(bytes + "x"), LengthError);
    EXPECT_THROW(encode_tensor(Tensor{{3}, {1.0f}}), ShapeError);
}

TEST(TensorFormat, FilesAndFrames) {
    const fs::path dir = scratch("tensor");
    fs::create_directories(dir);
    const auto frames = std::vector<FrameLatent>{gaussian_latent(LatentShape{2, 3, 4}, 1), gaussian_latent(LatentShape{2, 3, 4}, 2)};
    write_tensor_file(dir / "f.vgt", frames_to_tensor(frames));
    const auto back = tensor_to_frames(read_tensor_file(dir / "f.vgt"));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], quantize_to_float(frames[0]));
    EXPECT_THROW(read_tensor_file(dir / "missing.vgt"), IoError);
    fs::remove_all(dir);
}

TEST(Config, RoundTripAndUnknownKeys) {
    PipelineConfig cfg;
    cfg.n_shots = 6;
    cfg.mode = SmoothMode::windowed;
    cfg.seed = 42;
    cfg.llm.endpoint = "http://localhost:1/x";
    const std::string text = serialize_config(cfg);
    EXPECT_EQ(serialize_config(parse_config(text)), text);
    EXPECT_THROW(parse_config(R"({"n_shot": 4})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"latent": {"h": 8, "depth": 3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"n_shots": "four"})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"mode": "fifo"})"), ConfigError);
    EXPECT_THROW(parse_config("{"), ConfigError);
    EXPECT_EQ(parse_config(R"({"reset_boundary": null})").effective_reset_boundary(), 8u);
    EXPECT_EQ(parse_config(R"({"reset_boundary": 3})").effective_reset_boundary(), 3u);
}

TEST(Config, Validation) {
    PipelineConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.identity_channels = 8;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.llm.backend = "http";
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.beta_end = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.encoder = "external";
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_THROW(make_context(cfg), ConfigError);
}

TEST(RunPipeline, ArtifactsAndDeterminism) {
    const fs::path a = scratch("run-a");
    const fs::path b = scratch("run-b");
    PipelineConfig cfg;
    cfg.output_dir = a;
    const auto ra = run_pipeline(cfg.user_input, cfg);
    cfg.output_dir = b;
    const auto rb = run_pipeline(cfg.user_input, cfg);
    EXPECT_EQ(ra.hashes, rb.hashes);
    EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));

    for (const char* f : {"config.json", "story.json", "frames.vgt", "timeline.json", "report.json", "manifest.json",
                          "keyframes/shot_0000.vgt", "keyframes/shot_0003.vgt"}) {
        EXPECT_TRUE(fs::exists(a / f)) << f;
    }
    EXPECT_FALSE(fs::exists(a / ".vgot.lock"));
    const auto frames = read_tensor_file(a / "frames.vgt");
    EXPECT_EQ(frames.dims, (std::vector<std::uint32_t>{32, 8, 8, 8}));
    const auto tl = nlohmann::json::parse(read_file(a / "timeline.json"));
    EXPECT_EQ(tl["frames"].size(), 32u);

    const auto manifest = nlohmann::json::parse(read_file(a / "manifest.json"));
    for (const auto& [rel, h] : manifest["files"].items()) EXPECT_EQ(sha256_hex(read_file(a / rel)), h) << rel;

    // config.json reproduces the run.
    PipelineConfig again = parse_config(read_file(a / "config.json"));
    const fs::path c = scratch("run-c");
    again.output_dir = c;
    EXPECT_EQ(run_pipeline(again.user_input, again).hashes, ra.hashes);

    // Report recomputed from frames + story matches the stored one.
    EXPECT_EQ(serialize_report(evaluate_run_dir(a, cfg)), read_file(a / "report.json"));
    for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST(RunPipeline, SeedChangesOutput) {
    const fs::path a = scratch("seed-a");
    const fs::path b = scratch("seed-b");
    PipelineConfig cfg;
    cfg.n_shots = 2;
    cfg.output_dir = a;
    const auto ra = run_pipeline(cfg.user_input, cfg);
    cfg.seed = 1;
    cfg.output_dir = b;
    const auto rb = run_pipeline(cfg.user_input, cfg);
    EXPECT_NE(ra.hashes.at("frames.vgt"), rb.hashes.at("frames.vgt"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(RunPipeline, UnwritableDirectoryFailsFast) {
    const fs::path base = scratch("blocked");
    fs::create_directories(base);
    write_file(base / "file", "x");
    PipelineConfig cfg;
    cfg.output_dir = base / "file" / "run";
    EXPECT_THROW(run_pipeline(cfg.user_input, cfg), IoError);

    // A held lock also stops the run before any model work.
    const fs::path locked = base / "locked";
    fs::create_directories(locked);
    write_file(locked / ".vgot.lock", "");
    cfg.output_dir = locked;
    EXPECT_THROW(run_pipeline(cfg.user_input, cfg), IoError);
    EXPECT_FALSE(fs::exists(locked / "config.json"));
    fs::remove_all(base);
}

TEST(RunPipeline, FailedStageIsQuarantined) {
    const fs::path dir = scratch("failed");
    PipelineConfig cfg;
    cfg.output_dir = dir;
    cfg.llm.backend = "http";
    cfg.llm.endpoint = "http://127.0.0.1:9/none";
    cfg.llm.timeout_s = 1;
    try {
        run_pipeline(cfg.user_input, cfg);
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_NE(std::string(e.what()).find("stage script"), std::string::npos) << e.what();
    }
    EXPECT_TRUE(fs::exists(dir / "failed" / "error.json"));
    EXPECT_TRUE(fs::exists(dir / "failed" / "config.json"));
    EXPECT_FALSE(fs::exists(dir / "config.json"));
    const auto err = nlohmann::json::parse(read_file(dir / "failed" / "error.json"));
    EXPECT_EQ(err["stage"], "script");

    // A later good run clears the marker.
    cfg.llm = LlmSettings{};
    run_pipeline(cfg.user_input, cfg);
    EXPECT_FALSE(fs::exists(dir / "failed"));
    fs::remove_all(dir);
}

TEST(Timeline, RebuiltLabels) {
    auto cfg = fixture::config(3, 0);
    const auto story = fixture::story(cfg);
    std::vector<Frame> frames(24, Frame(cfg.shape, 0.0));
    const auto tl = timeline_from_frames(frames, story);
    EXPECT_EQ(tl.frames_per_shot, 8u);
    EXPECT_EQ(tl.shots[7], 0);
    EXPECT_EQ(tl.shots[8], 1);
    frames.pop_back();
    EXPECT_THROW(timeline_from_frames(frames, story), ValidationError);
}

TEST(Hash, KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"

using namespace vgot;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "vgot");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = vgot::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vgot-test-cli-" + name);
    fs::remove_all(p);
    return p;
}

std::vector<int> timeline_labels(const fs::path& dir) {
    const auto j = nlohmann::json::parse(read_file(dir / "timeline.json"));
    std::vector<int> out;
    for (const auto& f : j["frames"]) out.push_back(f["shot"].get<int>());
    return out;
}

} // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(invoke({}).code, 1);
    const auto r = invoke({"run", "--frobnicate"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_EQ(invoke({"generate", "--story", "x.json", "--out", "d", "--mode", "sideways"}).code, 1);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("codes");
    fs::create_directories(dir);
    // Missing story file: I/O.
    EXPECT_EQ(invoke({"keyframes", "--story", (dir / "none.json").string(), "--out", (dir / "k").string()}).code, 2);
    // Malformed story: validation.
    write_file(dir / "bad.json", R"({"user_input": "x"})");
    EXPECT_EQ(invoke({"keyframes", "--story", (dir / "bad.json").string(), "--out", (dir / "k").string()}).code, 1);
    // Bad config key: configuration.
    write_file(dir / "cfg.json", R"({"colour": "red"})");
    EXPECT_EQ(invoke({"run", "--config", (dir / "cfg.json").string(), "--out", (dir / "r").string()}).code, 1);
    // Unreachable LLM endpoint: transport.
    EXPECT_EQ(invoke({"script", "--input", "x", "--llm", "http", "--endpoint", "http://127.0.0.1:9/v1", "--out",
                   (dir / "s.json").string()})
                  .code,
              2);
    // Corrupt frames file: format errors count as I/O.
    const fs::path run = dir / "run";
    ASSERT_EQ(invoke({"run", "--shots", "1", "--out", run.string()}).code, 0);
    write_file(run / "frames.vgt", "VGOX");
    EXPECT_EQ(invoke({"metrics", "--run", run.string()}).code, 2);
    fs::remove_all(dir);
}

TEST(Cli, StagewiseMatchesEndToEnd) {
    const fs::path dir = scratch("stages");
    const fs::path e2e = dir / "e2e";
    const fs::path staged = dir / "staged";
    const auto r = invoke({"run", "--out", e2e.string(), "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("FC"), std::string::npos);

    const std::string story = (dir / "story.json").string();
    ASSERT_EQ(invoke({"script", "--input", std::string(kDefaultUserInput), "--out", story, "--seed", "3"}).code, 0);
    EXPECT_EQ(read_file(story), read_file(e2e / "story.json"));
    ASSERT_EQ(invoke({"keyframes", "--story", story, "--out", staged.string(), "--seed", "3"}).code, 0);
    ASSERT_EQ(invoke({"generate", "--story", story, "--out", staged.string(), "--seed", "3"}).code, 0);
    const auto m = invoke({"metrics", "--run", staged.string()});
    ASSERT_EQ(m.code, 0) << m.err;

    for (const char* f : {"config.json", "story.json", "frames.vgt", "timeline.json", "report.json",
                          "keyframes/shot_0002.vgt"}) {
        EXPECT_EQ(read_file(staged / f), read_file(e2e / f)) << f;
    }
    fs::remove_all(dir);
}

TEST(Cli, MetricsReproducesReport) {
    const fs::path dir = scratch("metrics");
    ASSERT_EQ(invoke({"run", "--out", dir.string(), "--shots", "3"}).code, 0);
    const std::string before = read_file(dir / "report.json");
    fs::remove(dir / "report.json");
    ASSERT_EQ(invoke({"metrics", "--run", dir.string()}).code, 0);
    EXPECT_EQ(read_file(dir / "report.json"), before);
    ASSERT_EQ(invoke({"metrics", "--run", dir.string(), "--report", (dir / "copy.json").string()}).code, 0);
    EXPECT_EQ(read_file(dir / "copy.json"), before);
    fs::remove_all(dir);
}

TEST(Cli, SingleShotPrintsNullCross) {
    const fs::path dir = scratch("single");
    ASSERT_EQ(invoke({"run", "--out", dir.string(), "--shots", "1"}).code, 0);
    const auto m = invoke({"metrics", "--run", dir.string()});
    ASSERT_EQ(m.code, 0);
    EXPECT_NE(m.out.find("null"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, ModesShareLabels) {
    const fs::path dir = scratch("modes");
    const std::string story = (dir / "story.json").string();
    ASSERT_EQ(invoke({"script", "--input", "Two sisters sail around the world.", "--shots", "3", "--out", story}).code, 0);
    ASSERT_EQ(invoke({"generate", "--story", story, "--mode", "fifo-reset", "--out", (dir / "f").string()}).code, 0);
    ASSERT_EQ(invoke({"generate", "--story", story, "--mode", "windowed", "--out", (dir / "w").string()}).code, 0);
    const auto f = timeline_labels(dir / "f");
    EXPECT_EQ(f.size(), 24u);
    EXPECT_EQ(f, timeline_labels(dir / "w"));
    fs::remove_all(dir);
}

TEST(Cli, FlagsAreEchoedIntoConfig) {
    const fs::path dir = scratch("echo");
    ASSERT_EQ(invoke({"run", "--out", dir.string(), "--shots", "2", "--frames-per-shot", "4", "--mode", "windowed",
                   "--ip-scale", "0.5", "--seed", "11"})
                  .code,
              0);
    const auto cfg = parse_config(read_file(dir / "config.json"));
    EXPECT_EQ(cfg.n_shots, 2);
    EXPECT_EQ(cfg.frames_per_shot, 4u);
    EXPECT_EQ(cfg.mode, SmoothMode::windowed);
    EXPECT_EQ(cfg.ip_scale, 0.5);
    EXPECT_EQ(cfg.seed, 11u);

    // Config file, then flags on top.
    write_file(dir.parent_path() / "vgot-test-cli-echo.json", R"({"n_shots": 3, "seed": 5})");
    const fs::path dir2 = scratch("echo2");
    ASSERT_EQ(invoke({"run", "--out", dir2.string(), "--config", (dir.parent_path() / "vgot-test-cli-echo.json").string(),
                   "--seed", "6", "--frames-per-shot", "2"})
                  .code,
              0);
    const auto cfg2 = parse_config(read_file(dir2 / "config.json"));
    EXPECT_EQ(cfg2.n_shots, 3);
    EXPECT_EQ(cfg2.seed, 6u);
    fs::remove_all(dir);
    fs::remove_all(dir2);
    fs::remove(dir.parent_path() / "vgot-test-cli-echo.json");
}

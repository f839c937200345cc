// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "vgot.hpp"

using namespace vgot;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> check;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

struct Prepared {
    PipelineConfig cfg;
    GenerationContext ctx;
    Story story;
    std::vector<Keyframe> keyframes;
};

Prepared prepare(PipelineConfig cfg) {
    Prepared p;
    p.cfg = std::move(cfg);
    p.ctx = make_context(p.cfg);
    p.story = fixture::story(p.cfg);
    p.keyframes = build_keyframes(p.story, p.cfg, p.ctx);
    return p;
}

MetricsReport report_for(PipelineConfig cfg) {
    const auto p = prepare(std::move(cfg));
    return evaluate(build_timeline(p.story, p.keyframes, p.cfg, p.ctx), p.story, p.cfg, p.ctx);
}

Outcome diffusion_exactness() {
    const auto s = make_schedule(50, 0.002, 0.4);
    const auto betas = oracle::linear_betas(50, 0.002L, 0.4L);
    double worst_sched = 0.0;
    for (int t = 1; t <= 50; ++t) {
        const long double want = oracle::alpha_bar(betas, t);
        worst_sched = std::max(worst_sched, static_cast<double>(std::fabs((s.alpha_bar(t) - want) / want)));
        worst_sched = std::max(worst_sched, std::fabs(s.alpha_bar(t) / s.alpha_bar(t - 1) - s.alpha(t)));
    }
    const LatentShape shape{1, 1, 4};
    double worst_inv = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto x0 = gaussian_latent(shape, derive_seed(17, "x0", {i}));
        const auto eps = gaussian_latent(shape, derive_seed(17, "eps", {i}));
        const int t = 1 + static_cast<int>(derive_seed(17, "t", {i}) % 50);
        const auto back = ddim_step(add_noise(x0, eps, t, s), eps, t, 0, s);
        for (std::size_t j = 0; j < shape.size(); ++j) worst_inv = std::max(worst_inv, std::fabs(back[j] - x0[j]));
    }
    return {worst_inv <= 1e-9 && worst_sched <= 1e-12,
            fmt("max inversion error %.2e, max schedule error %.2e", worst_inv, worst_sched)};
}

Outcome sampling_fidelity() {
    ToyWorldOptions opt;
    opt.prior_std = 0.5;
    const auto ctx = make_toy_context(opt, 0);
    const auto c = make_condition(ctx.text_encoder->encode("a lighthouse on a cliff"),
                                  ctx.image_encoder->encode(gaussian_latent(ctx.shape, 1)), 1.0);
    const auto mu = ctx.projector->mean(c);
    const std::size_t n = ctx.shape.size();
    std::vector<double> sum(n, 0.0), sq(n, 0.0);
    const int draws = 2000;
    for (int seed = 0; seed < draws; ++seed) {
        const auto x = ctx.sample(c, static_cast<std::uint64_t>(seed));
        for (std::size_t i = 0; i < n; ++i) {
            sum[i] += x[i];
            sq[i] += x[i] * x[i];
        }
    }
    double worst_mean = 0.0, worst_sd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = sum[i] / draws;
        const double sd = std::sqrt(sq[i] / draws - m * m);
        worst_mean = std::max(worst_mean, std::fabs(m - mu[i]));
        worst_sd = std::max(worst_sd, std::fabs(sd - 0.5) / 0.5);
    }
    return {worst_mean <= 0.1 && worst_sd <= 0.2,
            fmt("max |mean - mu| %.4f, max relative sd error %.2f%%", worst_mean, 100.0 * worst_sd)};
}

struct FifoTrace {
    std::vector<EmittedFrame> emitted;
    std::vector<DenoiseRecord> records;
};

FifoTrace fifo_trace(int shots, int steps) {
    auto cfg = fixture::config(shots, 0);
    cfg.steps = steps;
    const auto p = prepare(cfg);
    const auto plan = build_shot_plan(p.story, p.keyframes, cfg.ip_scale, p.ctx);
    auto trace = std::make_shared<DenoiseTrace>();
    const TracingDenoiser denoiser(p.ctx.denoiser, plan, trace);
    const SmoothConfig sc = cfg.smooth();
    LatentQueue q = init_queue(plan, sc, p.ctx.schedule, p.ctx.shape, 1);
    const auto total = static_cast<std::int64_t>(plan.size() * sc.frames_per_shot);
    FifoTrace out;
    while (q.emitted < total) {
        if (auto f = tick(q, denoiser, p.ctx.schedule, plan, sc)) out.emitted.push_back(std::move(*f));
    }
    out.records = trace->records();
    return out;
}

Outcome fifo_invariants() {
    const int T = 20;
    const std::int64_t k = 8;
    const auto run = fifo_trace(3, T);
    int violations = 0;
    for (std::size_t i = 0; i < run.emitted.size(); ++i)
        violations += run.emitted[i].global_frame != static_cast<std::int64_t>(i);
    std::map<std::int64_t, std::vector<int>> levels;
    for (const auto& r : run.records) {
        if (r.global_frame < 0) continue;
        levels[r.global_frame].push_back(r.level);
        violations += r.condition_shot != r.global_frame / k;
    }
    for (const auto& e : run.emitted) {
        const auto& l = levels[e.global_frame];
        bool ok = l.size() == static_cast<std::size_t>(T);
        for (std::size_t j = 0; ok && j < l.size(); ++j) ok = l[j] == T - static_cast<int>(j);
        violations += !ok;
    }
    const bool pass = run.emitted.size() == 24 && levels.size() == 24 && violations == 0;
    return {pass, fmt("%.0f frames emitted, %.0f trace records, %.0f violations", static_cast<double>(run.emitted.size()),
                      static_cast<double>(run.records.size()), violations)};
}

Outcome reset_overlap() {
    const auto run = fifo_trace(3, 20);
    std::int64_t first_shot1 = -1, last_shot0 = -1;
    for (const auto& r : run.records)
        if (r.condition_shot == 1 && (first_shot1 < 0 || r.tick < first_shot1)) first_shot1 = r.tick;
    for (const auto& e : run.emitted)
        if (e.shot == 0) last_shot0 = std::max(last_shot0, e.tick);
    // Slot arithmetic: shot 1 enters at tick k and is first denoised at k + 1;
    // frame k − 1 leaves at tick k − 1 + T.
    const bool pass = first_shot1 == 9 && last_shot0 == 27 && first_shot1 < last_shot0;
    return {pass, fmt("first shot-1 denoise at tick %.0f, last shot-0 emit at tick %.0f, window %.0f ticks",
                      static_cast<double>(first_shot1), static_cast<double>(last_shot0),
                      static_cast<double>(last_shot0 - first_shot1 + 1))};
}

Outcome mode_agreement() {
    auto cfg = fixture::config(4, 0);
    cfg.prior_std = 0.0;
    auto p = prepare(cfg);
    const auto fifo = build_timeline(p.story, p.keyframes, p.cfg, p.ctx);
    p.cfg.mode = SmoothMode::windowed;
    const auto win = build_timeline(p.story, p.keyframes, p.cfg, p.ctx);
    double worst = 0.0;
    bool shape_ok = fifo.frames.size() == win.frames.size() && fifo.shots == win.shots;
    for (std::size_t i = 0; shape_ok && i < fifo.frames.size(); ++i)
        for (std::size_t j = 0; j < fifo.frames[i].size(); ++j)
            worst = std::max(worst, std::fabs(fifo.frames[i][j] - win.frames[i][j]));
    return {shape_ok && worst <= 2e-4, fmt("max elementwise difference %.2e over %.0f frames", worst,
                                           static_cast<double>(fifo.frames.size()))};
}

Outcome ablation_direction() {
    double with_ip = 0.0, without_ip = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = fixture::config(4, seed);
        with_ip += *report_for(cfg).fc_cross / 5.0;
        cfg.ip_scale = 0.0;
        without_ip += *report_for(cfg).fc_cross / 5.0;
    }
    return {with_ip - without_ip >= 0.05,
            fmt("fc_cross ip=1.0: %.4f, ip=0.0: %.4f, gap %.4f", with_ip, without_ip, with_ip - without_ip)};
}

Outcome within_over_cross() {
    int ok = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = report_for(fixture::config(4, seed));
        const bool good = r.fc_within && r.fc_cross && r.sc_within && r.sc_cross && *r.fc_within > *r.fc_cross &&
                          *r.sc_within >= *r.sc_cross;
        ok += good;
        if (seed == 0) detail = fmt("seed 0: FC %.4f > %.4f", *r.fc_within, *r.fc_cross) +
                                fmt(", SC %.4f >= %.4f", *r.sc_within, *r.sc_cross);
    }
    return {ok == 5, std::to_string(ok) + "/5 seeds; " + detail};
}

Outcome metric_units() {
    const double r = 1.0 / std::sqrt(2.0);
    const LatentShape tiny{1, 1, 2};
    VideoTimeline tl;
    tl.frames = {Frame(tiny, {1, 0}), Frame(tiny, {0, 1}), Frame(tiny, {r, r})};
    tl.shots = {0, 0, 0};
    class Raw final : public FeatureExtractor {
        std::vector<double> extract(const Frame& f) const override { return {f[0], f[1]}; }
        std::string name() const override { return "raw"; }
        std::size_t dim() const override { return 2; }
    };
    const double fc = *consistency_scores(tl, Raw{}).within;
    const LatentShape s{1, 1, 4};
    const double p0 = psnr(Frame(s, 0.0), Frame(s, 1.0), 1.0);
    const double p20 = psnr(Frame(s, 0.0), Frame(s, 0.1), 1.0);
    TokenMatrix q(1, 2), k(2, 2), v(2, 2);
    q << 2, 0;
    k << 1, 0, -1, 0;
    v << 1, 0, 0, 1;
    const double att = attention(q, k, v)(0, 0);
    const bool pass = std::fabs(fc - 0.4714) <= 1e-3 && std::fabs(p0) <= 1e-3 && std::fabs(p20 - 20.0) <= 1e-3 &&
                      std::fabs(att - 0.9442) <= 1e-3;
    return {pass, fmt("within-FC %.4f, PSNR %.4f / %.4f dB", fc, p0, p20) + fmt(", attention %.4f", att)};
}

Outcome script_module() {
    const auto story = fixture::story(fixture::config(30, 0));
    bool domains_ok = story.scripts.size() == 30;
    for (const auto& sc : story.scripts)
        for (Domain d : kDomains) domains_ok = domains_ok && !trim(sc.domains.get(d)).empty();
    const std::string bytes = serialize_story(story);
    const bool round_trip = serialize_story(parse_story(bytes)) == bytes;

    class Recording : public LlmClient {
    public:
        std::string complete(std::string_view instruction, std::string_view context) override {
            contexts.emplace_back(context);
            return mock.complete(instruction, context);
        }
        MockLlmClient mock;
        std::vector<std::string> contexts;
    } rec;
    Story seq = story;
    const Story done = generate_script_sequence(seq, rec);
    bool ordered = rec.contexts.size() == 30;
    for (std::size_t i = 1; ordered && i < rec.contexts.size(); ++i)
        ordered = rec.contexts[i].find(done.scripts[i - 1].domains.full_text()) != std::string::npos;
    return {domains_ok && round_trip && ordered,
            std::string("30 scripts x 5 domains: ") + (domains_ok ? "yes" : "no") +
                ", byte-identical round trip: " + (round_trip ? "yes" : "no") +
                ", sequential order: " + (ordered ? "yes" : "no")};
}

Outcome end_to_end_determinism() {
    const fs::path base = fs::temp_directory_path() / "vgot-acceptance";
    fs::remove_all(base);
    std::ostringstream sink;
    auto run = [&](const fs::path& dir) {
        const std::string out = dir.string();
        const char* argv[] = {"vgot", "run", "--out", out.c_str()};
        return vgot::cli::run(4, argv, sink, sink);
    };
    const int ca = run(base / "a");
    const int cb = run(base / "b");
    const bool same = ca == 0 && cb == 0 && read_file(base / "a" / "manifest.json") == read_file(base / "b" / "manifest.json");

    int bitwise = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        GaussianStream g(seed);
        Tensor t;
        const std::size_t rank = 1 + seed % 4;
        for (std::size_t i = 0; i < rank; ++i) t.dims.push_back(static_cast<std::uint32_t>(1 + (seed + i) % 6));
        for (std::size_t i = 0; i < t.element_count(); ++i) t.data.push_back(static_cast<float>(g.next()));
        const std::string bytes = encode_tensor(t);
        const Tensor back = decode_tensor(bytes);
        bitwise += back.dims == t.dims && back.data.size() == t.data.size() &&
                   std::memcmp(back.data.data(), t.data.data(), 4 * t.data.size()) == 0 && encode_tensor(back) == bytes;
    }
    fs::remove_all(base);
    return {same && bitwise == 100, std::string("manifests identical: ") + (same ? "yes" : "no") + ", tensors bitwise " +
                                        std::to_string(bitwise) + "/100"};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "diffusion exactness", 1.0, diffusion_exactness},
        {2, "sampling fidelity", 30.0, sampling_fidelity},
        {3, "FIFO structural invariants", 5.0, fifo_invariants},
        {4, "reset-boundary overlap", 0.0, reset_overlap},
        {5, "mode agreement at convergence", 10.0, mode_agreement},
        {6, "IP ablation direction", 60.0, ablation_direction},
        {7, "within > cross ordering", 0.0, within_over_cross},
        {8, "metric unit values", 0.0, metric_units},
        {9, "script module", 0.0, script_module},
        {10, "end-to-end determinism", 0.0, end_to_end_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += fmt(" (over the %.0f s budget)", c.budget_s);
        }
        failed += !o.pass;
        std::printf("[%s] %2d %-30s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

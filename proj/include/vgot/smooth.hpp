#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "vgot/casting.hpp"
#include "vgot/context.hpp"
#include "vgot/diffusion.hpp"
#include "vgot/error.hpp"
#include "vgot/shot_video.hpp"

namespace vgot {

enum class SmoothMode {
    /// Each shot is its own temporal window; clips are concatenated.
    windowed,
    /// One continuous FIFO queue; every shot enters with fresh noise and its own condition.
    fifo_reset,
};

constexpr std::string_view to_string(SmoothMode m) noexcept {
    return m == SmoothMode::windowed ? "windowed" : "fifo-reset";
}

inline SmoothMode parse_smooth_mode(std::string_view s) {
    if (s == "windowed") return SmoothMode::windowed;
    if (s == "fifo-reset") return SmoothMode::fifo_reset;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected windowed or fifo-reset)");
}

struct SmoothConfig {
    SmoothMode mode = SmoothMode::fifo_reset;
    std::size_t frames_per_shot = 8;
    /// L: leading frames of each shot that enter the queue with reset noise.
    /// Frames past L reuse the noise of the same slot one shot earlier.
    std::size_t reset_boundary = 8;
    double eta = 0.0;
    /// Evaluate all slots of a tick before applying any update.
    bool batched = false;
    /// Worker threads for batched ticks; 0 picks hardware concurrency.
    std::size_t workers = 0;

    void validate() const {
        if (frames_per_shot < 1) throw ConfigError("frames per shot must be >= 1");
        if (reset_boundary < 1) throw ConfigError("reset boundary length must be >= 1");
        if (reset_boundary > frames_per_shot) throw ConfigError("reset boundary length cannot exceed frames per shot");
        if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
    }
};

struct QueueSlot {
    FrameLatent latent;
    /// Current step index; the slot holds x_level.
    int level = 0;
    std::int64_t global_frame = 0;
    int shot = 0;
    /// Warm-up slot created by init_queue; never emitted.
    bool dummy = false;
    Condition condition;
};

/// Latents at staggered noise levels, head = lowest level.
struct LatentQueue {
    std::deque<QueueSlot> slots;
    LatentShape shape;
    std::uint64_t seed = 0;
    std::int64_t ticks = 0;
    std::int64_t emitted = 0;
    std::int64_t next_frame = 0;
    /// Tick at which each shot's first slot entered the queue.
    std::vector<std::int64_t> shot_entry_ticks;

    /// Levels are 1, 2, … from head to tail and global frames are consecutive.
    /// `steps` is the full length outside of drain.
    bool invariant_holds(int steps, bool draining) const {
        if (!draining && static_cast<int>(slots.size()) != steps) return false;
        for (std::size_t p = 0; p < slots.size(); ++p) {
            if (slots[p].level != static_cast<int>(p) + 1) return false;
            if (p > 0 && slots[p].global_frame != slots[p - 1].global_frame + 1) return false;
        }
        return true;
    }
};

struct EmittedFrame {
    std::int64_t global_frame = 0;
    int shot = 0;
    std::int64_t tick = 0;
    Frame frame;
};

// ---------------------------------------------------------------------------
// Decoding

class FrameDecoder {
public:
    virtual ~FrameDecoder() = default;
    virtual Frame decode(const FrameLatent& z) const = 0;
};

/// Toy decoder: the latent is the frame.
inline Frame decode(const FrameLatent& z) { return z; }

class IdentityDecoder final : public FrameDecoder {
public:
    Frame decode(const FrameLatent& z) const override { return vgot::decode(z); }
};

// ---------------------------------------------------------------------------
// Instrumentation

struct DenoiseRecord {
    std::int64_t tick = 0;
    std::int64_t global_frame = 0;
    int level = 0;
    /// Index of the plan condition the call carried; -1 if none matched.
    int condition_shot = -1;
};

class DenoiseTrace {
public:
    void append(const DenoiseRecord& r) {
        std::lock_guard lock(mutex_);
        records_.push_back(r);
    }

    std::vector<DenoiseRecord> records() const {
        std::lock_guard lock(mutex_);
        return records_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<DenoiseRecord> records_;
};

/// Wraps a backend and logs (tick, frame, level, shot-of-condition) for every call.
class TracingDenoiser final : public DenoiserBackend {
public:
    TracingDenoiser(std::shared_ptr<const DenoiserBackend> inner, std::vector<Condition> plan,
                    std::shared_ptr<DenoiseTrace> trace)
        : inner_(std::move(inner)), plan_(std::move(plan)), trace_(std::move(trace)) {
        if (!inner_ || !trace_) throw ConfigError("TracingDenoiser needs a backend and a trace");
    }

private:
    FrameLatent do_predict(const FrameLatent& x_t, int t, const Condition& c, const NoiseSchedule& schedule,
                           DenoiseTag tag) const override {
        int shot = -1;
        for (std::size_t j = 0; j < plan_.size() && shot < 0; ++j)
            if (plan_[j] == c) shot = static_cast<int>(j);
        trace_->append({tag.tick, tag.frame, t, shot});
        return inner_->predict_noise(x_t, t, c, schedule, tag);
    }

    std::shared_ptr<const DenoiserBackend> inner_;
    std::vector<Condition> plan_;
    std::shared_ptr<DenoiseTrace> trace_;
};

// ---------------------------------------------------------------------------
// FIFO queue

/// Seed of the initial noise for real frame `global_frame`. Frames inside the
/// reset boundary (the first L of each shot) draw their own stream; later
/// frames reuse the stream of the same position one shot earlier.
inline std::uint64_t fifo_noise_seed(std::uint64_t seed, std::int64_t global_frame, const SmoothConfig& cfg) {
    const auto k = static_cast<std::int64_t>(cfg.frames_per_shot);
    const auto boundary = static_cast<std::int64_t>(cfg.reset_boundary);
    std::int64_t source = global_frame;
    while (source >= k && source % k >= boundary) source -= k;
    return derive_seed(seed, "fifo-noise", {source});
}

/// Queue of T slots at levels 1..T. Slot p holds global frame p − T + 1; the
/// T − 1 warm-up slots with negative frame numbers are dummies.
inline LatentQueue init_queue(const std::vector<Condition>& plan, const SmoothConfig& cfg,
                              const NoiseSchedule& schedule, LatentShape shape, std::uint64_t seed) {
    if (plan.empty()) throw ConfigError("init_queue: empty shot plan");
    cfg.validate();
    const int steps = schedule.steps();
    LatentQueue q;
    q.shape = shape;
    q.seed = seed;
    for (int p = 0; p < steps; ++p) {
        QueueSlot slot;
        slot.level = p + 1;
        slot.global_frame = p - steps + 1;
        slot.dummy = slot.global_frame < 0;
        slot.shot = 0;
        slot.condition = plan.front();
        if (slot.dummy) {
            // Pure noise at the variance of its level.
            slot.latent = gaussian_latent(shape, derive_seed(seed, "fifo-warmup", {p}));
            const double scale = std::sqrt(1.0 - schedule.alpha_bar(slot.level));
            for (auto& v : slot.latent.values()) v *= scale;
        } else {
            slot.latent = gaussian_latent(shape, fifo_noise_seed(seed, slot.global_frame, cfg));
        }
        q.slots.push_back(std::move(slot));
    }
    q.next_frame = 1;
    q.shot_entry_ticks.push_back(0);
    return q;
}

namespace detail {

inline void advance_slot(QueueSlot& slot, const FrameLatent& eps, const NoiseSchedule& schedule,
                         const SmoothConfig& cfg, std::uint64_t seed) {
    if (cfg.eta > 0.0) {
        const FrameLatent z =
            gaussian_latent(slot.latent.shape(), derive_seed(seed, "fifo-eta", {slot.global_frame, slot.level}));
        slot.latent = ddim_step(slot.latent, eps, slot.level, slot.level - 1, schedule, cfg.eta, &z);
    } else {
        slot.latent = ddim_step(slot.latent, eps, slot.level, slot.level - 1, schedule);
    }
    slot.level -= 1;
}

} // namespace detail

/// One engine step. Every slot takes one DDIM step at its own level under its
/// own condition; the head (now at level 0) is dequeued and decoded; a fresh
/// noise slot enters at level T carrying the condition of the shot that owns
/// its frame. Once the plan is exhausted nothing is enqueued and the queue drains.
inline std::optional<EmittedFrame> tick(LatentQueue& q, const DenoiserBackend& denoiser, const NoiseSchedule& schedule,
                                        const std::vector<Condition>& plan, const SmoothConfig& cfg) {
    if (q.slots.empty()) throw StateError("tick: queue is empty");
    const std::int64_t now = q.ticks + 1;
    const std::size_t n = q.slots.size();

    if (cfg.batched) {
        std::vector<FrameLatent> eps(n);
        const std::size_t workers =
            std::max<std::size_t>(1, std::min(n, cfg.workers ? cfg.workers : std::thread::hardware_concurrency()));
        const std::size_t chunk = (n + workers - 1) / workers;
        std::vector<std::future<void>> jobs;
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            const std::size_t end = std::min(n, begin + chunk);
            jobs.push_back(std::async(std::launch::async, [&, begin, end] {
                for (std::size_t p = begin; p < end; ++p) {
                    const auto& s = q.slots[p];
                    eps[p] = denoiser.predict_noise(s.latent, s.level, s.condition, schedule, {s.global_frame, now});
                }
            }));
        }
        for (auto& j : jobs) j.get();
        for (std::size_t p = 0; p < n; ++p) detail::advance_slot(q.slots[p], eps[p], schedule, cfg, q.seed);
    } else {
        for (auto& s : q.slots) {
            const FrameLatent eps =
                denoiser.predict_noise(s.latent, s.level, s.condition, schedule, {s.global_frame, now});
            detail::advance_slot(s, eps, schedule, cfg, q.seed);
        }
    }

    QueueSlot head = std::move(q.slots.front());
    q.slots.pop_front();
    if (head.level != 0) throw StateError("tick: head slot did not reach level 0");

    const auto k = static_cast<std::int64_t>(cfg.frames_per_shot);
    const auto total = static_cast<std::int64_t>(plan.size()) * k;
    if (q.next_frame < total) {
        QueueSlot slot;
        slot.level = schedule.steps();
        slot.global_frame = q.next_frame;
        slot.shot = static_cast<int>(q.next_frame / k);
        slot.condition = plan[static_cast<std::size_t>(slot.shot)];
        slot.latent = gaussian_latent(q.shape, fifo_noise_seed(q.seed, slot.global_frame, cfg));
        if (q.next_frame % k == 0) q.shot_entry_ticks.push_back(now);
        q.slots.push_back(std::move(slot));
        ++q.next_frame;
    }
    q.ticks = now;

    if (head.dummy) return std::nullopt;
    ++q.emitted;
    return EmittedFrame{head.global_frame, head.shot, now, decode(head.latent)};
}

// ---------------------------------------------------------------------------
// Timelines

struct VideoTimeline {
    SmoothMode mode = SmoothMode::fifo_reset;
    std::size_t frames_per_shot = 0;
    std::vector<Frame> frames;
    std::vector<int> shots;
    std::vector<std::int64_t> global_frames;
    /// fifo-reset only: tick at which each frame left the queue.
    std::vector<std::int64_t> emit_ticks;
    /// fifo-reset only: tick at which each shot's conditioning entered the queue.
    std::vector<std::int64_t> shot_entry_ticks;

    std::size_t shot_count() const {
        return shots.empty() ? 0 : static_cast<std::size_t>(*std::max_element(shots.begin(), shots.end())) + 1;
    }
};

/// Per-shot conditions, one per story shot, in shot order.
inline std::vector<Condition> build_shot_plan(const Story& story, const std::vector<Keyframe>& keyframes,
                                              double ip_scale, const GenerationContext& ctx) {
    std::vector<Condition> plan;
    plan.reserve(story.descriptions.size());
    for (const auto& d : story.descriptions) {
        auto it = std::find_if(keyframes.begin(), keyframes.end(),
                               [&](const Keyframe& kf) { return kf.shot_index == d.index; });
        if (it == keyframes.end()) throw StateError("missing keyframe for shot " + std::to_string(d.index));
        plan.push_back(shot_condition(d, *it, ip_scale, ctx));
    }
    if (plan.empty()) throw ConfigError("story has no shots");
    return plan;
}

/// Drives the FIFO queue until every real frame of the plan has been emitted.
inline VideoTimeline run_fifo_reset(const std::vector<Condition>& plan, const SmoothConfig& cfg,
                                    const GenerationContext& ctx, std::uint64_t seed) {
    ctx.check();
    LatentQueue q = init_queue(plan, cfg, ctx.schedule, ctx.shape, seed);
    const auto total = static_cast<std::int64_t>(plan.size() * cfg.frames_per_shot);

    VideoTimeline tl;
    tl.mode = SmoothMode::fifo_reset;
    tl.frames_per_shot = cfg.frames_per_shot;
    while (q.emitted < total) {
        auto out = tick(q, *ctx.denoiser, ctx.schedule, plan, cfg);
        if (!out) continue;
        if (out->global_frame != static_cast<std::int64_t>(tl.frames.size())) {
            throw StateError("fifo: emitted frame " + std::to_string(out->global_frame) + " out of order");
        }
        tl.frames.push_back(std::move(out->frame));
        tl.shots.push_back(out->shot);
        tl.global_frames.push_back(out->global_frame);
        tl.emit_ticks.push_back(out->tick);
    }
    tl.shot_entry_ticks = q.shot_entry_ticks;
    return tl;
}

/// Shots generated independently and concatenated.
inline VideoTimeline run_windowed(const Story& story, const std::vector<Keyframe>& keyframes, const SmoothConfig& cfg,
                                  double ip_scale, const GenerationContext& ctx, std::uint64_t seed) {
    VideoTimeline tl;
    tl.mode = SmoothMode::windowed;
    tl.frames_per_shot = cfg.frames_per_shot;
    for (const auto& d : story.descriptions) {
        auto it = std::find_if(keyframes.begin(), keyframes.end(),
                               [&](const Keyframe& kf) { return kf.shot_index == d.index; });
        if (it == keyframes.end()) throw StateError("missing keyframe for shot " + std::to_string(d.index));
        ShotClip clip = generate_shot_clip(d, *it, cfg.frames_per_shot, ip_scale, ctx, seed);
        for (auto& f : clip.frames) {
            tl.global_frames.push_back(static_cast<std::int64_t>(tl.frames.size()));
            tl.frames.push_back(decode(f));
            tl.shots.push_back(d.index);
        }
    }
    return tl;
}

inline VideoTimeline run_timeline(const Story& story, const std::vector<Keyframe>& keyframes, const SmoothConfig& cfg,
                                  double ip_scale, const GenerationContext& ctx, std::uint64_t seed) {
    cfg.validate();
    if (story.descriptions.empty()) throw StateError("run_timeline: story has no shot descriptions");
    if (cfg.mode == SmoothMode::windowed) return run_windowed(story, keyframes, cfg, ip_scale, ctx, seed);
    return run_fifo_reset(build_shot_plan(story, keyframes, ip_scale, ctx), cfg, ctx, seed);
}

} // namespace vgot

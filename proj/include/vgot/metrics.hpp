#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vgot/conditioning.hpp"
#include "vgot/error.hpp"
#include "vgot/script.hpp"
#include "vgot/smooth.hpp"
#include "vgot/story_io.hpp"

namespace vgot {

// ---------------------------------------------------------------------------
// Feature extractors

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<double> extract(const Frame& frame) const = 0;
    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
};

/// Face features: spatial mean of the identity channels.
class IdentityChannelExtractor final : public FeatureExtractor {
public:
    IdentityChannelExtractor(LatentShape shape, std::size_t identity_channels)
        : shape_(shape), channels_(identity_channels) {
        if (channels_ < 1 || channels_ > shape.d) {
            throw ConfigError("identity extractor needs 1.." + std::to_string(shape.d) + " channels");
        }
    }

    std::vector<double> extract(const Frame& frame) const override {
        check_shape(frame);
        std::vector<double> out(channels_, 0.0);
        for (std::size_t p = 0; p < shape_.pixels(); ++p)
            for (std::size_t c = 0; c < channels_; ++c) out[c] += frame[p * shape_.d + c];
        for (auto& v : out) v /= static_cast<double>(shape_.pixels());
        return out;
    }

    std::string name() const override { return "identity-channels"; }
    std::size_t dim() const override { return channels_; }

private:
    void check_shape(const Frame& f) const {
        if (f.shape() != shape_) throw ShapeError("identity extractor: frame shape " + f.shape().str());
    }

    LatentShape shape_;
    std::size_t channels_;
};

/// Style features: Gram matrix of a fixed seeded per-pixel map to m channels.
class GramStyleExtractor final : public FeatureExtractor {
public:
    GramStyleExtractor(LatentShape shape, std::size_t feature_channels, std::uint64_t seed)
        : shape_(shape), map_(static_cast<Eigen::Index>(feature_channels), static_cast<Eigen::Index>(shape.d)) {
        if (feature_channels < 1) throw ConfigError("gram extractor needs at least one feature channel");
        GaussianStream g(derive_seed(seed, "gram-style"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(shape.d));
        for (Eigen::Index i = 0; i < map_.rows(); ++i)
            for (Eigen::Index c = 0; c < map_.cols(); ++c) map_(i, c) = scale * g.next();
    }

    Eigen::MatrixXd gram(const Frame& frame) const {
        if (frame.shape() != shape_) throw ShapeError("gram extractor: frame shape " + frame.shape().str());
        // Rows are pixels, columns channels (channels-last storage).
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
            frame.values().data(), static_cast<Eigen::Index>(shape_.pixels()), static_cast<Eigen::Index>(shape_.d));
        const Eigen::MatrixXd f = x * map_.transpose();
        return (f.transpose() * f) / static_cast<double>(shape_.pixels());
    }

    std::vector<double> extract(const Frame& frame) const override {
        const Eigen::MatrixXd g = gram(frame);
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(g.size()));
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) out.push_back(g(i, j));
        return out;
    }

    std::string name() const override { return "gram"; }
    std::size_t dim() const override { return static_cast<std::size_t>(map_.rows() * map_.rows()); }

private:
    LatentShape shape_;
    Eigen::MatrixXd map_;
};

/// Inception-score hook. No toy implementation: IS needs a real classifier.
class IsClassifier {
public:
    virtual ~IsClassifier() = default;
    virtual double inception_score(std::span<const Frame> frames) const = 0;
};

// ---------------------------------------------------------------------------
// Consistency

enum class CrossPairing { consecutive, all_pairs, same_avatar };

constexpr std::string_view to_string(CrossPairing p) noexcept {
    switch (p) {
    case CrossPairing::consecutive: return "consecutive";
    case CrossPairing::all_pairs: return "all-pairs";
    case CrossPairing::same_avatar: return "same-avatar";
    }
    return "consecutive";
}

inline CrossPairing parse_cross_pairing(std::string_view s) {
    if (s == "consecutive") return CrossPairing::consecutive;
    if (s == "all-pairs") return CrossPairing::all_pairs;
    if (s == "same-avatar") return CrossPairing::same_avatar;
    throw ConfigError("unknown cross pairing '" + std::string(s) + "'");
}

struct ConsistencyScores {
    std::optional<double> within;
    std::optional<double> cross;
};

using FeatureVector = std::vector<double>;

/// Mean pairwise cosine among one shot's features; nullopt for fewer than two.
inline std::optional<double> within_shot_similarity(std::span<const FeatureVector> features) {
    if (features.size() < 2) return std::nullopt;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < features.size(); ++a)
        for (std::size_t b = a + 1; b < features.size(); ++b, ++pairs) sum += cosine(features[a], features[b]);
    return sum / static_cast<double>(pairs);
}

inline FeatureVector mean_feature(std::span<const FeatureVector> features) {
    if (features.empty()) throw InputError("mean_feature: no features");
    FeatureVector m(features.front().size(), 0.0);
    for (const auto& f : features) {
        if (f.size() != m.size()) throw ShapeError("mean_feature: feature length mismatch");
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += f[i];
    }
    for (auto& v : m) v /= static_cast<double>(features.size());
    return m;
}

/// Shot pairs scored for the cross-shot value.
inline std::vector<std::pair<std::size_t, std::size_t>> cross_pairs(std::size_t shots, CrossPairing pairing,
                                                                    std::span<const std::string> avatars = {}) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (pairing == CrossPairing::same_avatar && avatars.size() != shots) {
        throw InputError("same-avatar pairing needs one avatar id per shot");
    }
    for (std::size_t a = 0; a < shots; ++a) {
        for (std::size_t b = a + 1; b < shots; ++b) {
            if (pairing == CrossPairing::consecutive && b != a + 1) continue;
            if (pairing == CrossPairing::same_avatar && avatars[a] != avatars[b]) continue;
            out.emplace_back(a, b);
        }
    }
    return out;
}

/// Within = mean over shots of within_shot_similarity; cross = mean over the
/// selected shot pairs of the cosine between shot-mean features.
inline ConsistencyScores consistency_from_features(const std::vector<std::vector<FeatureVector>>& per_shot,
                                                   CrossPairing pairing = CrossPairing::consecutive,
                                                   std::span<const std::string> avatars = {}) {
    if (per_shot.empty()) throw InputError("consistency: no shots");
    ConsistencyScores s;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& shot : per_shot) {
        if (auto w = within_shot_similarity(shot)) {
            sum += *w;
            ++n;
        }
    }
    if (n > 0) s.within = sum / static_cast<double>(n);

    std::vector<FeatureVector> means;
    means.reserve(per_shot.size());
    for (const auto& shot : per_shot) {
        if (shot.empty()) throw InputError("consistency: a shot has no frames");
        means.push_back(mean_feature(shot));
    }
    const auto pairs = cross_pairs(per_shot.size(), pairing, avatars);
    if (!pairs.empty()) {
        double c = 0.0;
        for (auto [a, b] : pairs) c += cosine(means[a], means[b]);
        s.cross = c / static_cast<double>(pairs.size());
    }
    return s;
}

/// Frames grouped by shot label, in label order.
inline std::vector<std::vector<const Frame*>> frames_by_shot(const VideoTimeline& timeline) {
    if (timeline.frames.empty()) throw InputError("timeline has no frames");
    if (timeline.shots.size() != timeline.frames.size()) {
        throw ValidationError("timeline has " + std::to_string(timeline.frames.size()) + " frames but " +
                              std::to_string(timeline.shots.size()) + " shot labels");
    }
    std::vector<std::vector<const Frame*>> out(timeline.shot_count());
    for (std::size_t i = 0; i < timeline.frames.size(); ++i) {
        if (timeline.shots[i] < 0) throw ValidationError("timeline: negative shot label at frame " + std::to_string(i));
        out[static_cast<std::size_t>(timeline.shots[i])].push_back(&timeline.frames[i]);
    }
    return out;
}

inline ConsistencyScores consistency_scores(const VideoTimeline& timeline, const FeatureExtractor& extractor,
                                            CrossPairing pairing = CrossPairing::consecutive,
                                            std::span<const std::string> avatars = {}) {
    const auto groups = frames_by_shot(timeline);
    std::vector<std::vector<FeatureVector>> features(groups.size());
    for (std::size_t s = 0; s < groups.size(); ++s)
        for (const Frame* f : groups[s]) features[s].push_back(extractor.extract(*f));
    return consistency_from_features(features, pairing, avatars);
}

// ---------------------------------------------------------------------------
// PSNR

inline constexpr double kPsnrCap = 100.0;

/// 10·log10(max² / MSE), capped at 100 dB.
inline double psnr(const Frame& a, const Frame& b, double max_value) {
    if (a.shape() != b.shape()) throw ShapeError("psnr: shapes " + a.shape().str() + " and " + b.shape().str());
    if (!(max_value > 0.0) || !std::isfinite(max_value)) throw ConfigError("psnr: max value must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

struct PsnrSummary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t pairs = 0;
};

/// PSNR over consecutive frames inside each shot.
inline std::optional<PsnrSummary> psnr_consecutive(const VideoTimeline& timeline, double max_value) {
    PsnrSummary s;
    double sum = 0.0;
    for (const auto& shot : frames_by_shot(timeline)) {
        for (std::size_t i = 1; i < shot.size(); ++i) {
            const double v = psnr(*shot[i - 1], *shot[i], max_value);
            s.min = s.pairs == 0 ? v : std::min(s.min, v);
            s.max = s.pairs == 0 ? v : std::max(s.max, v);
            sum += v;
            ++s.pairs;
        }
    }
    if (s.pairs == 0) return std::nullopt;
    s.mean = sum / static_cast<double>(s.pairs);
    return s;
}

// ---------------------------------------------------------------------------
// CLIP-style alignment

class ClipScorer {
public:
    virtual ~ClipScorer() = default;
    /// Mean text/frame alignment over `frames`, in [−1, 1].
    virtual double score(std::span<const Frame* const> frames, std::string_view text) const = 0;
};

/// Reads each frame back into the conditioning space and takes the cosine
/// with the text embedding.
class MockClipScorer final : public ClipScorer {
public:
    MockClipScorer(std::shared_ptr<const ConditionProjector> projector, std::shared_ptr<const TextEncoder> encoder)
        : projector_(std::move(projector)), encoder_(std::move(encoder)) {
        if (!projector_ || !encoder_) throw ConfigError("mock CLIP scorer needs a projector and a text encoder");
    }

    double score(std::span<const Frame* const> frames, std::string_view text) const override {
        if (frames.empty()) throw InputError("clip score: no frames");
        const Embedding e = encoder_->encode(text);
        double sum = 0.0;
        for (const Frame* f : frames) {
            const Eigen::VectorXd v = projector_->read_composed(*f);
            sum += cosine(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), e.values);
        }
        return sum / static_cast<double>(frames.size());
    }

private:
    std::shared_ptr<const ConditionProjector> projector_;
    std::shared_ptr<const TextEncoder> encoder_;
};

inline double clip_score_mock(std::span<const Frame* const> frames, const ShotScript& script, Domain domain,
                              const ClipScorer& scorer) {
    if (frames.empty()) throw InputError("clip score: no frames");
    return scorer.score(frames, script.domains.get(domain));
}

inline double clip_score_mock(std::span<const Frame* const> frames, const ShotScript& script,
                              std::string_view domain, const ClipScorer& scorer) {
    const auto d = domain_from_key(domain);
    if (!d) throw InputError("clip score: unknown domain '" + std::string(domain) + "'");
    return clip_score_mock(frames, script, *d, scorer);
}

// ---------------------------------------------------------------------------
// Report

struct MetricsReport {
    std::optional<double> fc_within;
    std::optional<double> fc_cross;
    std::optional<double> sc_within;
    std::optional<double> sc_cross;
    std::optional<PsnrSummary> psnr_pairs;
    std::array<double, kDomains.size()> clip_by_domain{};
    std::size_t shots = 0;
    std::size_t frames = 0;
};

struct MetricExtractors {
    std::shared_ptr<const FeatureExtractor> face;
    std::shared_ptr<const FeatureExtractor> style;
    std::shared_ptr<const ClipScorer> clip;
};

struct MetricsOptions {
    CrossPairing pairing = CrossPairing::consecutive;
    /// Peak value used by PSNR.
    double psnr_peak = 10.0;
};

inline MetricsReport build_report(const VideoTimeline& timeline, const Story& story, const MetricExtractors& ex,
                                  const MetricsOptions& opt = {}) {
    if (!ex.face || !ex.style || !ex.clip) throw ConfigError("build_report: extractor missing");
    const auto groups = frames_by_shot(timeline);
    if (groups.size() != story.scripts.size()) {
        throw ValidationError("timeline covers " + std::to_string(groups.size()) + " shots but the story has " +
                              std::to_string(story.scripts.size()));
    }
    for (std::size_t s = 0; s < groups.size(); ++s) {
        if (groups[s].empty()) throw ValidationError("timeline has no frames for shot " + std::to_string(s));
    }
    std::vector<std::string> avatars;
    for (const auto& sc : story.scripts) avatars.push_back(sc.avatar_id);

    MetricsReport r;
    r.shots = groups.size();
    r.frames = timeline.frames.size();
    const auto fc = consistency_scores(timeline, *ex.face, opt.pairing, avatars);
    const auto sc = consistency_scores(timeline, *ex.style, opt.pairing, avatars);
    r.fc_within = fc.within;
    r.fc_cross = fc.cross;
    r.sc_within = sc.within;
    r.sc_cross = sc.cross;
    r.psnr_pairs = psnr_consecutive(timeline, opt.psnr_peak);
    for (std::size_t d = 0; d < kDomains.size(); ++d) {
        double sum = 0.0;
        for (std::size_t s = 0; s < groups.size(); ++s)
            sum += clip_score_mock(groups[s], story.scripts[s], kDomains[d], *ex.clip);
        r.clip_by_domain[d] = sum / static_cast<double>(groups.size());
    }
    return r;
}

inline ordered_json report_to_json(const MetricsReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json j = ordered_json::object();
    j["fc_within"] = opt(r.fc_within);
    j["fc_cross"] = opt(r.fc_cross);
    j["sc_within"] = opt(r.sc_within);
    j["sc_cross"] = opt(r.sc_cross);
    if (r.psnr_pairs) {
        j["psnr_pairs"] = ordered_json{{"mean", r.psnr_pairs->mean},
                                       {"min", r.psnr_pairs->min},
                                       {"max", r.psnr_pairs->max},
                                       {"count", r.psnr_pairs->pairs}};
    } else {
        j["psnr_pairs"] = nullptr;
    }
    ordered_json clip = ordered_json::object();
    for (std::size_t d = 0; d < kDomains.size(); ++d) clip[std::string(domain_key(kDomains[d]))] = r.clip_by_domain[d];
    j["clip_by_domain"] = std::move(clip);
    j["counts"] = ordered_json{{"shots", r.shots}, {"frames", r.frames}};
    return j;
}

inline std::string serialize_report(const MetricsReport& r) { return dump_canonical(report_to_json(r)); }

/// Two-column text table in the layout of the usual consistency table.
inline std::string render_report_table(const MetricsReport& r) {
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("null");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    auto row = [](std::string_view name, const std::string& a, const std::string& b) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-22s %12s %12s\n", std::string(name).c_str(), a.c_str(), b.c_str());
        return std::string(buf);
    };
    std::string out = row("metric", "within-shot", "cross-shot");
    out += row("FC", cell(r.fc_within), cell(r.fc_cross));
    out += row("SC", cell(r.sc_within), cell(r.sc_cross));
    out += row("PSNR (dB, mean)", cell(r.psnr_pairs ? std::optional(r.psnr_pairs->mean) : std::nullopt), "-");
    for (std::size_t d = 0; d < kDomains.size(); ++d) {
        out += row("CLIP(" + std::string(domain_key(kDomains[d])) + ")", cell(r.clip_by_domain[d]), "-");
    }
    out += row("shots / frames", std::to_string(r.shots), std::to_string(r.frames));
    return out;
}

} // namespace vgot

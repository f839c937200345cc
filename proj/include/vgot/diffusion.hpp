#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vgot/conditioning.hpp"
#include "vgot/error.hpp"
#include "vgot/latent.hpp"
#include "vgot/random.hpp"

namespace vgot {

/// β_t / ᾱ_t table. Steps are 1-based; ᾱ_0 ≡ 1 means "fully denoised".
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    /// Builds the table from explicit betas (each in (0, 1)).
    explicit NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
        if (betas_.empty()) throw ConfigError("noise schedule needs at least one step");
        alphas_.reserve(betas_.size());
        alpha_bars_.reserve(betas_.size());
        double running = 1.0;
        for (std::size_t i = 0; i < betas_.size(); ++i) {
            const double b = betas_[i];
            if (!(b > 0.0 && b < 1.0)) {
                throw ConfigError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) + " is outside (0, 1)");
            }
            alphas_.push_back(1.0 - b);
            running *= 1.0 - b;
            alpha_bars_.push_back(running);
        }
        if (!(alpha_bars_.back() > 0.0)) throw ConfigError("noise schedule underflows: alpha_bar_T is zero");
    }

    int steps() const noexcept { return static_cast<int>(betas_.size()); }

    double beta(int t) const { return betas_[index(t)]; }
    double alpha(int t) const { return alphas_[index(t)]; }
    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bars_[index(t)];
    }

    std::span<const double> betas() const noexcept { return betas_; }
    std::span<const double> alphas() const noexcept { return alphas_; }
    std::span<const double> alpha_bars() const noexcept { return alpha_bars_; }

    void check_step(int t, const char* what) const {
        if (t < 1 || t > steps()) {
            throw RangeError(std::string(what) + ": step " + std::to_string(t) + " outside [1, " +
                             std::to_string(steps()) + "]");
        }
    }

private:
    std::size_t index(int t) const {
        check_step(t, "noise schedule");
        return static_cast<std::size_t>(t - 1);
    }

    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
};

/// Linear β from beta_start to beta_end inclusive over T steps.
inline NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("make_schedule: step count must be >= 1, got " + std::to_string(steps));
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ConfigError("make_schedule: need 0 < beta_start <= beta_end < 1, got [" + std::to_string(beta_start) +
                          ", " + std::to_string(beta_end) + "]");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
        betas[static_cast<std::size_t>(t)] = beta_start + (beta_end - beta_start) * frac;
    }
    return NoiseSchedule(std::move(betas));
}

/// x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε
inline FrameLatent add_noise(const FrameLatent& x0, const FrameLatent& eps, int t, const NoiseSchedule& schedule) {
    require_same_shape(x0, eps, "add_noise");
    schedule.check_step(t, "add_noise");
    const double a = schedule.alpha_bar(t);
    const double sa = std::sqrt(a);
    const double sn = std::sqrt(1.0 - a);
    FrameLatent out(x0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sa * x0[i] + sn * eps[i];
    return out;
}

/// One DDIM update from step t to t_prev through the predicted x0.
///
/// With eta = 0 the update is deterministic. For eta > 0 `noise` must hold a
/// standard normal latent; σ follows the usual DDIM variance.
inline FrameLatent ddim_step(const FrameLatent& x_t, const FrameLatent& eps_hat, int t, int t_prev,
                             const NoiseSchedule& schedule, double eta = 0.0, const FrameLatent* noise = nullptr) {
    require_same_shape(x_t, eps_hat, "ddim_step");
    if (t_prev >= t) {
        throw SchedulingError("ddim_step: t_prev (" + std::to_string(t_prev) + ") must be below t (" +
                              std::to_string(t) + ")");
    }
    if (t_prev < 0) throw RangeError("ddim_step: t_prev must be >= 0");
    schedule.check_step(t, "ddim_step");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("ddim_step: eta must lie in [0, 1]");
    if (!x_t.all_finite() || !eps_hat.all_finite()) throw NumericError("ddim_step: non-finite input");

    const double a_t = schedule.alpha_bar(t);
    const double a_prev = schedule.alpha_bar(t_prev);
    const double sa_t = std::sqrt(a_t);
    const double sn_t = std::sqrt(1.0 - a_t);
    const double sa_prev = std::sqrt(a_prev);

    double sigma = 0.0;
    if (eta > 0.0) {
        if (noise == nullptr) throw ConfigError("ddim_step: eta > 0 requires a noise latent");
        require_same_shape(x_t, *noise, "ddim_step noise");
        sigma = eta * std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(1.0 - a_t / a_prev);
    }
    const double dir = std::sqrt(std::max(0.0, 1.0 - a_prev - sigma * sigma));

    FrameLatent out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0_pred = (x_t[i] - sn_t * eps_hat[i]) / sa_t;
        out[i] = sa_prev * x0_pred + dir * eps_hat[i];
        if (sigma > 0.0) out[i] += sigma * (*noise)[i];
    }
    return out;
}

/// Identifies the latent being denoised, for instrumentation only.
struct DenoiseTag {
    std::int64_t frame = 0;
    std::int64_t tick = 0;
};

/// ε_θ(x_t, t, c): predicts the noise in x_t. Implementations must be pure.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    FrameLatent predict_noise(const FrameLatent& x_t, int t, const Condition& c, const NoiseSchedule& schedule,
                              DenoiseTag tag = {}) const {
        FrameLatent eps = do_predict(x_t, t, c, schedule, tag);
        if (eps.shape() != x_t.shape()) throw ShapeError("denoiser returned latent of shape " + eps.shape().str());
        if (!eps.all_finite()) throw NumericError("denoiser returned non-finite values at step " + std::to_string(t));
        return eps;
    }

private:
    virtual FrameLatent do_predict(const FrameLatent& x_t, int t, const Condition& c, const NoiseSchedule& schedule,
                                   DenoiseTag tag) const = 0;
};

/// x0 ~ N(μ(c), σ0² I): the exactly solvable data distribution of the toy backend.
struct GaussianWorld {
    double prior_std = 0.5;
    std::function<FrameLatent(const Condition&)> mean_map;
};

/// Exact ε̂ = E[ε | x_t] for the Gaussian world.
inline FrameLatent analytic_eps(const FrameLatent& x_t, int t, const GaussianWorld& world, const Condition& c,
                                const NoiseSchedule& schedule) {
    schedule.check_step(t, "analytic_eps");
    if (!(world.prior_std >= 0.0)) throw ConfigError("analytic_eps: prior_std must be >= 0");
    const FrameLatent mu = world.mean_map(c);
    require_same_shape(x_t, mu, "analytic_eps");

    const double a = schedule.alpha_bar(t);
    const double sa = std::sqrt(a);
    const double var0 = world.prior_std * world.prior_std;
    const double denom = a * var0 + (1.0 - a);
    const double sn = std::sqrt(1.0 - a);

    FrameLatent eps(x_t.shape());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double x0_mean = (sa * var0 * x_t[i] + (1.0 - a) * mu[i]) / denom;
        eps[i] = (x_t[i] - sa * x0_mean) / sn;
    }
    return eps;
}

class AnalyticDenoiser final : public DenoiserBackend {
public:
    explicit AnalyticDenoiser(GaussianWorld world) : world_(std::move(world)) {
        if (!world_.mean_map) throw ConfigError("AnalyticDenoiser: mean_map is empty");
        if (!(world_.prior_std >= 0.0)) throw ConfigError("AnalyticDenoiser: prior_std must be >= 0");
    }

    const GaussianWorld& world() const noexcept { return world_; }

private:
    FrameLatent do_predict(const FrameLatent& x_t, int t, const Condition& c, const NoiseSchedule& schedule,
                           DenoiseTag) const override {
        return analytic_eps(x_t, t, world_, c, schedule);
    }

    GaussianWorld world_;
};

/// Full reverse chain from a seeded x_T ~ N(0, I) down to step 0.
inline FrameLatent sample_reverse(const DenoiserBackend& denoiser, const Condition& c, const NoiseSchedule& schedule,
                                  std::uint64_t seed, LatentShape shape, double eta = 0.0) {
    FrameLatent x = gaussian_latent(shape, seed);
    for (int t = schedule.steps(); t >= 1; --t) {
        const FrameLatent eps = denoiser.predict_noise(x, t, c, schedule);
        if (eta > 0.0) {
            const FrameLatent z = gaussian_latent(shape, derive_seed(seed, "ddim-eta", {t}));
            x = ddim_step(x, eps, t, t - 1, schedule, eta, &z);
        } else {
            x = ddim_step(x, eps, t, t - 1, schedule);
        }
    }
    return x;
}

} // namespace vgot

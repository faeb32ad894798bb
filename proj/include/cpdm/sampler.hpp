#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cpdm/diffusion.hpp"
#include "cpdm/nn/unet.hpp"
#include "cpdm/rng.hpp"
#include "cpdm/schedule.hpp"

namespace cpdm {

struct SampleConfig {
    uint64_t seed = 0;
    /// > 0: keep intermediate states every that many steps in the trace.
    int trajectory_every = 0;
};

/// Per-run record used by tests and the trajectory dump: which steps injected
/// noise, plus optional intermediate states (pairs of t and x_t).
template <class S>
struct SampleTrace {
    std::vector<int> steps;
    std::vector<bool> z_used;
    std::vector<std::pair<int, ImageT<S>>> snapshots;
};

/// One reverse transition given an already-predicted noise:
/// x_{t-1} = mean_from_eps(x_t, t, eps_hat) + sqrt(sigma_t) * z.
/// sigma_1 is zero, so the t=1 step is deterministic.
template <class S>
ImageT<S> reverse_step_from_eps(const ImageT<S>& xt, int t,
                                const TensorT<S>& eps_hat, const TensorT<S>& z,
                                const NoiseSchedule& s) {
    detail::require_same_shape(xt.t, z, "reverse_step");
    ImageT<S> mean = mean_from_eps(xt, std::vector<int>(xt.t.b, t), eps_hat, s);
    const S sd = static_cast<S>(std::sqrt(s.posterior_variance(t)));
    for (size_t i = 0; i < mean.t.size(); ++i) mean.t.v[i] += sd * z.v[i];
    return mean;
}

/// One reverse transition with the model in the loop; the difference
/// condition is recomputed from the current state.
template <class S>
ImageT<S> reverse_step(const nn::UNet<S>& model, const ImageT<S>& xt, int t,
                       const ImageT<S>& y0, const TensorT<S>& z,
                       const NoiseSchedule& s) {
    TensorT<S> diff;
    const TensorT<S>* diff_ptr = nullptr;
    if (model.config().use_difference_condition) {
        diff = y0.t;
        for (size_t i = 0; i < diff.size(); ++i) diff.v[i] -= xt.t.v[i];
        diff_ptr = &diff;
    }
    TensorT<S> eps_hat = model.forward(
        xt.t, std::vector<int>(xt.t.b, t), y0.t, diff_ptr, nullptr);
    return reverse_step_from_eps(xt, t, eps_hat, z, s);
}

/// Ancestral sampling conditioned on y0: start from pure Gaussian noise and
/// iterate the reverse step from t = T down to 1. Returns the model-space
/// result; neither y0 nor the parameters are touched.
template <class S>
ImageT<S> sample(const nn::UNet<S>& model, const SampleConfig& cfg,
                 const ImageT<S>& y0, const NoiseSchedule& s,
                 SampleTrace<S>* trace = nullptr) {
    detail::require_space(y0, Space::Model, "sample");

    Rng init = Rng::stream(cfg.seed, Rng::Role::SampleNoise, 0);
    ImageT<S> x{TensorT<S>(y0.t.b, y0.t.c, y0.t.h, y0.t.w), Space::Model};
    init.fill_normal(x.t);

    if (trace && cfg.trajectory_every > 0)
        trace->snapshots.emplace_back(s.steps(), x);

    for (int t = s.steps(); t >= 1; --t) {
        TensorT<S> z(x.t.b, x.t.c, x.t.h, x.t.w);
        const bool use_z = t > 1;
        if (use_z) {
            Rng zr = Rng::stream(cfg.seed, Rng::Role::SampleNoise,
                                 static_cast<uint64_t>(t));
            zr.fill_normal(z);
        }
        x = reverse_step(model, x, t, y0, z, s);
        if (!x.t.all_finite())
            throw std::runtime_error("sample: non-finite state after step t=" +
                                     std::to_string(t));
        if (trace) {
            trace->steps.push_back(t);
            trace->z_used.push_back(use_z);
            if (cfg.trajectory_every > 0 &&
                ((t - 1) % cfg.trajectory_every == 0))
                trace->snapshots.emplace_back(t - 1, x);
        }
    }
    return x;
}

}  // namespace cpdm

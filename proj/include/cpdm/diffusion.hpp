#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpdm/schedule.hpp"
#include "cpdm/tensor.hpp"

namespace cpdm {

/// Pure forward-process and reverse-step math over image tensors. Every
/// function here is stateless: same inputs give bit-identical outputs.
/// Timesteps are per batch element (t[b] applies to slice b).

namespace detail {

inline void require_timesteps(const std::vector<int>& t, int batch,
                              const NoiseSchedule& s) {
    if (static_cast<int>(t.size()) != batch)
        throw std::invalid_argument(
            "timestep vector length " + std::to_string(t.size()) +
            " does not match batch " + std::to_string(batch));
    for (int tb : t)
        if (tb < 1 || tb > s.steps())
            throw std::out_of_range("timestep " + std::to_string(tb) +
                                    " outside [1, " +
                                    std::to_string(s.steps()) + "]");
}

// Applies out[b] = a_coef[b] * x[b] + b_coef[b] * y[b] slice-wise.
template <class S>
TensorT<S> per_batch_affine(const TensorT<S>& x, const TensorT<S>& y,
                            const std::vector<double>& a_coef,
                            const std::vector<double>& b_coef) {
    TensorT<S> out(x.b, x.c, x.h, x.w);
    const size_t plane = static_cast<size_t>(x.c) * x.h * x.w;
    for (int bi = 0; bi < x.b; ++bi) {
        const S ca = static_cast<S>(a_coef[bi]);
        const S cb = static_cast<S>(b_coef[bi]);
        const S* px = x.data() + bi * plane;
        const S* py = y.data() + bi * plane;
        S* po = out.data() + bi * plane;
        for (size_t i = 0; i < plane; ++i) po[i] = ca * px[i] + cb * py[i];
    }
    return out;
}

}  // namespace detail

/// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.
template <class S>
ImageT<S> q_sample(const ImageT<S>& x0, const std::vector<int>& t,
                   const TensorT<S>& eps, const NoiseSchedule& s) {
    detail::require_space(x0, Space::Model, "q_sample");
    detail::require_same_shape(x0.t, eps, "q_sample");
    detail::require_timesteps(t, x0.t.b, s);

    std::vector<double> ca(x0.t.b), cb(x0.t.b);
    for (int bi = 0; bi < x0.t.b; ++bi) {
        double abar = s.alpha_bar(t[bi]);
        ca[bi] = std::sqrt(abar);
        cb[bi] = std::sqrt(1.0 - abar);
    }
    return {detail::per_batch_affine(x0.t, eps, ca, cb), Space::Model};
}

/// Mean of the reverse-step posterior given both endpoints x0 and x_t.
template <class S>
ImageT<S> q_posterior_mean(const ImageT<S>& x0, const ImageT<S>& xt,
                           const std::vector<int>& t, const NoiseSchedule& s) {
    detail::require_same_shape(x0.t, xt.t, "q_posterior_mean");
    detail::require_timesteps(t, x0.t.b, s);

    std::vector<double> ca(x0.t.b), cb(x0.t.b);
    for (int bi = 0; bi < x0.t.b; ++bi) {
        auto [coef_xt, coef_x0] = s.posterior_mean_coeffs(t[bi]);
        ca[bi] = coef_xt;
        cb[bi] = coef_x0;
    }
    return {detail::per_batch_affine(xt.t, x0.t, ca, cb), Space::Model};
}

/// Same posterior mean, parameterized by the (predicted) noise instead of x0:
/// (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(alpha_t).
template <class S>
ImageT<S> mean_from_eps(const ImageT<S>& xt, const std::vector<int>& t,
                        const TensorT<S>& eps_hat, const NoiseSchedule& s) {
    detail::require_same_shape(xt.t, eps_hat, "mean_from_eps");
    detail::require_timesteps(t, xt.t.b, s);

    std::vector<double> ca(xt.t.b), cb(xt.t.b);
    for (int bi = 0; bi < xt.t.b; ++bi) {
        double a = s.alpha(t[bi]);
        double abar = s.alpha_bar(t[bi]);
        double inv_sqrt_a = 1.0 / std::sqrt(a);
        ca[bi] = inv_sqrt_a;
        cb[bi] = -inv_sqrt_a * (1.0 - a) / std::sqrt(1.0 - abar);
    }
    return {detail::per_batch_affine(xt.t, eps_hat, ca, cb), Space::Model};
}

/// Affine [0,1] -> [-1,1]. Input must be tagged Metric.
template <class S>
ImageT<S> to_model_space(const ImageT<S>& img) {
    detail::require_space(img, Space::Metric, "to_model_space");
    ImageT<S> out{TensorT<S>(img.t.b, img.t.c, img.t.h, img.t.w), Space::Model};
    for (size_t i = 0; i < img.t.size(); ++i)
        out.t.v[i] = static_cast<S>(2) * img.t.v[i] - static_cast<S>(1);
    return out;
}

/// Affine [-1,1] -> [0,1], clamped to [0,1]: sampler outputs may overshoot
/// the nominal range and this is the only place values are clamped.
template <class S>
ImageT<S> to_metric_space(const ImageT<S>& img) {
    detail::require_space(img, Space::Model, "to_metric_space");
    ImageT<S> out{TensorT<S>(img.t.b, img.t.c, img.t.h, img.t.w),
                  Space::Metric};
    for (size_t i = 0; i < img.t.size(); ++i) {
        S x = (img.t.v[i] + static_cast<S>(1)) / static_cast<S>(2);
        out.t.v[i] = std::min<S>(S(1), std::max<S>(S(0), x));
    }
    return out;
}

/// Convenience for single-timestep batches.
template <class S>
ImageT<S> q_sample(const ImageT<S>& x0, int t, const TensorT<S>& eps,
                   const NoiseSchedule& s) {
    return q_sample(x0, std::vector<int>(x0.t.b, t), eps, s);
}

}  // namespace cpdm
